#include "artifact/inversion.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "artifact/io.hpp"

namespace artifact {

LossParts reconstruction_loss(const Image& x, const Image& xhat, const FinetuneConfig& cfg,
                              const PerceptualMetric& perceptual,
                              const IdentityEmbedderHandle& embedder) {
  cfg.validate();
  if (!same_shape(x, xhat)) throw ShapeError("reconstruction_loss: image shapes differ");
  LossParts parts;
  parts.mse = mean_squared_error(x, xhat);
  parts.lpips = perceptual.distance(x, xhat);
  parts.id = 1.0 - identity_similarity(embedder, x, xhat);
  parts.total = cfg.lambda_mse * parts.mse + cfg.lambda_lpips * parts.lpips +
                cfg.lambda_id * parts.id;
  return parts;
}

namespace {

struct Adam {
  Matrix mw, vw;
  Vector mc, vc;
  int t = 0;
  static constexpr Scalar b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Adam(Index rows, Index cols)
      : mw(Matrix::Zero(rows, cols)), vw(Matrix::Zero(rows, cols)),
        mc(Vector::Zero(rows)), vc(Vector::Zero(rows)) {}

  void step(Matrix& w, Vector& c, const Matrix& gw, const Vector& gc, Scalar lr) {
    ++t;
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseProduct(gw);
    mc = b1 * mc + (1 - b1) * gc;
    vc = b2 * vc + (1 - b2) * gc.cwiseProduct(gc);
    const Scalar c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
    w.array() -= lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    c.array() -= lr * (mc.array() / c1) / ((vc.array() / c2).sqrt() + eps);
  }
};

// Gradient of the composite loss with respect to the reconstruction.
Image loss_grad_xhat(const Image& x, const Image& xhat, const FinetuneConfig& cfg,
                     const PerceptualMetric& perceptual,
                     const IdentityEmbedderHandle& embedder) {
  Image g(x.height(), x.width());
  const Scalar n = static_cast<Scalar>(3 * x.pixels());
  for (int c = 0; c < 3; ++c)
    g.ch[c] = cfg.lambda_mse * 2.0 * (xhat.ch[c] - x.ch[c]) / n;
  if (cfg.lambda_lpips > 0) {
    const Image gp = perceptual.distance_grad_b(x, xhat);
    for (int c = 0; c < 3; ++c) g.ch[c] += cfg.lambda_lpips * gp.ch[c];
  }
  if (cfg.lambda_id > 0) {
    const Vector ex = embedder.embed(x);
    const Image gi = embedder.embed_vjp(xhat, -ex);
    for (int c = 0; c < 3; ++c) g.ch[c] += cfg.lambda_id * gi.ch[c];
  }
  return g;
}

}  // namespace

FinetuneResult finetune_encoder(const EncoderHandle& encoder, const GeneratorHandle& generator,
                                const std::vector<Image>& corpus, const FinetuneConfig& cfg,
                                const PerceptualMetric& perceptual,
                                const IdentityEmbedderHandle& embedder) {
  cfg.validate();
  if (corpus.empty()) throw CorpusError("finetune_encoder: empty corpus");
  const auto* toy_enc = dynamic_cast<const toy::ToyEncoder*>(&encoder);
  if (!toy_enc)
    throw BackendError("finetune_encoder: encoder backend is not trainable in-process");
  const auto* toy_gen = dynamic_cast<const toy::ToyGenerator*>(&generator);
  if (!toy_gen) throw BackendError("finetune_encoder: generator backend is not the toy stack");

  const std::uint64_t gen_digest = generator.param_digest();

  // Held-out split from the tail of the corpus.
  const std::size_t heldout =
      std::min(corpus.size() - (corpus.size() > 1 ? 1 : 0),
               std::max<std::size_t>(corpus.size() > 1 ? 1 : 0,
                                     static_cast<std::size_t>(corpus.size() * cfg.heldout_fraction)));
  const std::size_t train_n = corpus.size() - heldout;

  Matrix P = toy_enc->weights();
  Vector c = toy_enc->offset();
  const Index side = toy_enc->input_side();
  const Index ns = toy_enc->num_styles(), dim = toy_enc->dim();

  auto make_encoder = [&](const Matrix& wm, const Vector& off) {
    return std::make_shared<toy::ToyEncoder>(wm, off, side, ns, dim);
  };

  auto eval_split = [&](const std::shared_ptr<toy::ToyEncoder>& e, std::size_t begin,
                        std::size_t end) {
    LossParts mean;
    if (begin >= end) return mean;
    for (std::size_t i = begin; i < end; ++i) {
      const Image xhat = decode(generator, encode(*e, corpus[i]));
      const LossParts p = reconstruction_loss(corpus[i], xhat, cfg, perceptual, embedder);
      mean.total += p.total;
      mean.mse += p.mse;
      mean.lpips += p.lpips;
      mean.id += p.id;
    }
    const Scalar n = static_cast<Scalar>(end - begin);
    mean.total /= n;
    mean.mse /= n;
    mean.lpips /= n;
    mean.id /= n;
    return mean;
  };

  FinetuneResult result;
  result.heldout_before = eval_split(make_encoder(P, c), train_n, corpus.size());

  if (cfg.steps == 0) {
    result.encoder = make_encoder(P, c);
    result.heldout_after = result.heldout_before;
    return result;
  }

  Adam adam(P.rows(), P.cols());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, train_n - 1);

  for (int step = 0; step < cfg.steps; ++step) {
    Matrix gP = Matrix::Zero(P.rows(), P.cols());
    Vector gc = Vector::Zero(c.size());
    LossParts batch_loss;
    const int bs = cfg.batch_size;
    auto enc = make_encoder(P, c);

    for (int b = 0; b < bs; ++b) {
      const Image& x = corpus[pick(rng)];
      const Vector feats = enc->features(x);
      const Latent w = encode(*enc, x);
      const Image xhat = decode(generator, w);

      const LossParts p = reconstruction_loss(x, xhat, cfg, perceptual, embedder);
      batch_loss.total += p.total;
      batch_loss.mse += p.mse;
      batch_loss.lpips += p.lpips;
      batch_loss.id += p.id;

      const Image gx = loss_grad_xhat(x, xhat, cfg, perceptual, embedder);
      const Latent gw = generator.decode_vjp(w, gx);
      Vector gw_vec(ns * dim);
      for (Index i = 0; i < ns; ++i)
        for (Index j = 0; j < dim; ++j) gw_vec[i * dim + j] = gw.codes(i, j);
      gP.noalias() += gw_vec * feats.transpose();
      gc += gw_vec;
    }
    gP /= Scalar(bs);
    gc /= Scalar(bs);
    batch_loss.total /= bs;
    batch_loss.mse /= bs;
    batch_loss.lpips /= bs;
    batch_loss.id /= bs;

    if (!std::isfinite(batch_loss.total))
      throw BackendError("finetune_encoder: loss diverged (non-finite) at step " +
                         std::to_string(step));

    adam.step(P, c, gP, gc, cfg.learning_rate);
    result.curve.push_back({step, batch_loss});
  }

  result.encoder = make_encoder(P, c);
  result.heldout_after = eval_split(make_encoder(P, c), train_n, corpus.size());

  if (generator.param_digest() != gen_digest)
    throw BackendError("finetune_encoder: generator parameters changed during training");
  return result;
}

void write_loss_curve_csv(const std::filesystem::path& path,
                          const std::vector<LossCurvePoint>& curve) {
  std::ostringstream out;
  out << "step,total,mse,lpips,id\n";
  for (const auto& p : curve)
    out << p.step << "," << p.loss.total << "," << p.loss.mse << "," << p.loss.lpips << ","
        << p.loss.id << "\n";
  const std::string s = out.str();
  write_file(path, s.data(), s.size());
}

LatentStore invert_corpus(const EncoderHandle& encoder, const GeneratorHandle& generator,
                          std::vector<toy::CorpusItem>& items,
                          const std::filesystem::path& out_dir) {
  LatentStore store;
  store.dir = out_dir;
  std::filesystem::create_directories(out_dir);

  for (auto& item : items) {
    Image img;
    try {
      img = toy::item_image(item);
    } catch (const Error& e) {
      std::cerr << "warning: skipping unreadable image '" << item.id << "': " << e.what()
                << "\n";
      store.skipped.push_back(item.id);
      continue;
    }
    const Latent w = encode(encoder, img);
    const Image xhat = decode(generator, w);

    InversionEntry entry;
    entry.id = item.id;
    std::string file = item.id;
    for (auto& ch : file)
      if (ch == '/' || ch == '\\' || ch == ':') ch = '_';
    entry.latent_file = out_dir / (file + ".latent");
    entry.reconstruction_mse = mean_squared_error(img, xhat);
    save_latent(entry.latent_file, w);
    store.entries.push_back(std::move(entry));
  }

  std::ostringstream index;
  index << "id,file,mse\n";
  for (const auto& e : store.entries)
    index << e.id << "," << e.latent_file.filename().string() << "," << e.reconstruction_mse
          << "\n";
  const std::string s = index.str();
  write_file(out_dir / "index.csv", s.data(), s.size());
  return store;
}

LatentStore load_latent_store(const std::filesystem::path& dir) {
  LatentStore store;
  store.dir = dir;
  std::ifstream in(dir / "index.csv");
  if (!in) throw Error("cannot open latent store index: " + (dir / "index.csv").string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) throw Error("malformed latent store index line: " + line);
    InversionEntry e;
    e.id = line.substr(0, c1);
    e.latent_file = dir / line.substr(c1 + 1, c2 - c1 - 1);
    e.reconstruction_mse = std::stod(line.substr(c2 + 1));
    store.entries.push_back(std::move(e));
  }
  return store;
}

}  // namespace artifact
