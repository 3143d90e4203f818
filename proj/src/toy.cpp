#include "artifact/toy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "artifact/io.hpp"

namespace artifact::toy {

namespace {

inline Scalar sigmoid(Scalar z) { return 1.0 / (1.0 + std::exp(-z)); }

Vector latent_vec(const Latent& w) {
  Vector v(w.num_styles() * w.dim());
  for (Index i = 0; i < w.num_styles(); ++i)
    for (Index j = 0; j < w.dim(); ++j) v[i * w.dim() + j] = w.codes(i, j);
  return v;
}

Latent latent_from_vec(const Vector& v, Index num_styles, Index dim) {
  Latent w(num_styles, dim);
  for (Index i = 0; i < num_styles; ++i)
    for (Index j = 0; j < dim; ++j) w.codes(i, j) = v[i * dim + j];
  return w;
}

std::uint64_t digest_doubles(const double* p, std::size_t n, std::uint64_t h) {
  return fnv1a64(p, n * sizeof(double), h);
}

}  // namespace

// ---- ToyGenerator ----

ToyGenerator::ToyGenerator(std::uint64_t seed, Index num_styles, Index dim, Index side)
    : num_styles_(num_styles), dim_(dim), side_(side) {
  if (num_styles < 1 || dim < 1 || side < 4)
    throw ConfigError("ToyGenerator: degenerate shape");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
  std::normal_distribution<Scalar> gauss(0.0, 1.0);

  const Index npix = 3 * side * side;
  basis_ = Matrix::Zero(npix, num_styles * dim);
  bias_ = Vector::Zero(npix);

  // Low-frequency bias field.
  for (int c = 0; c < 3; ++c) {
    const Scalar a1 = 0.5 * (unif(rng) - 0.5), a2 = 0.5 * (unif(rng) - 0.5);
    const Scalar p1 = 6.28318530717958648 * unif(rng), p2 = 6.28318530717958648 * unif(rng);
    for (Index y = 0; y < side; ++y)
      for (Index x = 0; x < side; ++x)
        bias_[(c * side + y) * side + x] =
            a1 * std::cos(6.28318530717958648 * x / side + p1) +
            a2 * std::cos(6.28318530717958648 * y / side + p2);
  }

  // Artifact pattern lives in a fixed central box.
  artifact_box_ = {side * 10 / 32, side * 10 / 32, side * 22 / 32, side * 22 / 32};

  const Index third = num_styles / 3;
  const bool has_thirds = num_styles % 3 == 0 && third > 0;

  for (Index l = 0; l < num_styles; ++l) {
    // Spatial scale shrinks with depth: coarse structure first, fine last.
    const Scalar t = num_styles > 1 ? Scalar(l) / Scalar(num_styles - 1) : 0.0;
    const Scalar width = side * (0.12 * (1.0 - t) + 0.05 * t);
    const bool mid_level = has_thirds && l >= third && l < 2 * third;

    for (Index j = 0; j < dim; ++j) {
      const Index col = l * dim + j;
      if (mid_level && j == 0) {
        // Checkerboard atom confined to the artifact box.
        artifact_coords_.emplace_back(l, j);
        const Scalar amp[3] = {1.15 + 0.05 * unif(rng), 1.20 + 0.05 * unif(rng),
                               1.15 + 0.05 * unif(rng)};
        for (int c = 0; c < 3; ++c)
          for (Index y = artifact_box_.y0; y < artifact_box_.y1; ++y)
            for (Index x = artifact_box_.x0; x < artifact_box_.x1; ++x)
              basis_((c * side + y) * side + x, col) =
                  ((x + y) % 2 == 0 ? amp[c] : -amp[c]);
        continue;
      }
      // Oriented cosine modulation keeps the atoms mutually distinguishable;
      // plain isotropic bumps leave the basis too ill-conditioned to invert.
      const Scalar cy = 3.0 + unif(rng) * (side - 7.0);
      const Scalar cx = 3.0 + unif(rng) * (side - 7.0);
      const Scalar theta = 6.28318530717958648 * unif(rng);
      const Scalar phase = 6.28318530717958648 * unif(rng);
      const Scalar freq = (3.0 + 1.5 * t) / width;
      const Scalar uy = std::sin(theta), ux = std::cos(theta);
      Scalar amp[3];
      for (auto& a : amp) a = 0.27 * gauss(rng);
      for (int c = 0; c < 3; ++c)
        for (Index y = 0; y < side; ++y)
          for (Index x = 0; x < side; ++x) {
            const Scalar d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            const Scalar carrier =
                std::cos(freq * (ux * (x - cx) + uy * (y - cy)) + phase);
            basis_((c * side + y) * side + x, col) +=
                amp[c] * carrier * std::exp(-d2 / (2.0 * width * width));
          }
    }
  }
}

Vector ToyGenerator::preactivation(const Latent& w) const {
  return bias_ + basis_ * latent_vec(w);
}

Image ToyGenerator::decode_impl(const Latent& w) const {
  const Vector pre = preactivation(w);
  Vector out(pre.size());
  for (Index i = 0; i < pre.size(); ++i) out[i] = sigmoid(pre[i]);
  return unflatten(out, side_, side_);
}

Latent ToyGenerator::decode_vjp(const Latent& w, const Image& image_cotangent) const {
  const Vector pre = preactivation(w);
  Vector cot = flatten(image_cotangent);
  for (Index i = 0; i < pre.size(); ++i) {
    const Scalar s = sigmoid(pre[i]);
    cot[i] *= s * (1.0 - s);
  }
  return latent_from_vec(basis_.transpose() * cot, num_styles_, dim_);
}

Image ToyGenerator::bias_image() const {
  Vector out(bias_.size());
  for (Index i = 0; i < bias_.size(); ++i) out[i] = sigmoid(bias_[i]);
  return unflatten(out, side_, side_);
}

std::uint64_t ToyGenerator::param_digest() const {
  std::uint64_t h = digest_doubles(basis_.data(), static_cast<std::size_t>(basis_.size()),
                                   0xcbf29ce484222325ull);
  return digest_doubles(bias_.data(), static_cast<std::size_t>(bias_.size()), h);
}

// ---- ToyEncoder ----

ToyEncoder::ToyEncoder(Matrix weights, Vector offset, Index side, Index num_styles, Index dim)
    : weights_(std::move(weights)), offset_(std::move(offset)), side_(side),
      num_styles_(num_styles), dim_(dim) {
  if (weights_.rows() != num_styles_ * dim_ || weights_.cols() != 3 * side_ * side_ ||
      offset_.size() != num_styles_ * dim_)
    throw ShapeError("ToyEncoder: parameter shapes inconsistent");
}

Vector ToyEncoder::features(const Image& x) const {
  Vector v = flatten(x);
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar c = std::min(1.0 - 1e-4, std::max(1e-4, v[i]));
    v[i] = std::log(c / (1.0 - c));
  }
  return v;
}

Latent ToyEncoder::encode_impl(const Image& x) const {
  return latent_from_vec(weights_ * features(x) + offset_, num_styles_, dim_);
}

std::uint64_t ToyEncoder::param_digest() const {
  std::uint64_t h = digest_doubles(weights_.data(),
                                   static_cast<std::size_t>(weights_.size()),
                                   0xcbf29ce484222325ull);
  return digest_doubles(offset_.data(), static_cast<std::size_t>(offset_.size()), h);
}

std::shared_ptr<ToyEncoder> ToyEncoder::ideal(const ToyGenerator& g) {
  const Matrix pinv = g.basis().completeOrthogonalDecomposition().pseudoInverse();
  return std::make_shared<ToyEncoder>(pinv, Vector(-pinv * g.bias()), g.output_side(),
                                      g.num_styles(), g.dim());
}

std::shared_ptr<ToyEncoder> ToyEncoder::pretrained(const ToyGenerator& g, std::uint64_t seed,
                                                   Scalar noise_scale) {
  auto exact = ideal(g);
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  Matrix w = exact->weights();
  Vector c = exact->offset();
  const Scalar w_rms = std::sqrt(w.squaredNorm() / w.size());
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) w(i, j) += noise_scale * w_rms * gauss(rng);
  const Scalar c_rms = std::max(1e-3, std::sqrt(c.squaredNorm() / c.size()));
  for (Index i = 0; i < c.size(); ++i) c[i] += noise_scale * c_rms * gauss(rng);
  return std::make_shared<ToyEncoder>(std::move(w), std::move(c), g.output_side(),
                                      g.num_styles(), g.dim());
}

void save_toy_encoder(const std::filesystem::path& path, const ToyEncoder& e) {
  std::vector<std::uint8_t> buf;
  auto put_i64 = [&](std::int64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  };
  const char magic[8] = {'T', 'O', 'Y', 'E', 'N', 'C', '0', '1'};
  buf.insert(buf.end(), magic, magic + 8);
  put_i64(e.input_side());
  put_i64(e.num_styles());
  put_i64(e.dim());
  auto put_doubles = [&](const double* p, std::size_t n) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(p);
    buf.insert(buf.end(), raw, raw + n * sizeof(double));
  };
  put_doubles(e.weights().data(), static_cast<std::size_t>(e.weights().size()));
  put_doubles(e.offset().data(), static_cast<std::size_t>(e.offset().size()));
  write_file(path, buf.data(), buf.size());
}

std::shared_ptr<ToyEncoder> load_toy_encoder(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  if (buf.size() < 32 || std::memcmp(buf.data(), "TOYENC01", 8) != 0)
    throw Error("not a toy encoder checkpoint: " + path.string());
  auto get_i64 = [&](std::size_t at) {
    std::int64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[at + i];
    return v;
  };
  const Index side = get_i64(8), num_styles = get_i64(16), dim = get_i64(24);
  const Index rows = num_styles * dim, cols = 3 * side * side;
  const std::size_t need = 32 + sizeof(double) * static_cast<std::size_t>(rows * cols + rows);
  if (buf.size() != need) throw Error("toy encoder checkpoint truncated: " + path.string());
  Matrix w(rows, cols);
  Vector c(rows);
  std::memcpy(w.data(), buf.data() + 32, sizeof(double) * rows * cols);
  std::memcpy(c.data(), buf.data() + 32 + sizeof(double) * rows * cols, sizeof(double) * rows);
  return std::make_shared<ToyEncoder>(std::move(w), std::move(c), side, num_styles, dim);
}

// ---- ToyDetector ----

namespace {

constexpr Index kC1 = 8, kK1 = 5, kS1 = 2, kP1 = 2;
constexpr Index kC2 = 12, kK2 = 3, kS2 = 2, kP2 = 1;
constexpr Index kPool = 2;

std::vector<Matrix> conv_forward(const std::vector<Matrix>& in,
                                 const std::vector<std::vector<Matrix>>& kernels,
                                 Index ksize, Index stride, Index pad) {
  const Index ih = in[0].rows(), iw = in[0].cols();
  const Index oh = (ih + 2 * pad - ksize) / stride + 1;
  const Index ow = (iw + 2 * pad - ksize) / stride + 1;
  std::vector<Matrix> out(kernels.size(), Matrix::Zero(oh, ow));
  for (std::size_t oc = 0; oc < kernels.size(); ++oc)
    for (std::size_t ic = 0; ic < in.size(); ++ic) {
      const Matrix& k = kernels[oc][ic];
      const Matrix& m = in[ic];
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          Scalar acc = 0;
          for (Index ky = 0; ky < ksize; ++ky) {
            const Index iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= ih) continue;
            for (Index kx = 0; kx < ksize; ++kx) {
              const Index ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= iw) continue;
              acc += m(iy, ix) * k(ky, kx);
            }
          }
          out[oc](oy, ox) += acc;
        }
    }
  return out;
}

std::vector<Matrix> conv_backward_input(const std::vector<Matrix>& gout,
                                        const std::vector<std::vector<Matrix>>& kernels,
                                        Index ksize, Index stride, Index pad, Index ih,
                                        Index iw) {
  std::vector<Matrix> gin(kernels[0].size(), Matrix::Zero(ih, iw));
  const Index oh = gout[0].rows(), ow = gout[0].cols();
  for (std::size_t oc = 0; oc < kernels.size(); ++oc)
    for (std::size_t ic = 0; ic < gin.size(); ++ic) {
      const Matrix& k = kernels[oc][ic];
      const Matrix& go = gout[oc];
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          const Scalar g = go(oy, ox);
          if (g == 0.0) continue;
          for (Index ky = 0; ky < ksize; ++ky) {
            const Index iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= ih) continue;
            for (Index kx = 0; kx < ksize; ++kx) {
              const Index ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= iw) continue;
              gin[ic](iy, ix) += g * k(ky, kx);
            }
          }
        }
    }
  return gin;
}

}  // namespace

struct ToyDetector::Forward {
  std::vector<Matrix> a1;  // post-tanh conv1 maps
  std::vector<Matrix> a2;  // post-tanh conv2 maps
  Vector pooled;
  Scalar logit = 0;
  Scalar score = 0;
};

ToyDetector::ToyDetector(std::string name, std::uint64_t seed, Index side)
    : name_(std::move(name)), side_(side) {
  if (side % 8 != 0) throw ConfigError("ToyDetector: side must be a multiple of 8");
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  const Scalar g1 = 1.0 / std::sqrt(Scalar(3 * kK1 * kK1));
  conv1_.assign(kC1, std::vector<Matrix>(3));
  for (auto& oc : conv1_)
    for (auto& k : oc) {
      k = Matrix(kK1, kK1);
      for (Index y = 0; y < kK1; ++y)
        for (Index x = 0; x < kK1; ++x) k(y, x) = g1 * gauss(rng);
    }
  const Scalar g2 = 1.0 / std::sqrt(Scalar(kC1 * kK2 * kK2));
  conv2_.assign(kC2, std::vector<Matrix>(kC1));
  for (auto& oc : conv2_)
    for (auto& k : oc) {
      k = Matrix(kK2, kK2);
      for (Index y = 0; y < kK2; ++y)
        for (Index x = 0; x < kK2; ++x) k(y, x) = g2 * gauss(rng);
    }
  const Index feat = kC2 * (side_ / 8) * (side_ / 8);
  head_w_ = Vector::Zero(feat);
  head_b_ = 0.0;
}

ToyDetector::Forward ToyDetector::forward(const Image& x) const {
  Forward f;
  std::vector<Matrix> in(x.ch.begin(), x.ch.end());
  f.a1 = conv_forward(in, conv1_, kK1, kS1, kP1);
  for (auto& m : f.a1) m = m.array().tanh();
  f.a2 = conv_forward(f.a1, conv2_, kK2, kS2, kP2);
  for (auto& m : f.a2) m = m.array().tanh();

  const Index cells = side_ / 8;  // conv2 maps are side/4; pooled grid side/8
  f.pooled = Vector(kC2 * cells * cells);
  for (Index c = 0; c < kC2; ++c)
    for (Index cy = 0; cy < cells; ++cy)
      for (Index cx = 0; cx < cells; ++cx)
        f.pooled[(c * cells + cy) * cells + cx] =
            f.a2[c].block(cy * kPool, cx * kPool, kPool, kPool).mean();
  f.logit = head_w_.dot(f.pooled) + head_b_;
  f.score = sigmoid(f.logit);
  return f;
}

Scalar ToyDetector::score_impl(const Image& x) const { return forward(x).score; }

Image ToyDetector::score_input_grad(const Image& x) const {
  const Forward f = forward(x);
  const Scalar dz = f.score * (1.0 - f.score);
  const Index cells = side_ / 8;

  // Head and pooling adjoint into post-tanh conv2 maps.
  std::vector<Matrix> ga2(kC2, Matrix::Zero(side_ / 4, side_ / 4));
  for (Index c = 0; c < kC2; ++c)
    for (Index cy = 0; cy < cells; ++cy)
      for (Index cx = 0; cx < cells; ++cx) {
        const Scalar g = dz * head_w_[(c * cells + cy) * cells + cx] / (kPool * kPool);
        for (Index py = 0; py < kPool; ++py)
          for (Index px = 0; px < kPool; ++px) ga2[c](cy * kPool + py, cx * kPool + px) += g;
      }
  for (Index c = 0; c < kC2; ++c)
    ga2[c].array() *= (1.0 - f.a2[c].array().square());

  std::vector<Matrix> ga1 =
      conv_backward_input(ga2, conv2_, kK2, kS2, kP2, side_ / 2, side_ / 2);
  for (Index c = 0; c < kC1; ++c)
    ga1[c].array() *= (1.0 - f.a1[c].array().square());

  std::vector<Matrix> gx = conv_backward_input(ga1, conv1_, kK1, kS1, kP1, side_, side_);
  Image out(side_, side_);
  for (int c = 0; c < 3; ++c) out.ch[c] = gx[c].array();
  return out;
}

LayerMaps ToyDetector::layer_maps(const Image& x, const std::string& layer) const {
  const Forward f = forward(x);
  const Scalar dz = f.score * (1.0 - f.score);
  const Index cells = side_ / 8;

  std::vector<Matrix> ga2(kC2, Matrix::Zero(side_ / 4, side_ / 4));
  for (Index c = 0; c < kC2; ++c)
    for (Index cy = 0; cy < cells; ++cy)
      for (Index cx = 0; cx < cells; ++cx) {
        const Scalar g = dz * head_w_[(c * cells + cy) * cells + cx] / (kPool * kPool);
        for (Index py = 0; py < kPool; ++py)
          for (Index px = 0; px < kPool; ++px) ga2[c](cy * kPool + py, cx * kPool + px) += g;
      }
  if (layer == "conv2") return {f.a2, ga2};

  if (layer == "conv1") {
    std::vector<Matrix> gpre2 = ga2;
    for (Index c = 0; c < kC2; ++c)
      gpre2[c].array() *= (1.0 - f.a2[c].array().square());
    std::vector<Matrix> ga1 =
        conv_backward_input(gpre2, conv2_, kK2, kS2, kP2, side_ / 2, side_ / 2);
    return {f.a1, ga1};
  }
  throw BackendError("ToyDetector: unknown layer '" + layer + "'");
}

Scalar ToyDetector::score_from_layer(const std::string& layer,
                                     const std::vector<Matrix>& acts) const {
  const Index cells = side_ / 8;
  auto pool_and_head = [&](const std::vector<Matrix>& a2) {
    Vector pooled(kC2 * cells * cells);
    for (Index c = 0; c < kC2; ++c)
      for (Index cy = 0; cy < cells; ++cy)
        for (Index cx = 0; cx < cells; ++cx)
          pooled[(c * cells + cy) * cells + cx] =
              a2[c].block(cy * kPool, cx * kPool, kPool, kPool).mean();
    return sigmoid(head_w_.dot(pooled) + head_b_);
  };
  if (layer == "conv2") return pool_and_head(acts);
  if (layer == "conv1") {
    std::vector<Matrix> a2 = conv_forward(acts, conv2_, kK2, kS2, kP2);
    for (auto& m : a2) m = m.array().tanh();
    return pool_and_head(a2);
  }
  throw BackendError("ToyDetector: unknown layer '" + layer + "'");
}

void ToyDetector::fit_head(const std::vector<Image>& reals, const std::vector<Image>& fakes,
                           int iterations, Scalar learning_rate, Scalar l1) {
  const Index n = static_cast<Index>(reals.size() + fakes.size());
  if (n == 0) throw CorpusError("ToyDetector::fit_head: empty training set");
  Matrix feats(head_w_.size(), n);
  Vector labels(n);
  Index col = 0;
  for (const auto& img : reals) {
    feats.col(col) = forward(img).pooled;
    labels[col++] = 0.0;
  }
  for (const auto& img : fakes) {
    feats.col(col) = forward(img).pooled;
    labels[col++] = 1.0;
  }

  // Proximal gradient (ISTA) on l1-regularized logistic loss, full batch.
  // Uninformative features land on exact zero weights.
  for (int t = 1; t <= iterations; ++t) {
    Vector z = feats.transpose() * head_w_ + Vector::Constant(n, head_b_);
    Vector err(n);
    for (Index i = 0; i < n; ++i) err[i] = sigmoid(z[i]) - labels[i];
    const Vector gw = feats * err / Scalar(n);
    const Scalar gb = err.mean();
    head_w_ -= learning_rate * gw;
    head_b_ -= learning_rate * gb;
    const Scalar shrink = learning_rate * l1;
    for (Index i = 0; i < head_w_.size(); ++i)
      head_w_[i] = head_w_[i] > shrink ? head_w_[i] - shrink
                   : head_w_[i] < -shrink ? head_w_[i] + shrink
                                          : 0.0;
  }
}

Scalar ToyDetector::accuracy(const std::vector<Image>& reals,
                             const std::vector<Image>& fakes) const {
  Index correct = 0;
  for (const auto& img : reals)
    if (verdict_from_score(score_impl(img)) == Label::real) ++correct;
  for (const auto& img : fakes)
    if (verdict_from_score(score_impl(img)) == Label::fake) ++correct;
  return Scalar(correct) / Scalar(reals.size() + fakes.size());
}

std::uint64_t ToyDetector::param_digest() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& oc : conv1_)
    for (const auto& k : oc) h = digest_doubles(k.data(), k.size(), h);
  for (const auto& oc : conv2_)
    for (const auto& k : oc) h = digest_doubles(k.data(), k.size(), h);
  h = digest_doubles(head_w_.data(), head_w_.size(), h);
  return digest_doubles(&head_b_, 1, h);
}

// ---- ToyEmbedder ----

ToyEmbedder::ToyEmbedder(std::uint64_t seed, Index side, Index embedding_dim)
    : side_(side), dim_(embedding_dim) {
  if (side % 8 != 0) throw ConfigError("ToyEmbedder: side must be a multiple of 8");
  pool_ = side / 8;
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  const Index feat = 3 * 8 * 8;
  proj_ = Matrix(dim_, feat);
  for (Index i = 0; i < dim_; ++i)
    for (Index j = 0; j < feat; ++j) proj_(i, j) = gauss(rng) / std::sqrt(Scalar(feat));
  offset_ = Vector(dim_);
  for (Index i = 0; i < dim_; ++i) offset_[i] = 0.05 * gauss(rng);
}

Vector ToyEmbedder::embed(const Image& x) const {
  const Vector v = flatten(downsample(x, pool_));
  const Vector u = proj_ * v + offset_;
  return u / std::sqrt(u.squaredNorm() + 1e-24);
}

Image ToyEmbedder::embed_vjp(const Image& x, const Vector& cotangent) const {
  const Vector v = flatten(downsample(x, pool_));
  const Vector u = proj_ * v + offset_;
  const Scalar norm = std::sqrt(u.squaredNorm() + 1e-24);
  const Vector e = u / norm;
  const Vector gu = (cotangent - e * e.dot(cotangent)) / norm;
  const Vector gv = proj_.transpose() * gu;
  Image out(side_, side_);
  const Scalar inv = 1.0 / Scalar(pool_ * pool_);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < side_; ++y)
      for (Index x2 = 0; x2 < side_; ++x2)
        out.ch[c](y, x2) = gv[(c * 8 + y / pool_) * 8 + x2 / pool_] * inv;
  return out;
}

// ---- MsGradPerceptual ----

namespace {

constexpr Scalar kMagEps = 1e-12;
const Index kScales[3] = {1, 2, 4};

struct GradField {
  Matrix mag;  // (h-1) x (w-1), gradient magnitude on the interior grid
  Matrix gx, gy;
};

GradField grad_field(const ArrayT<Scalar>& m) {
  const Index h = m.rows(), w = m.cols();
  GradField f;
  f.gx = (m.rightCols(w - 1) - m.leftCols(w - 1)).matrix().topRows(h - 1);
  f.gy = (m.bottomRows(h - 1) - m.topRows(h - 1)).matrix().leftCols(w - 1);
  f.mag = (f.gx.array().square() + f.gy.array().square() + kMagEps).sqrt().matrix();
  return f;
}

}  // namespace

Scalar MsGradPerceptual::distance(const Image& a, const Image& b) const {
  if (!same_shape(a, b)) throw ShapeError("perceptual distance: image shapes differ");
  Scalar total = 0;
  int used = 0;
  for (Index s : kScales) {
    if (a.height() / s < 2 || a.width() / s < 2) continue;
    const Image as = s == 1 ? a : downsample(a, s);
    const Image bs = s == 1 ? b : downsample(b, s);
    Scalar acc = 0;
    Index n = 0;
    for (int c = 0; c < 3; ++c) {
      const GradField fa = grad_field(as.ch[c]);
      const GradField fb = grad_field(bs.ch[c]);
      acc += (fa.mag - fb.mag).squaredNorm();
      n += fa.mag.size();
    }
    total += acc / Scalar(n);
    ++used;
  }
  if (used == 0) throw ShapeError("perceptual distance: image too small");
  return total / used;
}

Image MsGradPerceptual::distance_grad_b(const Image& a, const Image& b) const {
  if (!same_shape(a, b)) throw ShapeError("perceptual distance: image shapes differ");
  Image out(b.height(), b.width());
  int used = 0;
  for (Index s : kScales)
    if (a.height() / s >= 2 && a.width() / s >= 2) ++used;
  if (used == 0) throw ShapeError("perceptual distance: image too small");

  for (Index s : kScales) {
    if (a.height() / s < 2 || a.width() / s < 2) continue;
    const Image as = s == 1 ? a : downsample(a, s);
    const Image bs = s == 1 ? b : downsample(b, s);
    const Index hs = bs.height(), ws = bs.width();
    Index n = 0;
    for (int c = 0; c < 3; ++c) n += (hs - 1) * (ws - 1);
    for (int c = 0; c < 3; ++c) {
      const GradField fa = grad_field(as.ch[c]);
      const GradField fb = grad_field(bs.ch[c]);
      const Matrix dmag = 2.0 * (fb.mag - fa.mag) / (Scalar(n) * used);
      const Matrix dgx = dmag.cwiseProduct(fb.gx).cwiseQuotient(fb.mag);
      const Matrix dgy = dmag.cwiseProduct(fb.gy).cwiseQuotient(fb.mag);
      // Adjoint of the forward differences into the scaled image grid.
      Matrix gm = Matrix::Zero(hs, ws);
      gm.block(0, 1, hs - 1, ws - 1) += dgx;
      gm.block(0, 0, hs - 1, ws - 1) -= dgx;
      gm.block(1, 0, hs - 1, ws - 1) += dgy;
      gm.block(0, 0, hs - 1, ws - 1) -= dgy;
      // Adjoint of the block-mean downsample.
      const Scalar inv = 1.0 / Scalar(s * s);
      for (Index y = 0; y < hs * s; ++y)
        for (Index x = 0; x < ws * s; ++x)
          out.ch[c](y, x) += gm(y / s, x / s) * inv;
    }
  }
  return out;
}

// ---- Degenerate one-pixel stacks ----

Image Lin1DGenerator::decode_impl(const Latent& w) const {
  Image img(1, 1);
  const Scalar v = sigmoid(w.codes(0, 0));
  for (auto& c : img.ch) c(0, 0) = v;
  return img;
}

Latent Lin1DGenerator::decode_vjp(const Latent& w, const Image& image_cotangent) const {
  const Scalar s = sigmoid(w.codes(0, 0));
  Scalar acc = 0;
  for (const auto& c : image_cotangent.ch) acc += c(0, 0);
  Latent g(1, 1);
  g.codes(0, 0) = acc * s * (1.0 - s);
  return g;
}

Image PixelValueGenerator::decode_impl(const Latent& w) const {
  Image img(1, 1);
  const Scalar v = std::min(1.0, std::max(0.0, w.codes(0, 0)));
  for (auto& c : img.ch) c(0, 0) = v;
  return img;
}

Latent PixelValueGenerator::decode_vjp(const Latent& w, const Image& image_cotangent) const {
  Scalar acc = 0;
  for (const auto& c : image_cotangent.ch) acc += c(0, 0);
  Latent g(1, 1);
  const Scalar v = w.codes(0, 0);
  g.codes(0, 0) = (v > 0.0 && v < 1.0) ? acc : 0.0;
  return g;
}

Scalar PixelMeanDetector::score_impl(const Image& x) const {
  Scalar acc = 0;
  for (const auto& c : x.ch) acc += c.mean();
  return acc / 3.0;
}

Image PixelMeanDetector::score_input_grad(const Image& x) const {
  Image g(x.height(), x.width());
  const Scalar v = 1.0 / (3.0 * x.pixels());
  for (auto& c : g.ch) c.setConstant(v);
  return g;
}

Scalar LogisticPixelDetector::score_impl(const Image& x) const {
  Scalar mean = 0;
  for (const auto& c : x.ch) mean += c.mean();
  return sigmoid(a_ * (mean / 3.0) + b_);
}

Image LogisticPixelDetector::score_input_grad(const Image& x) const {
  const Scalar s = score_impl(x);
  Image g(x.height(), x.width());
  const Scalar v = s * (1.0 - s) * a_ / (3.0 * x.pixels());
  for (auto& c : g.ch) c.setConstant(v);
  return g;
}

// ---- Corpus and world ----

const Image& item_image(CorpusItem& item) {
  if (!item.image) item.image = read_png(item.path);
  return *item.image;
}

Latent ToyWorld::sample_real_latent(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  Latent w(generator->num_styles(), generator->dim());
  for (Index i = 0; i < w.num_styles(); ++i)
    for (Index j = 0; j < w.dim(); ++j) w.codes(i, j) = 0.7 * gauss(rng);
  // Real faces carry almost no energy on the artifact atoms.
  for (const auto& [l, j] : generator->artifact_coords())
    w.codes(l, j) = 0.15 * gauss(rng);
  return w;
}

Latent ToyWorld::inject_artifact(const Latent& w, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> unif(0.85, 1.15);
  Latent out = w;
  for (const auto& [l, j] : generator->artifact_coords())
    out.codes(l, j) += 1.1 * unif(rng);
  return out;
}

CorpusItem ToyWorld::make_real(const std::string& id, std::uint64_t seed) const {
  CorpusItem item;
  item.id = id;
  item.label = Label::real;
  item.source_latent = sample_real_latent(seed);
  item.image = decode(*generator, *item.source_latent);
  item.artifact_box = generator->artifact_box();
  return item;
}

CorpusItem ToyWorld::make_fake(const std::string& id, std::uint64_t seed) const {
  CorpusItem item;
  item.id = id;
  item.label = Label::fake;
  item.source_latent = inject_artifact(sample_real_latent(seed), mix_seed(seed, "artifact"));
  item.image = decode(*generator, *item.source_latent);
  item.artifact_box = generator->artifact_box();
  return item;
}

std::vector<CorpusItem> ToyWorld::make_corpus(Index n_real, Index n_fake,
                                              const std::string& tag) const {
  std::vector<CorpusItem> items;
  items.reserve(static_cast<std::size_t>(n_real + n_fake));
  for (Index i = 0; i < n_real; ++i) {
    const std::string id = tag + "/real/" + std::to_string(i);
    items.push_back(make_real(id, mix_seed(opts.seed, id)));
  }
  for (Index i = 0; i < n_fake; ++i) {
    const std::string id = tag + "/fake/" + std::to_string(i);
    items.push_back(make_fake(id, mix_seed(opts.seed, id)));
  }
  return items;
}

ToyWorld make_toy_world(const BackendOptions& opts) {
  ToyWorld world;
  world.opts = opts;
  world.generator = std::make_shared<ToyGenerator>(mix_seed(opts.seed, "generator"),
                                                   opts.num_styles, opts.dim, opts.side);
  world.encoder = ToyEncoder::pretrained(*world.generator, mix_seed(opts.seed, "encoder"));
  world.embedder = std::make_shared<ToyEmbedder>(mix_seed(opts.seed, "embedder"), opts.side);
  world.perceptual = std::make_shared<MsGradPerceptual>();

  std::vector<Image> train_real, train_fake, held_real, held_fake;
  for (Index i = 0; i < opts.train_per_class; ++i) {
    train_real.push_back(*world.make_real("det-train", mix_seed(opts.seed, "det-train/real/" + std::to_string(i))).image);
    train_fake.push_back(*world.make_fake("det-train", mix_seed(opts.seed, "det-train/fake/" + std::to_string(i))).image);
  }
  for (Index i = 0; i < opts.heldout_per_class; ++i) {
    held_real.push_back(*world.make_real("det-held", mix_seed(opts.seed, "det-held/real/" + std::to_string(i))).image);
    held_fake.push_back(*world.make_fake("det-held", mix_seed(opts.seed, "det-held/fake/" + std::to_string(i))).image);
  }

  for (int d = 0; d < opts.num_detectors; ++d) {
    const std::string name = "toy-det" + std::to_string(d);
    auto det = std::make_shared<ToyDetector>(name, mix_seed(opts.seed, "detector/" + name),
                                             opts.side);
    // Each detector trains on its own 3/4 subsample of the shared pool.
    std::mt19937_64 rng(mix_seed(opts.seed, "subsample/" + name));
    std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
    std::vector<Image> sub_real, sub_fake;
    for (const auto& img : train_real)
      if (unif(rng) < 0.75) sub_real.push_back(img);
    for (const auto& img : train_fake)
      if (unif(rng) < 0.75) sub_fake.push_back(img);
    det->fit_head(sub_real, sub_fake);
    world.detector_accuracy.push_back(det->accuracy(held_real, held_fake));
    world.detectors.push_back(std::move(det));
  }
  return world;
}

Backend backend_from_world(const ToyWorld& world) {
  Backend b;
  b.generator = world.generator;
  b.encoder = world.encoder;
  b.detectors.assign(world.detectors.begin(), world.detectors.end());
  b.embedder = world.embedder;
  b.perceptual = world.perceptual;
  return b;
}

void register_builtin_backends() {
  static bool done = false;
  if (done) return;
  done = true;
  register_backend("toy", [](const BackendOptions& opts) {
    return backend_from_world(make_toy_world(opts));
  });
}

}  // namespace artifact::toy
