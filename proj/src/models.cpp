#include "artifact/models.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "artifact/toy.hpp"

namespace artifact {

LayerMaps DetectorHandle::layer_maps(const Image&, const std::string&) const {
  throw BackendError("detector '" + name() + "' has no grad-cam capability");
}

Image IdentityEmbedderHandle::embed_vjp(const Image&, const Vector&) const {
  throw BackendError("identity embedder does not expose gradients");
}

Image PerceptualMetric::distance_grad_b(const Image&, const Image&) const {
  throw BackendError("perceptual metric '" + name() + "' does not expose gradients");
}

namespace {

void require_image_side(const Image& x, Index side, const char* who) {
  if (x.height() != side || x.width() != side || x.height() != x.width())
    throw ShapeError(std::string(who) + ": expected " + std::to_string(side) + "x" +
                     std::to_string(side) + " image, got " + std::to_string(x.height()) +
                     "x" + std::to_string(x.width()));
}

}  // namespace

Image decode(const GeneratorHandle& g, const Latent& w) {
  if (w.num_styles() != g.num_styles() || w.dim() != g.dim())
    throw ShapeError("decode: latent shape (" + std::to_string(w.num_styles()) + "," +
                     std::to_string(w.dim()) + ") does not match generator (" +
                     std::to_string(g.num_styles()) + "," + std::to_string(g.dim()) + ")");
  return clamp01(g.decode_impl(w));
}

Latent encode(const EncoderHandle& e, const Image& x) {
  require_image_side(x, e.input_side(), "encode");
  Latent w = e.encode_impl(x);
  if (!all_finite(w)) throw BackendError("encode: backend produced non-finite latent");
  return w;
}

Scalar detector_score(const DetectorHandle& d, const Image& x) {
  require_image_side(x, d.input_side(), "detector_score");
  const Scalar s = d.score_impl(x);
  if (!(s >= 0.0 && s <= 1.0))
    throw BackendError("detector_score: '" + d.name() + "' returned " + std::to_string(s) +
                       ", outside [0,1]");
  return s;
}

std::pair<Scalar, Latent> score_and_adversarial_grad(const DetectorHandle& d,
                                                     const GeneratorHandle& g,
                                                     const Latent& w, Label y_t) {
  const Image x = decode(g, w);
  const Scalar s = detector_score(d, x);
  // L_adv = (score - y_t)^2, so dL/dx = 2*(score - y_t) * dscore/dx.
  Image gx = d.score_input_grad(x);
  const Scalar outer = 2.0 * (s - label_to_scalar(y_t));
  for (auto& c : gx.ch) c *= outer;
  Latent grad = g.decode_vjp(w, gx);
  if (!all_finite(grad))
    throw BackendError("adversarial_grad: non-finite gradient from backend");
  return {s, std::move(grad)};
}

Latent adversarial_grad(const DetectorHandle& d, const GeneratorHandle& g, const Latent& w,
                        Label y_t) {
  return score_and_adversarial_grad(d, g, w, y_t).second;
}

Latent adversarial_grad_fd(const DetectorHandle& d, const GeneratorHandle& g, const Latent& w,
                           Label y_t, Scalar h) {
  const Scalar y = label_to_scalar(y_t);
  auto loss_at = [&](const Latent& v) {
    const Scalar s = detector_score(d, decode(g, v));
    return (s - y) * (s - y);
  };
  Latent grad(w.num_styles(), w.dim());
  Latent probe = w;
  for (Index i = 0; i < w.num_styles(); ++i)
    for (Index j = 0; j < w.dim(); ++j) {
      const Scalar v0 = w.codes(i, j);
      probe.codes(i, j) = v0 + h;
      const Scalar up = loss_at(probe);
      probe.codes(i, j) = v0 - h;
      const Scalar dn = loss_at(probe);
      probe.codes(i, j) = v0;
      grad.codes(i, j) = (up - dn) / (2.0 * h);
    }
  return grad;
}

Scalar identity_similarity(const IdentityEmbedderHandle& i, const Image& a, const Image& b) {
  if (!same_shape(a, b)) throw ShapeError("identity_similarity: image shapes differ");
  // Identical inputs have cosine exactly 1; skip the roundoff of the
  // normalized dot product.
  if (bit_equal(a, b)) return 1.0;
  const Vector ea = i.embed(a), eb = i.embed(b);
  return ea.dot(eb);
}

LayerMaps gradcam_activations(const DetectorHandle& d, const Image& x,
                              const std::string& layer) {
  if (!d.gradcam_capable())
    throw BackendError("gradcam_activations: detector '" + d.name() + "' lacks the capability");
  const auto layers = d.gradcam_layers();
  bool known = false;
  for (const auto& l : layers) known |= (l == layer);
  if (!known) throw BackendError("gradcam_activations: unknown layer '" + layer + "'");
  require_image_side(x, d.input_side(), "gradcam_activations");
  LayerMaps maps = d.layer_maps(x, layer);
  if (maps.activations.size() != maps.gradients.size())
    throw BackendError("gradcam_activations: backend returned mismatched stacks");
  return maps;
}

// ---- Registry ----

namespace {

std::map<std::string, BackendFactory>& registry() {
  static std::map<std::string, BackendFactory> r;
  return r;
}

}  // namespace

void register_backend(const std::string& name, BackendFactory factory) {
  registry()[name] = std::move(factory);
}

std::vector<std::string> registered_backends() {
  toy::register_builtin_backends();
  std::vector<std::string> names;
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

Backend make_backend(const std::string& name, const BackendOptions& opts) {
  toy::register_builtin_backends();
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown backend: " + name);
  return it->second(opts);
}

// ---- Conformance ----

namespace {

Latent random_latent(const GeneratorHandle& g, std::mt19937_64& rng, Scalar scale = 0.7) {
  std::normal_distribution<Scalar> dist(0.0, scale);
  Latent w(g.num_styles(), g.dim());
  for (Index i = 0; i < w.num_styles(); ++i)
    for (Index j = 0; j < w.dim(); ++j) w.codes(i, j) = dist(rng);
  return w;
}

void check(ConformanceReport& rep, const std::string& name, bool ok, std::string detail = "") {
  rep.checks.push_back({name, ok, std::move(detail)});
}

}  // namespace

ConformanceReport verify_backend(const Backend& b, std::uint64_t seed) {
  ConformanceReport rep;
  std::mt19937_64 rng(seed);
  const auto& g = *b.generator;

  const Latent w = random_latent(g, rng);
  const Image x1 = decode(g, w);
  const Image x2 = decode(g, w);
  check(rep, "generator.shape",
        x1.height() == g.output_side() && x1.width() == g.output_side());
  bool in_range = true;
  for (const auto& c : x1.ch) in_range &= (c >= 0.0).all() && (c <= 1.0).all();
  check(rep, "generator.range", in_range);
  check(rep, "generator.determinism", bit_equal(x1, x2));

  const auto& e = *b.encoder;
  const Latent we1 = encode(e, x1);
  const Latent we2 = encode(e, x1);
  check(rep, "encoder.shape", we1.num_styles() == g.num_styles() && we1.dim() == g.dim());
  check(rep, "encoder.determinism", bit_equal(we1, we2));
  const Image zero(e.input_side(), e.input_side());
  check(rep, "encoder.finite_on_zero", all_finite(encode(e, zero)));

  for (const auto& d : b.detectors) {
    const Scalar s1 = detector_score(*d, x1);
    const Scalar s2 = detector_score(*d, x1);
    check(rep, "detector." + d->name() + ".range", s1 >= 0.0 && s1 <= 1.0);
    check(rep, "detector." + d->name() + ".determinism", s1 == s2);

    // Finite-difference spot checks of the adversarial gradient.
    const Latent grad = adversarial_grad(*d, g, w, Label::real);
    const Scalar y = label_to_scalar(Label::real);
    const Scalar h = 1e-4;
    int checked = 0, ok = 0;
    std::uniform_int_distribution<Index> pick_style(0, g.num_styles() - 1);
    std::uniform_int_distribution<Index> pick_dim(0, g.dim() - 1);
    for (int t = 0; t < 8; ++t) {
      const Index i = pick_style(rng), j = pick_dim(rng);
      Latent probe = w;
      probe.codes(i, j) += h;
      const Scalar up = std::pow(detector_score(*d, decode(g, probe)) - y, 2);
      probe.codes(i, j) -= 2 * h;
      const Scalar dn = std::pow(detector_score(*d, decode(g, probe)) - y, 2);
      const Scalar fd = (up - dn) / (2 * h);
      if (std::abs(grad.codes(i, j)) <= 1e-6) continue;
      ++checked;
      if (std::abs(fd - grad.codes(i, j)) / std::abs(grad.codes(i, j)) <= 1e-3) ++ok;
    }
    std::ostringstream detail;
    detail << ok << "/" << checked << " coordinates within 1e-3";
    check(rep, "detector." + d->name() + ".gradient_fd", checked == ok, detail.str());
  }

  const auto& id = *b.embedder;
  const Vector emb = id.embed(x1);
  check(rep, "embedder.unit_norm", std::abs(emb.norm() - 1.0) < 1e-9,
        "norm=" + std::to_string(emb.norm()));
  check(rep, "embedder.self_similarity",
        std::abs(identity_similarity(id, x1, x1) - 1.0) < 1e-9);

  if (b.perceptual) {
    check(rep, "perceptual.zero_at_equal", b.perceptual->distance(x1, x1) == 0.0);
    const Image x3 = decode(g, random_latent(g, rng));
    const Scalar dab = b.perceptual->distance(x1, x3);
    const Scalar dba = b.perceptual->distance(x3, x1);
    check(rep, "perceptual.symmetry", dab == dba && dab >= 0.0);
  }
  return rep;
}

}  // namespace artifact
