#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "artifact/image.hpp"
#include "artifact/latent.hpp"

namespace artifact {

// Decodes style stacks to images. Backends also expose the reverse-mode
// gradient contract: decode_vjp maps a cotangent on the output image to a
// cotangent on the latent.
class GeneratorHandle {
 public:
  virtual ~GeneratorHandle() = default;
  virtual Index num_styles() const = 0;
  virtual Index dim() const = 0;
  virtual Index output_side() const = 0;
  virtual bool reentrant() const = 0;
  virtual Image decode_impl(const Latent& w) const = 0;
  virtual Latent decode_vjp(const Latent& w, const Image& image_cotangent) const = 0;
  virtual std::uint64_t param_digest() const = 0;
};

class EncoderHandle {
 public:
  virtual ~EncoderHandle() = default;
  virtual Index input_side() const = 0;
  virtual Index num_styles() const = 0;
  virtual Index dim() const = 0;
  virtual Latent encode_impl(const Image& x) const = 0;
  virtual std::uint64_t param_digest() const = 0;
};

// Spatial feature maps at a named layer plus the gradient of the fake-score
// with respect to each of them. activations[c] and gradients[c] share shape.
struct LayerMaps {
  std::vector<Matrix> activations;
  std::vector<Matrix> gradients;
};

// Scores an image with the probability that it is a forgery.
class DetectorHandle {
 public:
  virtual ~DetectorHandle() = default;
  virtual std::string name() const = 0;
  virtual Index input_side() const = 0;
  virtual bool reentrant() const = 0;
  virtual bool gradcam_capable() const { return false; }
  virtual std::vector<std::string> gradcam_layers() const { return {}; }
  // Fake-probability in [0,1]; deterministic in evaluation mode.
  virtual Scalar score_impl(const Image& x) const = 0;
  // d score / d pixel, same shape as the input.
  virtual Image score_input_grad(const Image& x) const = 0;
  virtual LayerMaps layer_maps(const Image& x, const std::string& layer) const;
};

class IdentityEmbedderHandle {
 public:
  virtual ~IdentityEmbedderHandle() = default;
  virtual Index embedding_dim() const = 0;
  // Unit-L2-norm embedding.
  virtual Vector embed(const Image& x) const = 0;
  // d <cotangent, embed(x)> / d x; required only by trainable pipelines.
  virtual Image embed_vjp(const Image& x, const Vector& cotangent) const;
};

// Full-reference perceptual distance plugin (LPIPS role).
class PerceptualMetric {
 public:
  virtual ~PerceptualMetric() = default;
  virtual std::string name() const = 0;
  // Nonnegative, symmetric, zero at a == b.
  virtual Scalar distance(const Image& a, const Image& b) const = 0;
  // d distance / d b; required only by trainable pipelines.
  virtual Image distance_grad_b(const Image& a, const Image& b) const;
};

// ---- Shape-checked free operations over the handles ----

Image decode(const GeneratorHandle& g, const Latent& w);
Latent encode(const EncoderHandle& e, const Image& x);
Scalar detector_score(const DetectorHandle& d, const Image& x);

// Gradient of L_adv = (score(decode(w)) - y_t)^2 with respect to every
// latent entry, through the backend's vector-Jacobian contract.
Latent adversarial_grad(const DetectorHandle& d, const GeneratorHandle& g,
                        const Latent& w, Label y_t);

// Same gradient by central differences over decode+score only; costly
// fallback for backends without a differentiable path. Off by default.
Latent adversarial_grad_fd(const DetectorHandle& d, const GeneratorHandle& g,
                           const Latent& w, Label y_t, Scalar h = 1e-4);

// Score plus gradient in one evaluation (shared forward pass).
std::pair<Scalar, Latent> score_and_adversarial_grad(const DetectorHandle& d,
                                                     const GeneratorHandle& g,
                                                     const Latent& w, Label y_t);

Scalar identity_similarity(const IdentityEmbedderHandle& i, const Image& a, const Image& b);

LayerMaps gradcam_activations(const DetectorHandle& d, const Image& x,
                              const std::string& layer);

// ---- Backend bundle and registry ----

struct Backend {
  std::shared_ptr<GeneratorHandle> generator;
  std::shared_ptr<EncoderHandle> encoder;
  std::vector<std::shared_ptr<DetectorHandle>> detectors;
  std::shared_ptr<IdentityEmbedderHandle> embedder;
  std::shared_ptr<PerceptualMetric> perceptual;
};

struct BackendOptions {
  std::uint64_t seed = 1;
  Index num_styles = 6;
  Index dim = 16;
  Index side = 32;
  int num_detectors = 4;
  // Training corpus size per class for detector fitting.
  Index train_per_class = 400;
  Index heldout_per_class = 150;
};

using BackendFactory = std::function<Backend(const BackendOptions&)>;

std::vector<std::string> registered_backends();
void register_backend(const std::string& name, BackendFactory factory);
Backend make_backend(const std::string& name, const BackendOptions& opts);

// ---- Conformance suite ----

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::vector<ConformanceCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

// Shape, range, determinism, and finite-difference spot checks. Any backend
// passing this suite is usable by every downstream module unchanged.
ConformanceReport verify_backend(const Backend& b, std::uint64_t seed = 7);

}  // namespace artifact
