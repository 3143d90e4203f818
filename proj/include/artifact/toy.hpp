#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "artifact/models.hpp"

namespace artifact::toy {

// Axis-aligned pixel box [y0,y1) x [x0,x1).
struct Box {
  Index y0 = 0, x0 = 0, y1 = 0, x1 = 0;
  bool contains(Index y, Index x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
  Index area() const { return (y1 - y0) * (x1 - x0); }
};

// Fixed-basis generator: pre-activation is an affine map of the latent
// (bias field plus one basis atom per latent coordinate), squashed by a
// logistic so every pixel lands strictly inside (0,1).
//
// Atoms are Gaussian bumps whose spatial scale shrinks with style depth;
// coordinate 0 of each middle-third style is instead a checkerboard
// pattern confined to a fixed box, which is the forgery artifact the toy
// corpus injects and detectors learn to flag.
class ToyGenerator final : public GeneratorHandle {
 public:
  ToyGenerator(std::uint64_t seed, Index num_styles, Index dim, Index side);

  Index num_styles() const override { return num_styles_; }
  Index dim() const override { return dim_; }
  Index output_side() const override { return side_; }
  bool reentrant() const override { return true; }
  Image decode_impl(const Latent& w) const override;
  Latent decode_vjp(const Latent& w, const Image& image_cotangent) const override;
  std::uint64_t param_digest() const override;

  // Basis internals, exposed read-only so tests can evaluate the
  // closed-form expansion independently.
  const Matrix& basis() const { return basis_; }
  const Vector& bias() const { return bias_; }
  Image bias_image() const;
  Box artifact_box() const { return artifact_box_; }
  // (style, coordinate) pairs whose atoms render the artifact pattern.
  const std::vector<std::pair<Index, Index>>& artifact_coords() const {
    return artifact_coords_;
  }

  Vector preactivation(const Latent& w) const;

 private:
  Index num_styles_, dim_, side_;
  Matrix basis_;  // (3*side^2) x (num_styles*dim), column l*dim+j = atom (l,j)
  Vector bias_;   // 3*side^2
  Box artifact_box_;
  std::vector<std::pair<Index, Index>> artifact_coords_;
};

// Affine encoder over logit-space features: w = P * logit(x) + c.
// The logit linearizes the generator's squash, so on decoded images the
// optimal parameters invert the generator exactly.
class ToyEncoder final : public EncoderHandle {
 public:
  ToyEncoder(Matrix weights, Vector offset, Index side, Index num_styles, Index dim);

  Index input_side() const override { return side_; }
  Index num_styles() const override { return num_styles_; }
  Index dim() const override { return dim_; }
  Latent encode_impl(const Image& x) const override;
  std::uint64_t param_digest() const override;

  const Matrix& weights() const { return weights_; }
  const Vector& offset() const { return offset_; }

  // Logit features with pixel clamp; shared with the trainer.
  Vector features(const Image& x) const;

  // Exact algebraic inverse of the generator (least squares on the basis).
  static std::shared_ptr<ToyEncoder> ideal(const ToyGenerator& g);
  // Imperfect starting point: ideal parameters with seeded relative noise.
  static std::shared_ptr<ToyEncoder> pretrained(const ToyGenerator& g, std::uint64_t seed,
                                                Scalar noise_scale = 0.25);

 private:
  Matrix weights_;  // (num_styles*dim) x (3*side^2)
  Vector offset_;   // num_styles*dim
  Index side_, num_styles_, dim_;
};

void save_toy_encoder(const std::filesystem::path& path, const ToyEncoder& e);
std::shared_ptr<ToyEncoder> load_toy_encoder(const std::filesystem::path& path);

// Two-layer convolutional scorer: tanh conv (stride 2) twice, 2x2 average
// pooling, then a trained logistic head. Convolutions carry no bias, so a
// zero image produces zero activations everywhere.
class ToyDetector final : public DetectorHandle {
 public:
  ToyDetector(std::string name, std::uint64_t seed, Index side);

  std::string name() const override { return name_; }
  Index input_side() const override { return side_; }
  bool reentrant() const override { return true; }
  bool gradcam_capable() const override { return true; }
  std::vector<std::string> gradcam_layers() const override { return {"conv1", "conv2"}; }
  Scalar score_impl(const Image& x) const override;
  Image score_input_grad(const Image& x) const override;
  LayerMaps layer_maps(const Image& x, const std::string& layer) const override;

  // Fits the logistic head on pooled conv features; conv filters stay fixed.
  // A positive l1 weight zeroes features carrying no class signal.
  void fit_head(const std::vector<Image>& reals, const std::vector<Image>& fakes,
                int iterations = 1200, Scalar learning_rate = 0.3, Scalar l1 = 0.0);
  Scalar accuracy(const std::vector<Image>& reals, const std::vector<Image>& fakes) const;

  // Re-runs the network tail from substituted post-activation maps at the
  // named layer; lets tests finite-difference the activation gradients.
  Scalar score_from_layer(const std::string& layer, const std::vector<Matrix>& acts) const;

  std::uint64_t param_digest() const;

 private:
  struct Forward;
  Forward forward(const Image& x) const;

  std::string name_;
  Index side_;
  std::vector<std::vector<Matrix>> conv1_;  // [out][in] 5x5
  std::vector<std::vector<Matrix>> conv2_;  // [out][in] 3x3
  Vector head_w_;
  Scalar head_b_ = 0.0;
};

// Random-projection identity embedder over 4x4-pooled pixels.
class ToyEmbedder final : public IdentityEmbedderHandle {
 public:
  ToyEmbedder(std::uint64_t seed, Index side, Index embedding_dim = 64);

  Index embedding_dim() const override { return dim_; }
  Vector embed(const Image& x) const override;
  Image embed_vjp(const Image& x, const Vector& cotangent) const override;

 private:
  Index side_, dim_, pool_;
  Matrix proj_;
  Vector offset_;
};

// Desk-scale perceptual distance: L2 between gradient-magnitude fields at
// three dyadic scales. Runs with zero pretrained assets.
class MsGradPerceptual final : public PerceptualMetric {
 public:
  std::string name() const override { return "msgrad"; }
  Scalar distance(const Image& a, const Image& b) const override;
  Image distance_grad_b(const Image& a, const Image& b) const override;
};

// Degenerate one-pixel stack with D(G(w)) = sigmoid(w): the generator
// squashes the single latent into the pixel and the detector reads the
// pixel back as the score. Closed-form everything.
class Lin1DGenerator final : public GeneratorHandle {
 public:
  Index num_styles() const override { return 1; }
  Index dim() const override { return 1; }
  Index output_side() const override { return 1; }
  bool reentrant() const override { return true; }
  Image decode_impl(const Latent& w) const override;
  Latent decode_vjp(const Latent& w, const Image& image_cotangent) const override;
  std::uint64_t param_digest() const override { return 0x11d1; }
};

// Pass-through one-pixel generator: the latent value is the pixel value
// (clamped to [0,1]). With a logistic pixel detector this realizes the
// hand-differentiable composition D(G(w)) = sigmoid(a*w + b) on (0,1).
class PixelValueGenerator final : public GeneratorHandle {
 public:
  Index num_styles() const override { return 1; }
  Index dim() const override { return 1; }
  Index output_side() const override { return 1; }
  bool reentrant() const override { return true; }
  Image decode_impl(const Latent& w) const override;
  Latent decode_vjp(const Latent& w, const Image& image_cotangent) const override;
  std::uint64_t param_digest() const override { return 0x9a55; }
};

class PixelMeanDetector final : public DetectorHandle {
 public:
  explicit PixelMeanDetector(Index side = 1, std::string name = "pixel-mean")
      : name_(std::move(name)), side_(side) {}
  std::string name() const override { return name_; }
  Index input_side() const override { return side_; }
  bool reentrant() const override { return true; }
  Scalar score_impl(const Image& x) const override;
  Image score_input_grad(const Image& x) const override;

 private:
  std::string name_;
  Index side_;
};

// score = sigmoid(a * mean(x) + b); hand-differentiable logistic scorer.
class LogisticPixelDetector final : public DetectorHandle {
 public:
  LogisticPixelDetector(Scalar a, Scalar b, Index side = 1)
      : a_(a), b_(b), side_(side) {}
  std::string name() const override { return "logistic-pixel"; }
  Index input_side() const override { return side_; }
  bool reentrant() const override { return true; }
  Scalar score_impl(const Image& x) const override;
  Image score_input_grad(const Image& x) const override;

 private:
  Scalar a_, b_;
  Index side_;
};

// One labelled corpus entry. Toy items carry the latent the image was
// decoded from and the artifact box; file-backed items carry a path.
// inverted_latent, when present, seeds latent attacks instead of a fresh
// encoder pass (the `attack` command fills it from a latent store).
struct CorpusItem {
  std::string id;
  Label label = Label::fake;
  std::optional<Image> image;
  std::filesystem::path path;
  std::optional<Latent> source_latent;
  std::optional<Latent> inverted_latent;
  std::optional<Box> artifact_box;
};

const Image& item_image(CorpusItem& item);  // loads from path on demand

// Deterministic toy universe: one generator, a pretrained encoder, several
// independently seeded detectors fitted on a shared training corpus, an
// identity embedder and the desk perceptual metric.
struct ToyWorld {
  BackendOptions opts;
  std::shared_ptr<ToyGenerator> generator;
  std::shared_ptr<ToyEncoder> encoder;
  std::vector<std::shared_ptr<ToyDetector>> detectors;
  std::shared_ptr<ToyEmbedder> embedder;
  std::shared_ptr<MsGradPerceptual> perceptual;
  std::vector<Scalar> detector_accuracy;  // held-out, per detector

  Latent sample_real_latent(std::uint64_t seed) const;
  Latent inject_artifact(const Latent& w, std::uint64_t seed) const;
  CorpusItem make_real(const std::string& id, std::uint64_t seed) const;
  CorpusItem make_fake(const std::string& id, std::uint64_t seed) const;
  std::vector<CorpusItem> make_corpus(Index n_real, Index n_fake,
                                      const std::string& tag) const;
};

ToyWorld make_toy_world(const BackendOptions& opts);

Backend backend_from_world(const ToyWorld& world);

void register_builtin_backends();

}  // namespace artifact::toy
