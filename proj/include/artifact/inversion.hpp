#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "artifact/models.hpp"
#include "artifact/toy.hpp"

namespace artifact {

struct FinetuneConfig {
  Scalar lambda_mse = 1.0;
  Scalar lambda_lpips = 0.8;
  Scalar lambda_id = 0.5;
  int steps = 2000;
  int batch_size = 8;
  Scalar learning_rate = 1e-4;
  Scalar heldout_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (lambda_mse < 0 || lambda_lpips < 0 || lambda_id < 0)
      throw ConfigError("finetune: loss weights must be >= 0");
    if (steps < 0) throw ConfigError("finetune: steps must be >= 0");
    if (batch_size < 1) throw ConfigError("finetune: batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("finetune: learning_rate must be > 0");
  }
};

struct LossParts {
  Scalar total = 0, mse = 0, lpips = 0, id = 0;
};

struct LossCurvePoint {
  int step;
  LossParts loss;
};

// Composite reconstruction loss:
//   total = lambda_mse * MSE + lambda_lpips * perceptual + lambda_id * (1 - cos).
LossParts reconstruction_loss(const Image& x, const Image& xhat, const FinetuneConfig& cfg,
                              const PerceptualMetric& perceptual,
                              const IdentityEmbedderHandle& embedder);

struct FinetuneResult {
  std::shared_ptr<EncoderHandle> encoder;
  std::vector<LossCurvePoint> curve;  // one point per step, loss on the training batch
  LossParts heldout_before;
  LossParts heldout_after;
};

// Trains the encoder against the frozen generator on the corpus images.
// The generator is digest-checked before and after. Non-finite loss aborts.
// Only in-process trainable encoders (the toy encoder) are supported here;
// external backends fine-tune inside their own frameworks and are consumed
// through checkpoints.
FinetuneResult finetune_encoder(const EncoderHandle& encoder, const GeneratorHandle& generator,
                                const std::vector<Image>& corpus, const FinetuneConfig& cfg,
                                const PerceptualMetric& perceptual,
                                const IdentityEmbedderHandle& embedder);

void write_loss_curve_csv(const std::filesystem::path& path,
                          const std::vector<LossCurvePoint>& curve);

struct InversionEntry {
  std::string id;
  std::filesystem::path latent_file;
  Scalar reconstruction_mse = 0;
};

struct LatentStore {
  std::filesystem::path dir;
  std::vector<InversionEntry> entries;
  std::vector<std::string> skipped;  // ids of unreadable inputs
};

// Encodes every corpus image and persists one latent file per image plus an
// index CSV (id,file,mse). Unreadable images are skipped with a warning on
// stderr and listed in `skipped`.
LatentStore invert_corpus(const EncoderHandle& encoder, const GeneratorHandle& generator,
                          std::vector<toy::CorpusItem>& items,
                          const std::filesystem::path& out_dir);

LatentStore load_latent_store(const std::filesystem::path& dir);

}  // namespace artifact
