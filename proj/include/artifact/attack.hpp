#pragma once

#include <optional>
#include <vector>

#include "artifact/models.hpp"

namespace artifact {

// Latent search configuration. epsilon is the per-step magnitude in latent
// units. ascend flips the update to the printed plus-sign form; the default
// descends on L_adv, which is what the argmin objective asks for.
struct AttackConfig {
  Scalar epsilon = 0.0;
  int max_queries = 100;
  Label target = Label::real;
  LevelMask mask;
  bool early_stop = true;
  bool ascend = false;

  void validate() const {
    if (!(epsilon >= 0)) throw ConfigError("attack: epsilon must be >= 0");
    if (max_queries < 1) throw ConfigError("attack: max_queries must be >= 1");
  }
};

// Pixel-space baseline configuration. epsilon is the per-step pixel
// magnitude, bound_beta the l-inf budget around the source image.
struct PixelAttackConfig {
  Scalar epsilon = 0.0;
  Scalar bound_beta = 0.1;
  int max_steps = 40;
  Scalar momentum = 1.0;  // MIFGSM decay

  void validate() const {
    if (!(epsilon >= 0 && epsilon <= bound_beta))
      throw ConfigError("pixel attack: need 0 <= epsilon <= bound_beta");
    if (!(bound_beta <= 1)) throw ConfigError("pixel attack: bound_beta must be <= 1");
    if (max_steps < 1) throw ConfigError("pixel attack: max_steps must be >= 1");
    if (!(momentum >= 0)) throw ConfigError("pixel attack: momentum must be >= 0");
  }
};

enum class AttackStatus { success, budget_exhausted };

inline const char* to_string(AttackStatus s) {
  return s == AttackStatus::success ? "success" : "budget_exhausted";
}

// Uniform result shape for latent and pixel attacks. score_trace holds the
// detector score after each counted query, so its length equals queries_used.
struct AttackResult {
  std::optional<Latent> adversarial_latent;
  Image adversarial_image;
  int queries_used = 0;
  Scalar final_score = 0.0;
  AttackStatus status = AttackStatus::budget_exhausted;
  std::vector<Scalar> score_trace;
};

// One masked sign-descent update: for every masked-in style j,
// w'_j = w_j - epsilon * sign(grad_j) with sign(0) = 0; masked-out styles
// are returned bit-identical.
template <typename S>
LatentT<S> masked_sign_step(const LatentT<S>& w, const LatentT<S>& grad,
                            const LevelMask& mask, S epsilon) {
  if (!same_shape(w, grad))
    throw ShapeError("masked_sign_step: latent and gradient shapes differ");
  if (mask.size() != w.num_styles())
    throw ShapeError("masked_sign_step: mask length does not match style count");
  LatentT<S> out = w;
  const MatrixT<S> s = sign_of<S>(grad.codes);
  for (Index j = 0; j < w.num_styles(); ++j)
    if (mask[j]) out.codes.row(j) -= epsilon * s.row(j);
  return out;
}

// Iterative masked sign search in latent space (cumulative updates from the
// previous iterate). Each query computes the gradient at the current point,
// steps, and records the post-step score. Stops on verdict == target when
// early_stop is set, otherwise runs the full budget.
AttackResult latent_attack(const Latent& w0, const GeneratorHandle& g,
                           const DetectorHandle& d, const AttackConfig& cfg);

AttackResult fgsm(const Image& x, const DetectorHandle& d,
                  const PixelAttackConfig& cfg, Label y_t);
AttackResult pgd_linf(const Image& x, const DetectorHandle& d,
                      const PixelAttackConfig& cfg, Label y_t);
AttackResult mifgsm(const Image& x, const DetectorHandle& d,
                    const PixelAttackConfig& cfg, Label y_t);

}  // namespace artifact
