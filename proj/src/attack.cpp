#include "artifact/attack.hpp"

#include <cmath>

namespace artifact {

namespace {

// Elementwise projection onto the l-inf ball around `center` intersected
// with [0,1].
Image project(const Image& x, const Image& center, Scalar beta) {
  Image out = x;
  for (int c = 0; c < 3; ++c)
    out.ch[c] = out.ch[c]
                    .max(center.ch[c] - beta)
                    .min(center.ch[c] + beta)
                    .max(0.0)
                    .min(1.0);
  return out;
}

Image loss_grad(const DetectorHandle& d, const Image& x, Label y_t, Scalar* score_out) {
  const Scalar s = detector_score(d, x);
  if (score_out) *score_out = s;
  Image g = d.score_input_grad(x);
  const Scalar outer = 2.0 * (s - label_to_scalar(y_t));
  for (auto& c : g.ch) c *= outer;
  if (!all_finite(g)) throw BackendError("pixel attack: non-finite gradient");
  return g;
}

Image sign_image(const Image& g) {
  Image s = g;
  for (auto& c : s.ch)
    c = (c > 0.0).cast<Scalar>() - (c < 0.0).cast<Scalar>();
  return s;
}

}  // namespace

AttackResult latent_attack(const Latent& w0, const GeneratorHandle& g,
                           const DetectorHandle& d, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.mask.size() != g.num_styles())
    throw ShapeError("latent_attack: mask length does not match generator styles");
  if (d.input_side() != g.output_side())
    throw ShapeError("latent_attack: detector input side does not match generator output");

  AttackResult res;
  Latent w = w0;
  Image x = decode(g, w);
  Scalar s = detector_score(d, x);

  if (cfg.early_stop && verdict_from_score(s) == cfg.target) {
    res.adversarial_latent = std::move(w);
    res.adversarial_image = std::move(x);
    res.final_score = s;
    res.status = AttackStatus::success;
    return res;
  }

  for (int t = 0; t < cfg.max_queries; ++t) {
    auto [score_here, grad] = score_and_adversarial_grad(d, g, w, cfg.target);
    (void)score_here;
    if (cfg.ascend) grad.codes = -grad.codes;
    w = masked_sign_step(w, grad, cfg.mask, cfg.epsilon);
    x = decode(g, w);
    s = detector_score(d, x);
    res.score_trace.push_back(s);
    if (cfg.early_stop && verdict_from_score(s) == cfg.target) break;
  }

  res.queries_used = static_cast<int>(res.score_trace.size());
  res.final_score = s;
  res.status = verdict_from_score(s) == cfg.target ? AttackStatus::success
                                                   : AttackStatus::budget_exhausted;
  res.adversarial_latent = std::move(w);
  res.adversarial_image = std::move(x);
  return res;
}

AttackResult fgsm(const Image& x, const DetectorHandle& d, const PixelAttackConfig& cfg,
                  Label y_t) {
  cfg.validate();
  const Image g = loss_grad(d, x, y_t, nullptr);
  const Image s = sign_image(g);
  Image adv = x;
  for (int c = 0; c < 3; ++c) adv.ch[c] -= cfg.epsilon * s.ch[c];
  adv = clamp01(std::move(adv));

  AttackResult res;
  res.adversarial_image = std::move(adv);
  res.final_score = detector_score(d, res.adversarial_image);
  res.score_trace = {res.final_score};
  res.queries_used = 1;
  res.status = verdict_from_score(res.final_score) == y_t ? AttackStatus::success
                                                          : AttackStatus::budget_exhausted;
  return res;
}

namespace {

// Shared iterative loop; `use_momentum` selects the MIFGSM accumulator.
AttackResult iterative_pixel_attack(const Image& x0, const DetectorHandle& d,
                                    const PixelAttackConfig& cfg, Label y_t,
                                    bool use_momentum) {
  cfg.validate();
  AttackResult res;
  Image x = x0;
  Scalar s = detector_score(d, x);
  if (verdict_from_score(s) == y_t) {
    res.adversarial_image = std::move(x);
    res.final_score = s;
    res.status = AttackStatus::success;
    return res;
  }

  Image accum(x0.height(), x0.width());
  for (int t = 0; t < cfg.max_steps; ++t) {
    const Image grad = loss_grad(d, x, y_t, nullptr);
    Image direction;
    if (use_momentum) {
      Scalar l1 = 0;
      for (const auto& c : grad.ch) l1 += c.abs().sum();
      for (int c = 0; c < 3; ++c) {
        accum.ch[c] *= cfg.momentum;
        if (l1 > 0) accum.ch[c] += grad.ch[c] / l1;  // zero-norm gradient adds nothing
      }
      direction = sign_image(accum);
    } else {
      direction = sign_image(grad);
    }
    for (int c = 0; c < 3; ++c) x.ch[c] -= cfg.epsilon * direction.ch[c];
    x = project(x, x0, cfg.bound_beta);
    s = detector_score(d, x);
    res.score_trace.push_back(s);
    if (verdict_from_score(s) == y_t) break;
  }

  res.queries_used = static_cast<int>(res.score_trace.size());
  res.final_score = s;
  res.status = verdict_from_score(s) == y_t ? AttackStatus::success
                                            : AttackStatus::budget_exhausted;
  res.adversarial_image = std::move(x);
  return res;
}

}  // namespace

AttackResult pgd_linf(const Image& x, const DetectorHandle& d, const PixelAttackConfig& cfg,
                      Label y_t) {
  return iterative_pixel_attack(x, d, cfg, y_t, /*use_momentum=*/false);
}

AttackResult mifgsm(const Image& x, const DetectorHandle& d, const PixelAttackConfig& cfg,
                    Label y_t) {
  return iterative_pixel_attack(x, d, cfg, y_t, /*use_momentum=*/true);
}

}  // namespace artifact
