#pragma once

#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "artifact/attack.hpp"
#include "artifact/models.hpp"

namespace artifact {

inline constexpr Scalar kIdRetentionThreshold = 0.75;

// Scalar quality metrics for one adversarial example.
struct QualityReport {
  Scalar tv = 0;
  Scalar esnle = 0;
  Scalar perceptual = 0;
  Scalar id_similarity = 0;
  bool id_retained = false;
};

QualityReport make_quality_report(const Image& original, const Image& adversarial,
                                  const PerceptualMetric& perceptual,
                                  const IdentityEmbedderHandle& embedder);

// Attack success rate of a record set under an evaluation detector, with
// both denominators: every attacked image, and only those whose attack
// already succeeded on the source detector.
struct AsrReport {
  Scalar over_all = 0;
  std::optional<Scalar> over_source_success;
  Index n_all = 0;
  Index n_source_success = 0;
};

AsrReport attack_success_rate(const std::vector<AttackResult>& records,
                              const DetectorHandle& d_eval, Label target);

// Anisotropic total variation: per-channel sum of absolute forward
// differences along both axes, divided by the pixel count, times the
// documented constant c_tv (default 1e4 on [0,1] images; only orderings are
// comparable across normalizations).
template <typename S>
S total_variation(const ImageT<S>& x, S c_tv = S(1e4)) {
  S acc = 0;
  const Index h = x.height(), w = x.width();
  for (int c = 0; c < 3; ++c) {
    const auto& m = x.ch[c];
    if (w > 1) acc += (m.rightCols(w - 1) - m.leftCols(w - 1)).abs().sum();
    if (h > 1) acc += (m.bottomRows(h - 1) - m.topRows(h - 1)).abs().sum();
  }
  return c_tv * acc / static_cast<S>(h * w);
}

// Patch-PCA noise level estimate: the smallest eigenvalue of the covariance
// of d x d patches, restricted to weak-texture patches by iterative
// variance thresholding. Per-channel estimates are averaged. Returns the
// estimated noise standard deviation in image units.
template <typename S>
S esnle(const ImageT<S>& x, Index patch = 7, int iterations = 3) {
  const Index h = x.height(), w = x.width();
  if (h < patch || w < patch)
    throw ShapeError("esnle: image smaller than patch size");
  const Index ph = h - patch + 1, pw = w - patch + 1;
  const Index n = ph * pw, p = patch * patch;

  S total = 0;
  for (int c = 0; c < 3; ++c) {
    MatrixT<S> patches(p, n);
    VectorT<S> patch_var(n);
    Index k = 0;
    for (Index y = 0; y < ph; ++y)
      for (Index xx = 0; xx < pw; ++xx, ++k) {
        Index r = 0;
        for (Index dy = 0; dy < patch; ++dy)
          for (Index dx = 0; dx < patch; ++dx, ++r)
            patches(r, k) = x.ch[c](y + dy, xx + dx);
        const S mean = patches.col(k).mean();
        patch_var[k] = (patches.col(k).array() - mean).square().sum() / S(p);
      }

    auto min_eig = [&](const std::vector<Index>& idx) {
      VectorT<S> mu = VectorT<S>::Zero(p);
      for (Index i : idx) mu += patches.col(i);
      mu /= S(idx.size());
      MatrixT<S> cov = MatrixT<S>::Zero(p, p);
      for (Index i : idx) {
        const VectorT<S> d = patches.col(i) - mu;
        cov.noalias() += d * d.transpose();
      }
      cov /= S(idx.size());
      Eigen::SelfAdjointEigenSolver<MatrixT<S>> es(cov, Eigen::EigenvaluesOnly);
      return std::max(S(0), es.eigenvalues()[0]);
    };

    std::vector<Index> all(n);
    for (Index i = 0; i < n; ++i) all[i] = i;
    S var_est = min_eig(all);

    // Keep noise-dominated patches: variance within a factor of the current
    // estimate. Falls back to the lowest-variance patches when the
    // threshold starves the subset.
    const Index min_subset = std::min<Index>(n, std::max<Index>(4 * p, n / 20));
    std::vector<Index> order = all;
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return patch_var[a] < patch_var[b]; });
    for (int it = 0; it < iterations; ++it) {
      const S threshold = S(3) * var_est;
      std::vector<Index> subset;
      for (Index i = 0; i < n; ++i)
        if (patch_var[i] <= threshold) subset.push_back(i);
      if (static_cast<Index>(subset.size()) < min_subset)
        subset.assign(order.begin(), order.begin() + min_subset);
      var_est = min_eig(subset);
    }
    total += std::sqrt(var_est);
  }
  return total / S(3);
}

// Fraction of (original, adversarial) pairs whose identity similarity
// clears the retention threshold.
Scalar id_retention(const std::vector<const Image*>& originals,
                    const std::vector<const Image*>& adversarials,
                    const IdentityEmbedderHandle& embedder);

// Video-level verdict: mean of frame scores thresholded at 0.5.
Label video_verdict(const std::vector<Scalar>& frame_scores);

}  // namespace artifact
