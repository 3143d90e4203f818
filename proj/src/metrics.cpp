#include "artifact/metrics.hpp"

namespace artifact {

QualityReport make_quality_report(const Image& original, const Image& adversarial,
                                  const PerceptualMetric& perceptual,
                                  const IdentityEmbedderHandle& embedder) {
  if (!same_shape(original, adversarial))
    throw ShapeError("make_quality_report: image shapes differ");
  QualityReport q;
  q.tv = total_variation(adversarial);
  q.esnle = esnle(adversarial);
  q.perceptual = perceptual.distance(original, adversarial);
  q.id_similarity = identity_similarity(embedder, original, adversarial);
  q.id_retained = q.id_similarity >= kIdRetentionThreshold;
  return q;
}

AsrReport attack_success_rate(const std::vector<AttackResult>& records,
                              const DetectorHandle& d_eval, Label target) {
  if (records.empty()) throw CorpusError("attack_success_rate: empty record set");
  AsrReport rep;
  Index hits_all = 0, hits_src = 0;
  for (const auto& r : records) {
    const bool hit = verdict_from_score(detector_score(d_eval, r.adversarial_image)) == target;
    ++rep.n_all;
    hits_all += hit;
    if (r.status == AttackStatus::success) {
      ++rep.n_source_success;
      hits_src += hit;
    }
  }
  rep.over_all = Scalar(hits_all) / Scalar(rep.n_all);
  if (rep.n_source_success > 0)
    rep.over_source_success = Scalar(hits_src) / Scalar(rep.n_source_success);
  return rep;
}

Scalar id_retention(const std::vector<const Image*>& originals,
                    const std::vector<const Image*>& adversarials,
                    const IdentityEmbedderHandle& embedder) {
  if (originals.empty() || originals.size() != adversarials.size())
    throw CorpusError("id_retention: empty or mismatched record set");
  Index retained = 0;
  for (std::size_t i = 0; i < originals.size(); ++i)
    if (identity_similarity(embedder, *originals[i], *adversarials[i]) >=
        kIdRetentionThreshold)
      ++retained;
  return Scalar(retained) / Scalar(originals.size());
}

Label video_verdict(const std::vector<Scalar>& frame_scores) {
  if (frame_scores.empty()) throw CorpusError("video_verdict: no frame scores");
  Scalar mean = 0;
  for (Scalar s : frame_scores) mean += s;
  return verdict_from_score(mean / Scalar(frame_scores.size()));
}

}  // namespace artifact
