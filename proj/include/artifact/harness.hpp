#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "artifact/attack.hpp"
#include "artifact/inversion.hpp"
#include "artifact/metrics.hpp"
#include "artifact/toy.hpp"

namespace artifact {

// Persisted per-image experiment outcome. Everything downstream (transfer
// matrices, ablation tables, delta profiles) is a pure fold over a stream
// of these.
struct RunRecord {
  std::string image_id;
  std::string dataset;
  std::string source_detector;
  std::string attack_method;  // latent | fgsm | pgd | mifgsm
  std::optional<std::string> mask_level;
  Scalar epsilon = 0;
  int queries_used = 0;
  std::string status;
  Scalar final_score = 0;
  std::map<std::string, std::string> verdicts;  // evaluator -> real|fake
  QualityReport quality;
  // Mean |delta W| over the S/M/D thirds; latent attacks only.
  std::optional<std::array<Scalar, 3>> latent_delta;
};

std::string record_to_json(const RunRecord& r);
RunRecord record_from_json(const std::string& line);

// Resume key: one record per (image, source, method, mask, epsilon).
std::string record_key(const RunRecord& r);

std::vector<RunRecord> read_records(const std::filesystem::path& path);
void append_records(const std::filesystem::path& path, const std::vector<RunRecord>& records);

// Rows = source detectors, cols = evaluation detectors, cells = ASR percent.
// Cells left without any persisted record stay absent rather than fabricated.
struct TransferMatrix {
  std::string method;
  std::vector<std::string> detectors;
  std::vector<std::vector<std::optional<Scalar>>> asr_percent;
  std::vector<std::vector<Index>> denominators;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string dataset = "toy";
  Label target = Label::real;
  // Latent attack parameters. Table experiments run the fixed query budget
  // (no early stop), matching the fixed-query protocol of the reported
  // matrices; flip early_stop for minimal-counterfactual crafting.
  Scalar latent_epsilon = 0.02;
  int queries = 100;
  Level mask_level = Level::Full;
  bool early_stop = false;
  // Pixel baseline parameters.
  PixelAttackConfig pixel;
};

struct Experiment {
  Backend backend;
  std::vector<toy::CorpusItem> corpus;
  std::filesystem::path records_path;
  ExperimentConfig cfg;
};

// Attacks one corpus item with the named method and measures it under every
// detector in the backend. `source` indexes backend.detectors. When
// adversarial_out is non-null the produced image is copied there.
RunRecord run_single(Experiment& ex, toy::CorpusItem& item, std::size_t source,
                     const std::string& method, Image* adversarial_out = nullptr);

// Crafts adversarials on each source detector with each method, evaluates
// ASR on every detector, persisting records before aggregation. Existing
// records for the same key are kept, making interrupted runs resumable.
std::vector<TransferMatrix> run_transfer_experiment(Experiment& ex,
                                                    const std::vector<std::string>& methods);

// Pure fold from a record stream to matrices (denominator: all attacked).
std::vector<TransferMatrix> matrices_from_records(const std::vector<RunRecord>& records,
                                                  const std::vector<std::string>& detectors,
                                                  const std::vector<std::string>& methods,
                                                  Label target);

// ASR per mask level from otherwise identical configs.
std::map<Level, AsrReport> run_level_ablation(Experiment& ex, std::size_t detector_index,
                                              Scalar epsilon, int queries = 100);

struct StrengthRow {
  Scalar epsilon;
  Scalar asr;
  Scalar id_similarity;   // means over successful examples
  Scalar perceptual;
  Scalar esnle;
  Index n_success;
};

std::vector<StrengthRow> run_strength_ablation(Experiment& ex, std::size_t detector_index,
                                               const std::vector<Scalar>& epsilons,
                                               int queries = 100);

// Per-dataset mean |delta W| over the S/M/D thirds, successful latent
// records only.
std::map<std::string, std::array<Scalar, 3>> latent_delta_profile(
    const std::vector<RunRecord>& records);

// S/M/D third means of |a - b| for one latent pair (k divisible by 3).
std::array<Scalar, 3> level_deltas(const Latent& before, const Latent& after);

// Dataset manifest: {"dataset": tag, "items": [{"id","path","label"}...]}.
// Paths resolve relative to the manifest location.
struct Manifest {
  std::string dataset;
  std::vector<toy::CorpusItem> items;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::string& dataset,
                   const std::vector<toy::CorpusItem>& items);

// ---- Table rendering ----

std::string render_transfer_table(const TransferMatrix& m);
std::string render_level_table(const std::map<Level, AsrReport>& table);
std::string render_strength_table(const std::vector<StrengthRow>& rows);
std::string render_quality_table(const std::vector<RunRecord>& records,
                                 const std::vector<std::string>& methods);

void write_transfer_csv(const std::filesystem::path& path, const TransferMatrix& m);
void write_level_csv(const std::filesystem::path& path,
                     const std::map<Level, AsrReport>& table);
void write_strength_csv(const std::filesystem::path& path,
                        const std::vector<StrengthRow>& rows);

}  // namespace artifact
