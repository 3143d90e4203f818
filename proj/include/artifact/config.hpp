#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "artifact/harness.hpp"
#include "artifact/inversion.hpp"

namespace artifact {

// Resolved run configuration. Precedence: built-in defaults, then the
// dataset preset, then the config file, then command-line flags.
struct RunConfig {
  std::string backend = "toy";
  std::string dataset = "toy";
  std::uint64_t seed = 1;
  int workers = 1;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> manifest;

  BackendOptions backend_opts;
  FinetuneConfig finetune;
  ExperimentConfig experiment;

  // Attack section as independent fields, mirrored into experiment.
  std::string method = "latent";
  Level mask = Level::Full;

  std::string to_json() const;
};

// Paper-mirroring per-dataset defaults, selected by --preset.
//   celebdf: latent eps 0.0006, pixel eps 0.007
//   dfdc:    latent eps 0.001,  pixel eps 0.011
//   ffpp:    latent eps 0.001,  pixel eps 0.015
// All presets: pixel bound 0.1, query budget 100, loss weights
// mse/lpips/id = 1.0/0.8/0.5, lr 1e-4, batch 8, 80000 fine-tune steps.
void apply_preset(RunConfig& cfg, const std::string& preset);

// Strict parse: unknown keys anywhere in the file are rejected.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Writes config.resolved (the full effective config) and a version stamp
// into the output directory before any work happens.
void echo_resolved_config(const RunConfig& cfg);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace artifact
