#include "artifact/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "artifact/io.hpp"

namespace artifact {

using nlohmann::json;

std::string RunConfig::to_json() const {
  json j;
  j["backend"] = backend;
  j["dataset"] = dataset;
  j["seed"] = seed;
  j["workers"] = workers;
  j["out_dir"] = out_dir.string();
  j["manifest"] = manifest ? json(manifest->string()) : json(nullptr);
  j["backend_opts"] = {{"num_styles", backend_opts.num_styles},
                       {"dim", backend_opts.dim},
                       {"side", backend_opts.side},
                       {"num_detectors", backend_opts.num_detectors},
                       {"train_per_class", backend_opts.train_per_class},
                       {"heldout_per_class", backend_opts.heldout_per_class}};
  j["finetune"] = {{"lambda_mse", finetune.lambda_mse},
                   {"lambda_lpips", finetune.lambda_lpips},
                   {"lambda_id", finetune.lambda_id},
                   {"steps", finetune.steps},
                   {"batch_size", finetune.batch_size},
                   {"learning_rate", finetune.learning_rate}};
  j["attack"] = {{"method", method},
                 {"mask", to_string(mask)},
                 {"epsilon", experiment.latent_epsilon},
                 {"queries", experiment.queries},
                 {"early_stop", experiment.early_stop},
                 {"target", to_string(experiment.target)},
                 {"pixel_epsilon", experiment.pixel.epsilon},
                 {"pixel_beta", experiment.pixel.bound_beta},
                 {"pixel_steps", experiment.pixel.max_steps},
                 {"momentum", experiment.pixel.momentum}};
  j["tool_version"] = kToolVersion;
  return j.dump(2);
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
  cfg.experiment.queries = 100;
  cfg.experiment.pixel.bound_beta = 0.1;
  cfg.finetune.lambda_mse = 1.0;
  cfg.finetune.lambda_lpips = 0.8;
  cfg.finetune.lambda_id = 0.5;
  cfg.finetune.learning_rate = 1e-4;
  cfg.finetune.batch_size = 8;
  cfg.finetune.steps = 80000;
  if (preset == "celebdf") {
    cfg.experiment.latent_epsilon = 0.0006;
    cfg.experiment.pixel.epsilon = 0.007;
  } else if (preset == "dfdc") {
    cfg.experiment.latent_epsilon = 0.001;
    cfg.experiment.pixel.epsilon = 0.011;
  } else if (preset == "ffpp") {
    cfg.experiment.latent_epsilon = 0.001;
    cfg.experiment.pixel.epsilon = 0.015;
  } else if (preset == "toy") {
    cfg.experiment.latent_epsilon = 0.02;
    cfg.experiment.queries = 100;
    cfg.experiment.pixel.epsilon = 0.07;
    cfg.experiment.pixel.bound_beta = 0.1;
    cfg.finetune.steps = 300;
    cfg.finetune.learning_rate = 1e-4;
  } else {
    throw ConfigError("unknown preset: " + preset);
  }
  cfg.dataset = preset;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + key + "' in " + where);
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }

  reject_unknown(j, {"backend", "dataset", "seed", "workers", "out_dir", "manifest",
                     "backend_opts", "finetune", "attack"},
                 "top level");
  if (j.contains("backend")) cfg.backend = j["backend"].get<std::string>();
  if (j.contains("dataset")) cfg.dataset = j["dataset"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("manifest") && !j["manifest"].is_null())
    cfg.manifest = std::filesystem::path(j["manifest"].get<std::string>());

  if (j.contains("backend_opts")) {
    const auto& b = j["backend_opts"];
    reject_unknown(b, {"num_styles", "dim", "side", "num_detectors", "train_per_class",
                       "heldout_per_class"},
                   "backend_opts");
    if (b.contains("num_styles")) cfg.backend_opts.num_styles = b["num_styles"].get<Index>();
    if (b.contains("dim")) cfg.backend_opts.dim = b["dim"].get<Index>();
    if (b.contains("side")) cfg.backend_opts.side = b["side"].get<Index>();
    if (b.contains("num_detectors"))
      cfg.backend_opts.num_detectors = b["num_detectors"].get<int>();
    if (b.contains("train_per_class"))
      cfg.backend_opts.train_per_class = b["train_per_class"].get<Index>();
    if (b.contains("heldout_per_class"))
      cfg.backend_opts.heldout_per_class = b["heldout_per_class"].get<Index>();
  }

  if (j.contains("finetune")) {
    const auto& f = j["finetune"];
    reject_unknown(f, {"lambda_mse", "lambda_lpips", "lambda_id", "steps", "batch_size",
                       "learning_rate"},
                   "finetune");
    if (f.contains("lambda_mse")) cfg.finetune.lambda_mse = f["lambda_mse"].get<Scalar>();
    if (f.contains("lambda_lpips"))
      cfg.finetune.lambda_lpips = f["lambda_lpips"].get<Scalar>();
    if (f.contains("lambda_id")) cfg.finetune.lambda_id = f["lambda_id"].get<Scalar>();
    if (f.contains("steps")) cfg.finetune.steps = f["steps"].get<int>();
    if (f.contains("batch_size")) cfg.finetune.batch_size = f["batch_size"].get<int>();
    if (f.contains("learning_rate"))
      cfg.finetune.learning_rate = f["learning_rate"].get<Scalar>();
  }

  if (j.contains("attack")) {
    const auto& a = j["attack"];
    reject_unknown(a, {"method", "mask", "epsilon", "queries", "early_stop", "target",
                       "pixel_epsilon", "pixel_beta", "pixel_steps", "momentum"},
                   "attack");
    if (a.contains("method")) cfg.method = a["method"].get<std::string>();
    if (a.contains("mask")) cfg.mask = level_from_string(a["mask"].get<std::string>());
    if (a.contains("epsilon")) cfg.experiment.latent_epsilon = a["epsilon"].get<Scalar>();
    if (a.contains("queries")) cfg.experiment.queries = a["queries"].get<int>();
    if (a.contains("early_stop")) cfg.experiment.early_stop = a["early_stop"].get<bool>();
    if (a.contains("target"))
      cfg.experiment.target = label_from_string(a["target"].get<std::string>());
    if (a.contains("pixel_epsilon"))
      cfg.experiment.pixel.epsilon = a["pixel_epsilon"].get<Scalar>();
    if (a.contains("pixel_beta"))
      cfg.experiment.pixel.bound_beta = a["pixel_beta"].get<Scalar>();
    if (a.contains("pixel_steps")) cfg.experiment.pixel.max_steps = a["pixel_steps"].get<int>();
    if (a.contains("momentum")) cfg.experiment.pixel.momentum = a["momentum"].get<Scalar>();
  }
}

void echo_resolved_config(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string body = cfg.to_json() + "\n";
  write_file(cfg.out_dir / "config.resolved", body.data(), body.size());
}

}  // namespace artifact
