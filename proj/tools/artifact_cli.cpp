#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "artifact/config.hpp"
#include "artifact/harness.hpp"
#include "artifact/io.hpp"
#include "artifact/viz.hpp"

namespace fs = std::filesystem;
using namespace artifact;

namespace {

struct CommonFlags {
  std::string config_file;
  std::string preset;
};

void add_common(CLI::App* cmd, RunConfig& cfg, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON config file");
  cmd->add_option("--preset", flags.preset, "dataset preset: celebdf|dfdc|ffpp|toy");
  cmd->add_option("--backend", cfg.backend, "model backend name");
  cmd->add_option("--seed", cfg.seed, "experiment seed");
  cmd->add_option("--workers", cfg.workers, "worker thread count");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--side", cfg.backend_opts.side, "toy image side");
  cmd->add_option("--num-styles", cfg.backend_opts.num_styles, "toy style count");
  cmd->add_option("--style-dim", cfg.backend_opts.dim, "toy per-style width");
  cmd->add_option("--num-detectors", cfg.backend_opts.num_detectors, "toy detector count");
}

// Precedence: defaults < preset < config file < explicit flags. The flag
// values are already in cfg after CLI11 parses, so re-applying preset and
// file must not clobber flags the user actually passed; we reparse into a
// fresh config in layered order instead.
RunConfig resolve_config(CLI::App* cmd, const RunConfig& parsed, const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.preset.empty()) apply_preset(cfg, flags.preset);
  if (!flags.config_file.empty()) apply_config_file(cfg, flags.config_file);

  auto passed = [&](const std::string& name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  if (passed("--backend")) cfg.backend = parsed.backend;
  if (passed("--seed")) cfg.seed = parsed.seed;
  if (passed("--workers")) cfg.workers = parsed.workers;
  if (passed("--out")) cfg.out_dir = parsed.out_dir;
  if (passed("--side")) cfg.backend_opts.side = parsed.backend_opts.side;
  if (passed("--num-styles")) cfg.backend_opts.num_styles = parsed.backend_opts.num_styles;
  if (passed("--style-dim")) cfg.backend_opts.dim = parsed.backend_opts.dim;
  if (passed("--num-detectors"))
    cfg.backend_opts.num_detectors = parsed.backend_opts.num_detectors;
  cfg.backend_opts.seed = cfg.seed;
  cfg.experiment.seed = cfg.seed;
  cfg.experiment.dataset = cfg.dataset;
  return cfg;
}

std::string safe_name(std::string id) {
  for (auto& c : id)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return id;
}

std::vector<toy::CorpusItem> corpus_for(const RunConfig& cfg, const toy::ToyWorld* world,
                                        Index n_real, Index n_fake) {
  if (cfg.manifest) {
    Manifest m = load_manifest(*cfg.manifest);
    return std::move(m.items);
  }
  if (!world) throw ConfigError("no manifest given and backend is not the toy world");
  return world->make_corpus(n_real, n_fake, "corpus");
}

int cmd_models_verify(const RunConfig& cfg) {
  echo_resolved_config(cfg);
  BackendOptions opts = cfg.backend_opts;
  opts.seed = cfg.seed;
  const Backend backend = make_backend(cfg.backend, opts);
  const ConformanceReport report = verify_backend(backend, cfg.seed);
  for (const auto& c : report.checks)
    std::cout << (c.passed ? "  ok  " : " FAIL ") << c.name
              << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
  if (!report.all_passed()) {
    std::cerr << "error: backend: conformance suite failed for '" << cfg.backend << "'\n";
    return 3;
  }
  std::cout << "backend '" << cfg.backend << "' passed " << report.checks.size()
            << " checks\n";
  return 0;
}

int cmd_finetune(const RunConfig& cfg, Index n_real, Index n_fake) {
  echo_resolved_config(cfg);
  const toy::ToyWorld world = toy::make_toy_world(cfg.backend_opts);
  std::vector<toy::CorpusItem> items = corpus_for(cfg, &world, n_real, n_fake);
  if (items.empty()) throw CorpusError("finetune: empty corpus");
  std::vector<Image> images;
  for (auto& item : items) images.push_back(toy::item_image(item));

  const FinetuneResult result = finetune_encoder(
      *world.encoder, *world.generator, images, cfg.finetune, *world.perceptual,
      *world.embedder);

  write_loss_curve_csv(cfg.out_dir / "loss_curve.csv", result.curve);
  const auto* enc = dynamic_cast<const toy::ToyEncoder*>(result.encoder.get());
  toy::save_toy_encoder(cfg.out_dir / "encoder.ckpt", *enc);

  std::ostringstream meta;
  meta << "steps=" << cfg.finetune.steps << "\n"
       << "batch_size=" << cfg.finetune.batch_size << "\n"
       << "learning_rate=" << cfg.finetune.learning_rate << "\n"
       << "lambda_mse=" << cfg.finetune.lambda_mse << "\n"
       << "lambda_lpips=" << cfg.finetune.lambda_lpips << "\n"
       << "lambda_id=" << cfg.finetune.lambda_id << "\n"
       << "heldout_total_before=" << result.heldout_before.total << "\n"
       << "heldout_total_after=" << result.heldout_after.total << "\n";
  const std::string m = meta.str();
  write_file(cfg.out_dir / "finetune.meta", m.data(), m.size());

  std::cout << "finetune: held-out total " << result.heldout_before.total << " -> "
            << result.heldout_after.total << " over " << cfg.finetune.steps << " steps\n";
  return 0;
}

int cmd_invert(const RunConfig& cfg, const std::string& checkpoint, Index n_real,
               Index n_fake) {
  echo_resolved_config(cfg);
  const toy::ToyWorld world = toy::make_toy_world(cfg.backend_opts);
  std::shared_ptr<EncoderHandle> encoder = world.encoder;
  if (!checkpoint.empty()) encoder = toy::load_toy_encoder(checkpoint);
  std::vector<toy::CorpusItem> items = corpus_for(cfg, &world, n_real, n_fake);
  const LatentStore store =
      invert_corpus(*encoder, *world.generator, items, cfg.out_dir / "latents");
  std::cout << "inverted " << store.entries.size() << " images ("
            << store.skipped.size() << " skipped) into " << store.dir.string() << "\n";
  return 0;
}

Experiment make_experiment(const RunConfig& cfg, const toy::ToyWorld& world,
                           std::vector<toy::CorpusItem> corpus) {
  Experiment ex;
  ex.backend = toy::backend_from_world(world);
  ex.corpus = std::move(corpus);
  ex.records_path = cfg.out_dir / "records.jsonl";
  ex.cfg = cfg.experiment;
  ex.cfg.dataset = cfg.dataset;
  ex.cfg.mask_level = cfg.mask;
  ex.cfg.workers = cfg.workers;
  ex.cfg.seed = cfg.seed;
  return ex;
}

int cmd_attack(const RunConfig& cfg, const std::string& latents_dir, Index n_fake,
               std::size_t detector) {
  echo_resolved_config(cfg);
  const toy::ToyWorld world = toy::make_toy_world(cfg.backend_opts);
  std::vector<toy::CorpusItem> corpus = corpus_for(cfg, &world, 0, n_fake);
  if (!latents_dir.empty()) {
    const LatentStore store = load_latent_store(latents_dir);
    for (auto& item : corpus)
      for (const auto& e : store.entries)
        if (e.id == item.id) item.inverted_latent = load_latent(e.latent_file);
  }
  Experiment ex = make_experiment(cfg, world, std::move(corpus));
  if (detector >= ex.backend.detectors.size())
    throw ConfigError("detector index out of range");

  std::vector<RunRecord> existing = read_records(ex.records_path);
  std::set<std::string> have;
  for (const auto& r : existing) have.insert(record_key(r));

  std::vector<RunRecord> fresh;
  fs::create_directories(cfg.out_dir / "images");
  for (auto& item : ex.corpus) {
    if (item.label != Label::fake) continue;
    RunRecord probe;
    probe.image_id = item.id;
    probe.source_detector = ex.backend.detectors[detector]->name();
    probe.attack_method = cfg.method;
    if (cfg.method == "latent") {
      probe.mask_level = to_string(ex.cfg.mask_level);
      probe.epsilon = ex.cfg.latent_epsilon;
    } else {
      probe.epsilon = ex.cfg.pixel.epsilon;
    }
    if (have.count(record_key(probe))) continue;
    Image adversarial;
    RunRecord rec = run_single(ex, item, detector, cfg.method, &adversarial);
    write_png(cfg.out_dir / "images" / (safe_name(item.id) + "_" + cfg.method + ".png"),
              adversarial);
    fresh.push_back(std::move(rec));
  }
  append_records(ex.records_path, fresh);
  std::cout << "attacked " << fresh.size() << " images with method '" << cfg.method
            << "'; records at " << ex.records_path.string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& records_file) {
  echo_resolved_config(cfg);
  const fs::path path = records_file.empty() ? cfg.out_dir / "records.jsonl"
                                             : fs::path(records_file);
  const std::vector<RunRecord> records = read_records(path);
  if (records.empty()) throw CorpusError("evaluate: no records at " + path.string());
  std::set<std::string> methods_seen;
  for (const auto& r : records) methods_seen.insert(r.attack_method);
  const std::vector<std::string> methods(methods_seen.begin(), methods_seen.end());
  const std::string table = render_quality_table(records, methods);
  std::cout << table;
  fs::create_directories(cfg.out_dir / "tables");
  write_file(cfg.out_dir / "tables" / "quality.txt", table.data(), table.size());
  try {
    const auto profile = latent_delta_profile(records);
    std::ostringstream out;
    out << "dataset,S,M,D\n";
    for (const auto& [tag, deltas] : profile)
      out << tag << "," << deltas[0] << "," << deltas[1] << "," << deltas[2] << "\n";
    const std::string s = out.str();
    write_file(cfg.out_dir / "tables" / "latent_delta.csv", s.data(), s.size());
  } catch (const CorpusError&) {
    // No successful latent records; profile intentionally absent.
  }
  return 0;
}

int cmd_matrix(const RunConfig& cfg, const std::vector<std::string>& methods, Index n_fake) {
  echo_resolved_config(cfg);
  const toy::ToyWorld world = toy::make_toy_world(cfg.backend_opts);
  Experiment ex = make_experiment(cfg, world, corpus_for(cfg, &world, 0, n_fake));
  const auto matrices = run_transfer_experiment(ex, methods);
  fs::create_directories(cfg.out_dir / "tables");
  for (const auto& m : matrices) {
    std::cout << render_transfer_table(m) << "\n";
    write_transfer_csv(cfg.out_dir / "tables" / ("matrix_" + m.method + ".csv"), m);
  }
  return 0;
}

int cmd_ablate_levels(const RunConfig& cfg, Scalar epsilon, int queries, Index n_fake,
                      std::size_t detector) {
  echo_resolved_config(cfg);
  const toy::ToyWorld world = toy::make_toy_world(cfg.backend_opts);
  Experiment ex = make_experiment(cfg, world, corpus_for(cfg, &world, 0, n_fake));
  if (detector >= ex.backend.detectors.size())
    throw ConfigError("detector index out of range");
  const auto table = run_level_ablation(ex, detector, epsilon, queries);
  std::cout << render_level_table(table);
  fs::create_directories(cfg.out_dir / "tables");
  write_level_csv(cfg.out_dir / "tables" / "levels.csv", table);
  return 0;
}

int cmd_ablate_epsilon(const RunConfig& cfg, const std::vector<Scalar>& epsilons, int queries,
                       Index n_fake, std::size_t detector) {
  echo_resolved_config(cfg);
  const toy::ToyWorld world = toy::make_toy_world(cfg.backend_opts);
  Experiment ex = make_experiment(cfg, world, corpus_for(cfg, &world, 0, n_fake));
  if (detector >= ex.backend.detectors.size())
    throw ConfigError("detector index out of range");
  const auto rows = run_strength_ablation(ex, detector, epsilons, queries);
  std::cout << render_strength_table(rows);
  fs::create_directories(cfg.out_dir / "tables");
  write_strength_csv(cfg.out_dir / "tables" / "strength.csv", rows);
  return 0;
}

int cmd_visualize(const RunConfig& cfg, Index n_fake, int max_items) {
  echo_resolved_config(cfg);
  const toy::ToyWorld world = toy::make_toy_world(cfg.backend_opts);
  std::vector<toy::CorpusItem> corpus = corpus_for(cfg, &world, 0, n_fake);
  Experiment ex = make_experiment(cfg, world, std::move(corpus));
  fs::create_directories(cfg.out_dir / "images");

  int done = 0;
  std::vector<viz::GridRow> rows;
  const std::vector<std::string> methods = {"latent", "fgsm"};
  for (auto& item : ex.corpus) {
    if (item.label != Label::fake || done >= max_items) continue;
    const Image& original = toy::item_image(item);
    viz::GridRow row;
    row.original = original;
    const auto& det = *ex.backend.detectors[0];

    viz::save_heatmap(cfg.out_dir / "images" / (safe_name(item.id) + "_gradcam_pre.png"),
                      viz::gradcam_map(det, original, "conv2"));

    for (const auto& method : methods) {
      Image adversarial;
      run_single(ex, item, 0, method, &adversarial);
      write_png(cfg.out_dir / "images" / (safe_name(item.id) + "_" + method + ".png"),
                adversarial);
      if (method == "latent") {
        viz::save_heatmap(cfg.out_dir / "images" / (safe_name(item.id) + "_residual.png"),
                          viz::residual_map(original, adversarial));
        viz::save_heatmap(cfg.out_dir / "images" / (safe_name(item.id) + "_gradcam_post.png"),
                          viz::gradcam_map(det, adversarial, "conv2"));
      }
      row.per_method.push_back(std::move(adversarial));
    }
    rows.push_back(std::move(row));
    ++done;
  }
  if (rows.empty()) throw CorpusError("visualize: no fake items to render");
  write_png(cfg.out_dir / "images" / "comparison_grid.png",
            viz::comparison_grid(rows, {"LATENT", "FGSM"}));
  std::cout << "visualized " << done << " items into "
            << (cfg.out_dir / "images").string() << "\n";
  return 0;
}

int cmd_demo(RunConfig cfg) {
  // Full toy pipeline in one command: corpus, fine-tune, inversion, attacks,
  // metrics, tables, visualizations. Everything is derived from --seed.
  apply_preset(cfg, "toy");
  cfg.dataset = "toy";
  cfg.experiment.dataset = "toy";
  echo_resolved_config(cfg);

  BackendOptions opts = cfg.backend_opts;
  opts.seed = cfg.seed;
  opts.train_per_class = 250;
  opts.heldout_per_class = 80;
  const toy::ToyWorld world = toy::make_toy_world(opts);
  std::cout << "demo: detector held-out accuracy:";
  for (Scalar a : world.detector_accuracy) std::cout << " " << a;
  std::cout << "\n";

  // Corpus: written as PNGs with a manifest, so every later stage could be
  // replayed from files.
  std::vector<toy::CorpusItem> corpus = world.make_corpus(8, 12, "demo");
  fs::create_directories(cfg.out_dir / "corpus");
  for (auto& item : corpus) {
    item.path = cfg.out_dir / "corpus" / (safe_name(item.id) + ".png");
    write_png(item.path, *item.image);
  }
  save_manifest(cfg.out_dir / "manifest.json", "toy", corpus);

  // Encoder fine-tuning on both classes.
  std::vector<toy::CorpusItem> ft_items = world.make_corpus(40, 40, "finetune");
  std::vector<Image> ft_images;
  for (auto& item : ft_items) ft_images.push_back(*item.image);
  FinetuneConfig ft = cfg.finetune;
  ft.seed = mix_seed(cfg.seed, "finetune");
  const FinetuneResult tuned = finetune_encoder(*world.encoder, *world.generator, ft_images,
                                                ft, *world.perceptual, *world.embedder);
  write_loss_curve_csv(cfg.out_dir / "loss_curve.csv", tuned.curve);
  std::cout << "demo: fine-tune held-out loss " << tuned.heldout_before.total << " -> "
            << tuned.heldout_after.total << "\n";

  toy::ToyWorld tuned_world = world;
  tuned_world.encoder = std::dynamic_pointer_cast<toy::ToyEncoder>(tuned.encoder);

  // Inversion of the demo fakes.
  const LatentStore store = invert_corpus(*tuned_world.encoder, *world.generator, corpus,
                                          cfg.out_dir / "latents");
  std::cout << "demo: inverted " << store.entries.size() << " images\n";

  // Transfer experiment over all detectors, latent vs pixel baselines.
  Experiment ex = make_experiment(cfg, tuned_world, corpus);
  const auto matrices = run_transfer_experiment(ex, {"latent", "fgsm", "pgd", "mifgsm"});
  fs::create_directories(cfg.out_dir / "tables");
  std::ostringstream report;
  for (const auto& m : matrices) {
    report << render_transfer_table(m) << "\n";
    write_transfer_csv(cfg.out_dir / "tables" / ("matrix_" + m.method + ".csv"), m);
  }

  // Ablations on detector 0.
  const auto levels = run_level_ablation(ex, 0, cfg.experiment.latent_epsilon,
                                         cfg.experiment.queries);
  write_level_csv(cfg.out_dir / "tables" / "levels.csv", levels);
  report << render_level_table(levels) << "\n";

  const std::vector<Scalar> eps_list = {0.5 * cfg.experiment.latent_epsilon,
                                        cfg.experiment.latent_epsilon,
                                        2.0 * cfg.experiment.latent_epsilon};
  const auto strength = run_strength_ablation(ex, 0, eps_list, cfg.experiment.queries);
  write_strength_csv(cfg.out_dir / "tables" / "strength.csv", strength);
  report << render_strength_table(strength) << "\n";

  // Quality table and latent-delta profile from the persisted records.
  const auto records = read_records(ex.records_path);
  report << render_quality_table(records, {"latent", "fgsm", "pgd", "mifgsm"}) << "\n";
  const auto profile = latent_delta_profile(records);
  report << "latent delta profile (mean |dW|)\n";
  for (const auto& [tag, deltas] : profile)
    report << "  " << tag << "  S=" << deltas[0] << "  M=" << deltas[1]
           << "  D=" << deltas[2] << "\n";

  // Counterfactual trace visualization for the first fakes.
  fs::create_directories(cfg.out_dir / "images");
  std::vector<viz::GridRow> rows;
  int shown = 0;
  for (auto& item : ex.corpus) {
    if (item.label != Label::fake || shown >= 4) continue;
    const Image original = *item.image;
    const auto& det = *ex.backend.detectors[0];
    Image latent_adv, fgsm_adv;
    run_single(ex, item, 0, "latent", &latent_adv);
    run_single(ex, item, 0, "fgsm", &fgsm_adv);

    const std::string base = safe_name(item.id);
    write_png(cfg.out_dir / "images" / (base + "_latent.png"), latent_adv);
    write_png(cfg.out_dir / "images" / (base + "_fgsm.png"), fgsm_adv);
    viz::save_heatmap(cfg.out_dir / "images" / (base + "_residual.png"),
                      viz::residual_map(original, latent_adv));
    viz::save_heatmap(cfg.out_dir / "images" / (base + "_gradcam_pre.png"),
                      viz::gradcam_map(det, original, "conv2"));
    viz::save_heatmap(cfg.out_dir / "images" / (base + "_gradcam_post.png"),
                      viz::gradcam_map(det, latent_adv, "conv2"));
    rows.push_back({original, {std::move(latent_adv), std::move(fgsm_adv)}});
    ++shown;
  }
  write_png(cfg.out_dir / "images" / "comparison_grid.png",
            viz::comparison_grid(rows, {"LATENT", "FGSM"}));

  const std::string text = report.str();
  write_file(cfg.out_dir / "report.txt", text.data(), text.size());
  std::cout << text;
  std::cout << "demo: artifacts in " << cfg.out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent-space artifact removal and detector evasion toolkit"};
  app.require_subcommand(1);

  RunConfig parsed;
  CommonFlags flags;

  auto* demo = app.add_subcommand("demo", "run the full toy pipeline end to end");
  add_common(demo, parsed, flags);

  auto* verify = app.add_subcommand("models-verify", "run the backend conformance suite");
  add_common(verify, parsed, flags);

  Index n_real = 8, n_fake = 16;
  auto* finetune = app.add_subcommand("finetune", "fine-tune the encoder on a corpus");
  add_common(finetune, parsed, flags);
  finetune->add_option("--n-real", n_real, "toy corpus reals");
  finetune->add_option("--n-fake", n_fake, "toy corpus fakes");
  finetune->add_option("--steps", parsed.finetune.steps, "optimizer steps");
  finetune->add_option("--batch", parsed.finetune.batch_size, "batch size");
  finetune->add_option("--lr", parsed.finetune.learning_rate, "learning rate");
  finetune->add_option("--manifest", parsed.manifest, "dataset manifest");

  std::string checkpoint;
  auto* invert = app.add_subcommand("invert", "invert a corpus into a latent store");
  add_common(invert, parsed, flags);
  invert->add_option("--n-real", n_real, "toy corpus reals");
  invert->add_option("--n-fake", n_fake, "toy corpus fakes");
  invert->add_option("--encoder-checkpoint", checkpoint, "fine-tuned encoder checkpoint");
  invert->add_option("--manifest", parsed.manifest, "dataset manifest");

  std::string latents_dir;
  std::size_t detector = 0;
  auto* attack = app.add_subcommand("attack", "craft adversarial examples");
  add_common(attack, parsed, flags);
  attack->add_option("--method", parsed.method, "latent|fgsm|pgd|mifgsm");
  std::string mask_name = "Full";
  attack->add_option("--mask", mask_name, "S|M|D|Full");
  attack->add_option("--epsilon", parsed.experiment.latent_epsilon, "latent step size");
  attack->add_option("--queries", parsed.experiment.queries, "query budget");
  std::string target_name = "real";
  attack->add_option("--target", target_name, "target label: real|fake");
  attack->add_option("--latents", latents_dir, "latent store directory");
  attack->add_option("--detector", detector, "source detector index");
  attack->add_option("--n-fake", n_fake, "toy corpus fakes");
  attack->add_option("--manifest", parsed.manifest, "dataset manifest");
  attack->add_option("--pixel-epsilon", parsed.experiment.pixel.epsilon, "pixel step size");

  std::string records_file;
  auto* evaluate = app.add_subcommand("evaluate", "aggregate records into quality tables");
  add_common(evaluate, parsed, flags);
  evaluate->add_option("--records", records_file, "records.jsonl path");

  std::vector<std::string> methods = {"latent", "fgsm"};
  auto* matrix = app.add_subcommand("matrix", "transferability matrix experiment");
  add_common(matrix, parsed, flags);
  matrix->add_option("--methods", methods, "attack methods");
  matrix->add_option("--n-fake", n_fake, "toy corpus fakes");
  matrix->add_option("--manifest", parsed.manifest, "dataset manifest");

  Scalar ab_epsilon = 0.02;
  int ab_queries = 100;
  auto* ablate_levels = app.add_subcommand("ablate-levels", "ASR per S/M/D/Full mask");
  add_common(ablate_levels, parsed, flags);
  ablate_levels->add_option("--epsilon", ab_epsilon, "latent step size");
  ablate_levels->add_option("--queries", ab_queries, "query budget");
  ablate_levels->add_option("--n-fake", n_fake, "toy corpus fakes");
  ablate_levels->add_option("--detector", detector, "detector index");
  ablate_levels->add_option("--manifest", parsed.manifest, "dataset manifest");

  std::vector<Scalar> epsilons = {0.01, 0.02, 0.04};
  auto* ablate_eps = app.add_subcommand("ablate-epsilon", "strength/quality trade-off sweep");
  add_common(ablate_eps, parsed, flags);
  ablate_eps->add_option("--epsilons", epsilons, "latent step sizes");
  ablate_eps->add_option("--queries", ab_queries, "query budget");
  ablate_eps->add_option("--n-fake", n_fake, "toy corpus fakes");
  ablate_eps->add_option("--detector", detector, "detector index");
  ablate_eps->add_option("--manifest", parsed.manifest, "dataset manifest");

  int max_items = 4;
  auto* visualize = app.add_subcommand("visualize", "residual, grad-cam and grid renders");
  add_common(visualize, parsed, flags);
  visualize->add_option("--max-items", max_items, "items to render");
  visualize->add_option("--n-fake", n_fake, "toy corpus fakes");
  visualize->add_option("--manifest", parsed.manifest, "dataset manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: config: " << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 2;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    RunConfig cfg = resolve_config(active, parsed, flags);

    if (active == demo) return cmd_demo(cfg);
    if (active == verify) return cmd_models_verify(cfg);
    if (active == finetune) {
      if (active->get_option("--steps")->count()) cfg.finetune.steps = parsed.finetune.steps;
      if (active->get_option("--batch")->count())
        cfg.finetune.batch_size = parsed.finetune.batch_size;
      if (active->get_option("--lr")->count())
        cfg.finetune.learning_rate = parsed.finetune.learning_rate;
      if (active->get_option("--manifest")->count()) cfg.manifest = parsed.manifest;
      return cmd_finetune(cfg, n_real, n_fake);
    }
    if (active == invert) {
      if (active->get_option("--manifest")->count()) cfg.manifest = parsed.manifest;
      return cmd_invert(cfg, checkpoint, n_real, n_fake);
    }
    if (active == attack) {
      if (active->get_option("--method")->count()) cfg.method = parsed.method;
      if (active->get_option("--mask")->count()) cfg.mask = level_from_string(mask_name);
      if (active->get_option("--epsilon")->count())
        cfg.experiment.latent_epsilon = parsed.experiment.latent_epsilon;
      if (active->get_option("--queries")->count())
        cfg.experiment.queries = parsed.experiment.queries;
      if (active->get_option("--target")->count())
        cfg.experiment.target = label_from_string(target_name);
      if (active->get_option("--pixel-epsilon")->count())
        cfg.experiment.pixel.epsilon = parsed.experiment.pixel.epsilon;
      if (active->get_option("--manifest")->count()) cfg.manifest = parsed.manifest;
      return cmd_attack(cfg, latents_dir, n_fake, detector);
    }
    if (active == evaluate) return cmd_evaluate(cfg, records_file);
    if (active == matrix) {
      if (active->get_option("--manifest")->count()) cfg.manifest = parsed.manifest;
      return cmd_matrix(cfg, methods, n_fake);
    }
    if (active == ablate_levels) {
      if (active->get_option("--manifest")->count()) cfg.manifest = parsed.manifest;
      return cmd_ablate_levels(cfg, ab_epsilon, ab_queries, n_fake, detector);
    }
    if (active == ablate_eps) {
      if (active->get_option("--manifest")->count()) cfg.manifest = parsed.manifest;
      return cmd_ablate_epsilon(cfg, epsilons, ab_queries, n_fake, detector);
    }
    if (active == visualize) {
      if (active->get_option("--manifest")->count()) cfg.manifest = parsed.manifest;
      return cmd_visualize(cfg, n_fake, max_items);
    }
    std::cerr << "error: config: no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const CorpusError& e) {
    std::cerr << "error: corpus: " << e.what() << "\n";
    return 4;
  } catch (const BackendError& e) {
    std::cerr << "error: backend: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 1;
  }
}
