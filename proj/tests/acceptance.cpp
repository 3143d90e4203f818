// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fails. Everything runs on the deterministic toy stack on CPU.

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "artifact/config.hpp"
#include "artifact/harness.hpp"
#include "artifact/io.hpp"
#include "artifact/metrics.hpp"
#include "artifact/viz.hpp"

namespace fs = std::filesystem;
using namespace artifact;

namespace {

struct Criterion {
  int number;
  std::string title;
  std::function<std::string()> run;  // returns detail; throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

// ---- Shared fixtures ----

const toy::ToyWorld& world() {
  static const toy::ToyWorld w = [] {
    BackendOptions opts;
    opts.seed = 2026;
    opts.train_per_class = 400;
    opts.heldout_per_class = 150;
    return toy::make_toy_world(opts);
  }();
  return w;
}

// Encoder fine-tuned with the toy preset budget, shared by the attack
// criteria (mirrors the pipeline order: fine-tune, invert, attack).
std::shared_ptr<toy::ToyEncoder> tuned_encoder() {
  static const std::shared_ptr<toy::ToyEncoder> enc = [] {
    const auto& w = world();
    std::vector<Image> corpus;
    for (int i = 0; i < 80; ++i) {
      corpus.push_back(*w.make_real("acc/ft", mix_seed(1, "ftr/" + std::to_string(i))).image);
      corpus.push_back(*w.make_fake("acc/ft", mix_seed(1, "ftf/" + std::to_string(i))).image);
    }
    RunConfig preset;
    apply_preset(preset, "toy");
    FinetuneConfig cfg = preset.finetune;
    cfg.seed = 11;
    const FinetuneResult res = finetune_encoder(*w.encoder, *w.generator, corpus, cfg,
                                                *w.perceptual, *w.embedder);
    require(res.heldout_after.total <= res.heldout_before.total,
            "fine-tune failed to improve the held-out loss");
    return std::dynamic_pointer_cast<toy::ToyEncoder>(res.encoder);
  }();
  return enc;
}

AttackConfig preset_attack(bool early_stop) {
  RunConfig preset;
  apply_preset(preset, "toy");
  AttackConfig cfg;
  cfg.epsilon = preset.experiment.latent_epsilon;
  cfg.max_queries = preset.experiment.queries;
  cfg.target = Label::real;
  cfg.mask = LevelMask::full(world().generator->num_styles());
  cfg.early_stop = early_stop;
  return cfg;
}

// Demo runs shared between criteria 8 and 9.
const char* cli_path() {
  const char* path = std::getenv("ARTIFACT_CLI");
  require(path != nullptr, "ARTIFACT_CLI environment variable not set");
  return path;
}

const std::array<fs::path, 2>& demo_runs() {
  static const std::array<fs::path, 2> dirs = [] {
    const fs::path base = fs::temp_directory_path() / "artifact-acceptance-demo";
    std::array<fs::path, 2> out = {base / "a", base / "b"};
    for (const auto& dir : out) {
      fs::remove_all(dir);
      const std::string cmd = std::string(cli_path()) + " demo --seed 7 --out " +
                              dir.string() + " > " + (dir.string() + ".log") + " 2>&1";
      fs::create_directories(dir.parent_path());
      require(std::system(cmd.c_str()) == 0, "demo run failed, see " + dir.string() + ".log");
    }
    return out;
  }();
  return dirs;
}

// ---- Criteria ----

std::string criterion_gradient_fidelity() {
  const auto& w = world();
  const Scalar h = 1e-4;
  int latents = 0, coords = 0, worst_idx = -1;
  Scalar worst = 0;
  for (int round = 0; round < 100; ++round) {
    const Latent v = w.inject_artifact(
        w.sample_real_latent(mix_seed(3, "c1/" + std::to_string(round))),
        mix_seed(4, "c1/" + std::to_string(round)));
    const auto& det = *w.detectors[round % w.detectors.size()];
    const Latent analytic = adversarial_grad(det, *w.generator, v, Label::real);

    // Independent central-difference oracle over every coordinate.
    Latent probe = v;
    const Scalar y = label_to_scalar(Label::real);
    for (Index i = 0; i < v.num_styles(); ++i)
      for (Index j = 0; j < v.dim(); ++j) {
        const Scalar saved = probe.codes(i, j);
        probe.codes(i, j) = saved + h;
        const Scalar up = std::pow(detector_score(det, decode(*w.generator, probe)) - y, 2);
        probe.codes(i, j) = saved - h;
        const Scalar dn = std::pow(detector_score(det, decode(*w.generator, probe)) - y, 2);
        probe.codes(i, j) = saved;
        const Scalar fd = (up - dn) / (2 * h);
        if (std::abs(analytic.codes(i, j)) <= 1e-6) continue;
        const Scalar rel = std::abs(fd - analytic.codes(i, j)) / std::abs(analytic.codes(i, j));
        ++coords;
        if (rel > worst) {
          worst = rel;
          worst_idx = round;
        }
        require(rel <= 1e-4, "relative error " + fmt(rel) + " at latent " +
                                 std::to_string(round) + " coord (" + std::to_string(i) +
                                 "," + std::to_string(j) + ")");
      }
    ++latents;
  }
  return std::to_string(latents) + " latents, " + std::to_string(coords) +
         " coordinates checked, worst rel err " + fmt(worst) + " (latent " +
         std::to_string(worst_idx) + ")";
}

std::string criterion_closed_form_attack() {
  toy::Lin1DGenerator gen;
  toy::PixelMeanDetector det(1);
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<Scalar> start(0.55, 0.97);
  std::uniform_real_distribution<Scalar> steps(0.02, 0.2);
  for (int round = 0; round < 20; ++round) {
    const Scalar s0 = start(rng);
    const Scalar eps = steps(rng);
    Latent w0(1, 1);
    w0.codes(0, 0) = std::log(s0 / (1.0 - s0));

    int expected = 0;  // scalar oracle: w <- w - eps until sigmoid(w) <= 1/2
    for (Scalar v = w0.codes(0, 0); v > 0.0; v -= eps) ++expected;

    AttackConfig cfg;
    cfg.epsilon = eps;
    cfg.max_queries = 500;
    cfg.target = Label::real;
    cfg.mask = LevelMask::full(1);
    const AttackResult res = latent_attack(w0, gen, det, cfg);
    require(res.status == AttackStatus::success, "1-D attack failed to flip");
    require(res.queries_used == expected,
            "flip after " + std::to_string(res.queries_used) + " steps, oracle says " +
                std::to_string(expected));
    for (std::size_t i = 1; i < res.score_trace.size(); ++i)
      require(res.score_trace[i] < res.score_trace[i - 1], "score trace not strictly decreasing");
  }
  return "20 random starts flip at the oracle step count with strictly decreasing traces";
}

std::string criterion_mask_freezing() {
  const auto& w = world();
  std::mt19937_64 rng(31415);
  std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
  int runs = 0;
  for (int round = 0; round < 200; ++round) {
    const Latent w0 = w.inject_artifact(
        w.sample_real_latent(mix_seed(5, "c3/" + std::to_string(round))),
        mix_seed(6, "c3/" + std::to_string(round)));
    LevelMask mask = LevelMask::none(6);
    for (Index j = 0; j < 6; ++j) mask.flags[j] = unif(rng) < 0.5;
    AttackConfig cfg;
    cfg.epsilon = 0.002 + 0.045 * unif(rng);
    cfg.max_queries = 1 + int(unif(rng) * 25);
    cfg.target = Label::real;
    cfg.mask = mask;
    cfg.early_stop = unif(rng) < 0.5;
    const AttackResult res =
        latent_attack(w0, *w.generator, *w.detectors[round % 4], cfg);
    const Latent& adv = *res.adversarial_latent;
    for (Index j = 0; j < 6; ++j)
      if (!mask[j])
        for (Index d = 0; d < adv.dim(); ++d)
          require(adv.codes(j, d) == w0.codes(j, d),
                  "masked-out style " + std::to_string(j) + " moved");
    const Scalar bound = res.queries_used * cfg.epsilon * (1.0 + 1e-9) + 1e-12;
    require((adv.codes - w0.codes).cwiseAbs().maxCoeff() <= bound,
            "per-coordinate displacement exceeded steps*epsilon");
    ++runs;
  }
  return std::to_string(runs) + " fuzzed (mask, epsilon, steps) runs: frozen styles "
         "bit-identical, displacement within budget";
}

std::string criterion_whitebox_asr() {
  const auto& w = world();
  for (std::size_t d = 0; d < w.detectors.size(); ++d)
    require(w.detector_accuracy[d] >= 0.95,
            "detector " + std::to_string(d) + " held-out accuracy " +
                fmt(w.detector_accuracy[d]) + " below 0.95");

  const auto enc = tuned_encoder();
  const AttackConfig cfg = preset_attack(/*early_stop=*/true);
  int flips = 0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    auto fake = w.make_fake("acc/c4", mix_seed(8, "c4/" + std::to_string(i)));
    const AttackResult res =
        latent_attack(encode(*enc, *fake.image), *w.generator, *w.detectors[0], cfg);
    flips += res.status == AttackStatus::success;
  }
  const Scalar asr = Scalar(flips) / n;
  require(asr >= 0.9, "white-box ASR " + fmt(asr) + " below 0.9");
  return "detector accuracy >= 0.95 (min " +
         fmt(*std::min_element(w.detector_accuracy.begin(), w.detector_accuracy.end())) +
         "), ASR " + fmt(asr) + " over " + std::to_string(n) + " fakes";
}

std::string criterion_transfer_direction() {
  const auto& w = world();
  toy::ToyWorld tuned = w;
  tuned.encoder = tuned_encoder();

  RunConfig preset;
  apply_preset(preset, "toy");
  Experiment ex;
  ex.backend = toy::backend_from_world(tuned);
  ex.corpus = tuned.make_corpus(0, 120, "acc/c5");
  const fs::path records = fs::temp_directory_path() / "artifact-acceptance-c5.jsonl";
  fs::remove(records);
  ex.records_path = records;
  ex.cfg.dataset = "toy";
  ex.cfg.latent_epsilon = preset.experiment.latent_epsilon;
  ex.cfg.queries = preset.experiment.queries;
  ex.cfg.early_stop = false;  // fixed query budget, as in the reported tables
  ex.cfg.pixel = preset.experiment.pixel;

  const auto matrices = run_transfer_experiment(ex, {"latent", "fgsm"});
  auto summarize = [](const TransferMatrix& m) {
    Scalar diag = 0, off = 0;
    int noff = 0;
    const std::size_t n = m.detectors.size();
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t e = 0; e < n; ++e) {
        require(m.asr_percent[s][e].has_value(), "missing matrix cell");
        if (s == e) diag += *m.asr_percent[s][e];
        else {
          off += *m.asr_percent[s][e];
          ++noff;
        }
      }
    return std::pair<Scalar, Scalar>{diag / n, off / noff};
  };
  const auto [wb_latent, off_latent] = summarize(matrices[0]);
  const auto [wb_fgsm, off_fgsm] = summarize(matrices[1]);

  require(std::abs(wb_latent - wb_fgsm) <= 5.0,
          "white-box ASR not matched: latent " + fmt(wb_latent) + " vs fgsm " + fmt(wb_fgsm));
  require(off_latent > off_fgsm,
          "latent off-diagonal " + fmt(off_latent) + " not above fgsm " + fmt(off_fgsm));
  return "white-box latent " + fmt(wb_latent) + "% vs fgsm " + fmt(wb_fgsm) +
         "% (matched), off-diagonal latent " + fmt(off_latent) + "% > fgsm " +
         fmt(off_fgsm) + "%";
}

std::string criterion_level_ablation() {
  const auto& w = world();
  toy::ToyWorld tuned = w;
  tuned.encoder = tuned_encoder();
  RunConfig preset;
  apply_preset(preset, "toy");

  Experiment ex;
  ex.backend = toy::backend_from_world(tuned);
  ex.corpus = tuned.make_corpus(0, 80, "acc/c6");
  const fs::path records = fs::temp_directory_path() / "artifact-acceptance-c6.jsonl";
  fs::remove(records);
  ex.records_path = records;
  ex.cfg.dataset = "toy";
  ex.cfg.early_stop = false;
  ex.cfg.pixel = preset.experiment.pixel;

  const auto table = run_level_ablation(ex, 0, preset.experiment.latent_epsilon, 100);
  const Scalar full = table.at(Level::Full).over_all;
  Scalar best_single = 0;
  for (Level l : {Level::S, Level::M, Level::D})
    best_single = std::max(best_single, table.at(l).over_all);
  require(full >= best_single, "Full-mask ASR " + fmt(full) + " below best single level " +
                                   fmt(best_single));
  std::ostringstream detail;
  detail << "ASR S/M/D/Full = " << fmt(100 * table.at(Level::S).over_all) << "/"
         << fmt(100 * table.at(Level::M).over_all) << "/"
         << fmt(100 * table.at(Level::D).over_all) << "/" << fmt(100 * full)
         << "% over 80 fakes, queries=100";
  return detail.str();
}

std::string criterion_metric_calibration() {
  // ESNLE: injected sigma recovered within +-20% over 20 seeds.
  Image base(128, 128);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < 128; ++y)
      for (Index x = 0; x < 128; ++x)
        base.ch[c](y, x) = 0.2 + 0.5 * (Scalar(x) + Scalar(y)) / 256.0;
  const Scalar sigma = 0.05;
  Scalar worst_ratio = 1.0;
  for (int seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<Scalar> gauss(0.0, sigma);
    Image noisy = base;
    for (auto& c : noisy.ch)
      for (Index y = 0; y < 128; ++y)
        for (Index x = 0; x < 128; ++x) c(y, x) += gauss(rng);
    const Scalar est = esnle(noisy);
    require(est >= 0.8 * sigma && est <= 1.2 * sigma,
            "seed " + std::to_string(seed) + ": estimate " + fmt(est) + " outside +-20%");
    worst_ratio = std::max({worst_ratio, est / sigma, sigma / est});
  }

  require(total_variation(Image::constant(16, 16, 0.42)) == 0.0, "TV of constant image not 0");

  // TV halves when the fixed-pattern amplitude halves.
  Image pattern(32, 32);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < 32; ++y)
      for (Index x = 0; x < 32; ++x) pattern.ch[c](y, x) = ((x + y) % 2) ? 1.0 : -1.0;
  auto with_amp = [&](Scalar amp) {
    Image img = Image::constant(32, 32, 0.5);
    for (int c = 0; c < 3; ++c) img.ch[c] += amp * pattern.ch[c];
    return total_variation(img);
  };
  const Scalar tv_full = with_amp(0.2), tv_half = with_amp(0.1);
  require(std::abs(tv_half / tv_full - 0.5) <= 0.005,
          "TV ratio " + fmt(tv_half / tv_full) + " not 0.5 within 1%");

  return "ESNLE within +-20% over 20 seeds (worst ratio " + fmt(worst_ratio) +
         "), TV(const)=0, TV halves at half amplitude (ratio " + fmt(tv_half / tv_full) + ")";
}

std::string criterion_quality_plumbing() {
  const auto& dirs = demo_runs();
  const auto records = read_records(dirs[0] / "records.jsonl");
  require(!records.empty(), "demo produced no records");
  for (const auto& r : records)
    require(r.quality.id_retained == (r.quality.id_similarity >= kIdRetentionThreshold),
            "record " + r.image_id + " violates id_retained <=> similarity >= 0.75");

  const auto& w = world();
  const Image x = *w.make_fake("acc/c8", mix_seed(12, "c8")).image;
  FinetuneConfig cfg;
  const LossParts p = reconstruction_loss(x, x, cfg, *w.perceptual, *w.embedder);
  require(p.total == 0.0 && p.mse == 0.0 && p.lpips == 0.0 && p.id == 0.0,
          "reconstruction_loss(x,x) is not exactly zero");
  return std::to_string(records.size()) +
         " demo records satisfy the retention invariant; reconstruction_loss(x,x) == 0";
}

std::string criterion_reproducibility() {
  const auto& dirs = demo_runs();
  const auto a = read_file(dirs[0] / "records.jsonl");
  const auto b = read_file(dirs[1] / "records.jsonl");
  require(a == b, "records.jsonl differs between same-seed demo runs");

  int pngs = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const fs::path other = dirs[1] / fs::relative(entry.path(), dirs[0]);
    require(fs::exists(other), "missing PNG in second run: " + other.string());
    require(read_file(entry.path()) == read_file(other),
            "PNG differs between runs: " + entry.path().filename().string());
    ++pngs;
  }
  require(pngs > 0, "demo produced no PNGs");
  return "records.jsonl byte-identical; " + std::to_string(pngs) + " PNGs byte-identical";
}

std::string criterion_residual_localization() {
  const auto& w = world();
  const auto enc = tuned_encoder();
  const AttackConfig cfg = preset_attack(/*early_stop=*/false);
  const toy::Box box = w.generator->artifact_box();

  Scalar mass_sum = 0, mass_min = 1.0;
  int successes = 0, localized = 0;
  for (int i = 0; i < 40; ++i) {
    auto fake = w.make_fake("acc/c10", mix_seed(13, "c10/" + std::to_string(i)));
    const AttackResult res =
        latent_attack(encode(*enc, *fake.image), *w.generator, *w.detectors[0], cfg);
    if (res.status != AttackStatus::success) continue;
    ++successes;
    const viz::HeatMap map = viz::residual_map(*fake.image, res.adversarial_image);
    Scalar inside = 0, total = 0;
    for (Index y = 0; y < map.values.rows(); ++y)
      for (Index x = 0; x < map.values.cols(); ++x) {
        total += map.values(y, x);
        if (box.contains(y, x)) inside += map.values(y, x);
      }
    const Scalar frac = inside / total;
    mass_sum += frac;
    mass_min = std::min(mass_min, frac);
    localized += frac >= 0.6;
  }
  require(successes >= 30, "too few successful attacks: " + std::to_string(successes));
  const Scalar mean = mass_sum / successes;
  require(mean >= 0.6, "mean residual mass in box " + fmt(mean) + " below 0.6");
  require(localized == successes,
          std::to_string(successes - localized) + " successful attacks below the 0.6 mass bound");
  return std::to_string(successes) + " successful attacks, box mass mean " + fmt(mean) +
         ", min " + fmt(mass_min) + " (box covers 14% of pixels)";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gradient fidelity vs central finite differences", criterion_gradient_fidelity},
      {2, "closed-form 1-D attack step counts", criterion_closed_form_attack},
      {3, "mask freezing and displacement budget", criterion_mask_freezing},
      {4, "toy white-box ASR at preset budget", criterion_whitebox_asr},
      {5, "transferability direction vs pixel FGSM", criterion_transfer_direction},
      {6, "level ablation: Full dominates single levels", criterion_level_ablation},
      {7, "metric calibration (ESNLE, TV)", criterion_metric_calibration},
      {8, "quality report and loss plumbing", criterion_quality_plumbing},
      {9, "seeded demo reproducibility", criterion_reproducibility},
      {10, "residual localization in the artifact box", criterion_residual_localization},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = true;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    std::cout << "criterion " << std::setw(2) << c.number << " ["
              << (ok ? "PASS" : "FAIL") << "] " << c.title << ": " << detail << "\n"
              << std::flush;
    failed += !ok;
  }
  if (failed) std::cout << failed << " criterion(s) failed\n";
  return failed == 0 ? 0 : 1;
}
