#include "artifact/harness.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "artifact/io.hpp"

namespace artifact {

using nlohmann::json;

std::string record_to_json(const RunRecord& r) {
  json j;
  j["image_id"] = r.image_id;
  j["dataset"] = r.dataset;
  j["source_detector"] = r.source_detector;
  j["attack_method"] = r.attack_method;
  j["mask_level"] = r.mask_level ? json(*r.mask_level) : json(nullptr);
  j["epsilon"] = r.epsilon;
  j["queries_used"] = r.queries_used;
  j["status"] = r.status;
  j["final_score"] = r.final_score;
  j["verdicts"] = r.verdicts;
  j["quality"] = {{"tv", r.quality.tv},
                  {"esnle", r.quality.esnle},
                  {"perceptual", r.quality.perceptual},
                  {"id_similarity", r.quality.id_similarity},
                  {"id_retained", r.quality.id_retained}};
  if (r.latent_delta)
    j["latent_delta"] = {{"S", (*r.latent_delta)[0]},
                         {"M", (*r.latent_delta)[1]},
                         {"D", (*r.latent_delta)[2]}};
  else
    j["latent_delta"] = nullptr;
  return j.dump();
}

RunRecord record_from_json(const std::string& line) {
  const json j = json::parse(line);
  RunRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.source_detector = j.at("source_detector").get<std::string>();
  r.attack_method = j.at("attack_method").get<std::string>();
  if (!j.at("mask_level").is_null()) r.mask_level = j.at("mask_level").get<std::string>();
  r.epsilon = j.at("epsilon").get<Scalar>();
  r.queries_used = j.at("queries_used").get<int>();
  r.status = j.at("status").get<std::string>();
  r.final_score = j.at("final_score").get<Scalar>();
  r.verdicts = j.at("verdicts").get<std::map<std::string, std::string>>();
  const auto& q = j.at("quality");
  r.quality.tv = q.at("tv").get<Scalar>();
  r.quality.esnle = q.at("esnle").get<Scalar>();
  r.quality.perceptual = q.at("perceptual").get<Scalar>();
  r.quality.id_similarity = q.at("id_similarity").get<Scalar>();
  r.quality.id_retained = q.at("id_retained").get<bool>();
  if (!j.at("latent_delta").is_null()) {
    const auto& d = j.at("latent_delta");
    r.latent_delta = {{d.at("S").get<Scalar>(), d.at("M").get<Scalar>(),
                       d.at("D").get<Scalar>()}};
  }
  return r;
}

std::string record_key(const RunRecord& r) {
  return r.image_id + "|" + r.source_detector + "|" + r.attack_method + "|" +
         (r.mask_level ? *r.mask_level : "-") + "|" + json(r.epsilon).dump();
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::vector<RunRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) records.push_back(record_from_json(line));
  return records;
}

void append_records(const std::filesystem::path& path,
                    const std::vector<RunRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Idempotent per key: records already present stay untouched.
  std::set<std::string> have;
  for (const auto& r : read_records(path)) have.insert(record_key(r));
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot append records: " + path.string());
  for (const auto& r : records)
    if (have.insert(record_key(r)).second) out << record_to_json(r) << "\n";
}

std::array<Scalar, 3> level_deltas(const Latent& before, const Latent& after) {
  if (!same_shape(before, after)) throw ShapeError("level_deltas: latent shapes differ");
  const Index k = before.num_styles();
  if (k % 3 != 0) throw ShapeError("level_deltas: style count not divisible by 3");
  const Index third = k / 3;
  std::array<Scalar, 3> out{};
  for (int part = 0; part < 3; ++part) {
    const auto diff = (after.codes.middleRows(part * third, third) -
                       before.codes.middleRows(part * third, third))
                          .cwiseAbs();
    out[part] = diff.sum() / Scalar(diff.size());
  }
  return out;
}

namespace {

void run_indexed(std::size_t n, int workers, bool reentrant,
                 const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || !reentrant || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int count = std::min<int>(workers, static_cast<int>(n));
  pool.reserve(count);
  for (int t = 0; t < count; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

bool backend_reentrant(const Backend& b) {
  if (!b.generator->reentrant()) return false;
  for (const auto& d : b.detectors)
    if (!d->reentrant()) return false;
  return true;
}

}  // namespace

RunRecord run_single(Experiment& ex, toy::CorpusItem& item, std::size_t source,
                     const std::string& method, Image* adversarial_out) {
  const auto& det = *ex.backend.detectors.at(source);
  const Image& original = toy::item_image(item);

  RunRecord rec;
  rec.image_id = item.id;
  rec.dataset = ex.cfg.dataset;
  rec.source_detector = det.name();
  rec.attack_method = method;

  AttackResult result;
  if (method == "latent") {
    AttackConfig acfg;
    acfg.epsilon = ex.cfg.latent_epsilon;
    acfg.max_queries = ex.cfg.queries;
    acfg.target = ex.cfg.target;
    acfg.mask = predefined_mask(ex.cfg.mask_level, ex.backend.generator->num_styles());
    acfg.early_stop = ex.cfg.early_stop;
    const Latent w0 = item.inverted_latent ? *item.inverted_latent
                                           : encode(*ex.backend.encoder, original);
    result = latent_attack(w0, *ex.backend.generator, det, acfg);
    rec.mask_level = to_string(ex.cfg.mask_level);
    rec.epsilon = acfg.epsilon;
    if (ex.backend.generator->num_styles() % 3 == 0)
      rec.latent_delta = level_deltas(w0, *result.adversarial_latent);
  } else {
    PixelAttackConfig pcfg = ex.cfg.pixel;
    rec.epsilon = pcfg.epsilon;
    if (method == "fgsm") result = fgsm(original, det, pcfg, ex.cfg.target);
    else if (method == "pgd") result = pgd_linf(original, det, pcfg, ex.cfg.target);
    else if (method == "mifgsm") result = mifgsm(original, det, pcfg, ex.cfg.target);
    else throw ConfigError("unknown attack method: " + method);
  }

  rec.queries_used = result.queries_used;
  rec.status = to_string(result.status);
  rec.final_score = result.final_score;
  for (const auto& d : ex.backend.detectors)
    rec.verdicts[d->name()] =
        to_string(verdict_from_score(detector_score(*d, result.adversarial_image)));
  rec.quality = make_quality_report(original, result.adversarial_image,
                                    *ex.backend.perceptual, *ex.backend.embedder);
  if (adversarial_out) *adversarial_out = std::move(result.adversarial_image);
  return rec;
}

std::vector<TransferMatrix> run_transfer_experiment(Experiment& ex,
                                                    const std::vector<std::string>& methods) {
  if (ex.backend.detectors.size() < 2)
    throw ConfigError("transfer experiment needs at least two detectors");

  std::vector<std::size_t> fake_idx;
  for (std::size_t i = 0; i < ex.corpus.size(); ++i)
    if (ex.corpus[i].label == Label::fake) fake_idx.push_back(i);
  if (fake_idx.empty()) throw CorpusError("transfer experiment: no fake images in corpus");

  std::vector<RunRecord> existing = read_records(ex.records_path);
  std::set<std::string> have;
  for (const auto& r : existing) have.insert(record_key(r));

  // Preload images serially; attacks may then run concurrently.
  for (std::size_t i : fake_idx) toy::item_image(ex.corpus[i]);

  struct Job {
    std::size_t item;
    std::size_t source;
    std::string method;
  };
  std::vector<Job> jobs;
  for (const auto& method : methods)
    for (std::size_t s = 0; s < ex.backend.detectors.size(); ++s)
      for (std::size_t i : fake_idx) jobs.push_back({i, s, method});

  std::vector<std::optional<RunRecord>> produced(jobs.size());
  const bool reentrant = backend_reentrant(ex.backend);
  run_indexed(jobs.size(), ex.cfg.workers, reentrant, [&](std::size_t j) {
    RunRecord probe;
    probe.image_id = ex.corpus[jobs[j].item].id;
    probe.source_detector = ex.backend.detectors[jobs[j].source]->name();
    probe.attack_method = jobs[j].method;
    if (jobs[j].method == "latent") {
      probe.mask_level = to_string(ex.cfg.mask_level);
      probe.epsilon = ex.cfg.latent_epsilon;
    } else {
      probe.epsilon = ex.cfg.pixel.epsilon;
    }
    if (have.count(record_key(probe))) return;
    produced[j] = run_single(ex, ex.corpus[jobs[j].item], jobs[j].source, jobs[j].method);
  });

  std::vector<RunRecord> fresh;
  for (auto& p : produced)
    if (p) fresh.push_back(std::move(*p));
  append_records(ex.records_path, fresh);

  std::vector<RunRecord> all = std::move(existing);
  all.insert(all.end(), fresh.begin(), fresh.end());
  std::vector<std::string> names;
  for (const auto& d : ex.backend.detectors) names.push_back(d->name());
  return matrices_from_records(all, names, methods, ex.cfg.target);
}

std::vector<TransferMatrix> matrices_from_records(const std::vector<RunRecord>& records,
                                                  const std::vector<std::string>& detectors,
                                                  const std::vector<std::string>& methods,
                                                  Label target) {
  std::vector<TransferMatrix> out;
  const std::string want = to_string(target);
  for (const auto& method : methods) {
    TransferMatrix m;
    m.method = method;
    m.detectors = detectors;
    const std::size_t n = detectors.size();
    m.asr_percent.assign(n, std::vector<std::optional<Scalar>>(n));
    m.denominators.assign(n, std::vector<Index>(n, 0));
    std::vector<std::vector<Index>> hits(n, std::vector<Index>(n, 0));
    for (const auto& r : records) {
      if (r.attack_method != method) continue;
      const auto src = std::find(detectors.begin(), detectors.end(), r.source_detector);
      if (src == detectors.end()) continue;
      const std::size_t si = src - detectors.begin();
      for (std::size_t e = 0; e < n; ++e) {
        const auto v = r.verdicts.find(detectors[e]);
        if (v == r.verdicts.end()) continue;
        ++m.denominators[si][e];
        if (v->second == want) ++hits[si][e];
      }
    }
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t e = 0; e < n; ++e)
        if (m.denominators[s][e] > 0)
          m.asr_percent[s][e] = 100.0 * Scalar(hits[s][e]) / Scalar(m.denominators[s][e]);
    out.push_back(std::move(m));
  }
  return out;
}

std::map<Level, AsrReport> run_level_ablation(Experiment& ex, std::size_t detector_index,
                                              Scalar epsilon, int queries) {
  std::map<Level, AsrReport> table;
  const Level saved_level = ex.cfg.mask_level;
  const Scalar saved_eps = ex.cfg.latent_epsilon;
  const int saved_q = ex.cfg.queries;
  ex.cfg.latent_epsilon = epsilon;
  ex.cfg.queries = queries;

  for (Level level : {Level::S, Level::M, Level::D, Level::Full}) {
    ex.cfg.mask_level = level;
    std::vector<RunRecord> recs;
    std::vector<std::size_t> fake_idx;
    for (std::size_t i = 0; i < ex.corpus.size(); ++i)
      if (ex.corpus[i].label == Label::fake) fake_idx.push_back(i);
    if (fake_idx.empty()) throw CorpusError("level ablation: no fakes in corpus");
    for (std::size_t i : fake_idx) toy::item_image(ex.corpus[i]);

    std::vector<std::optional<RunRecord>> produced(fake_idx.size());
    run_indexed(fake_idx.size(), ex.cfg.workers, backend_reentrant(ex.backend),
                [&](std::size_t j) {
                  produced[j] = run_single(ex, ex.corpus[fake_idx[j]], detector_index, "latent");
                });
    for (auto& p : produced) recs.push_back(std::move(*p));
    append_records(ex.records_path, recs);

    AsrReport rep;
    const std::string want = to_string(ex.cfg.target);
    const std::string eval = ex.backend.detectors[detector_index]->name();
    Index hits_all = 0, hits_src = 0;
    for (const auto& r : recs) {
      const bool hit = r.verdicts.at(eval) == want;
      ++rep.n_all;
      hits_all += hit;
      if (r.status == "success") {
        ++rep.n_source_success;
        hits_src += hit;
      }
    }
    rep.over_all = Scalar(hits_all) / Scalar(rep.n_all);
    if (rep.n_source_success > 0)
      rep.over_source_success = Scalar(hits_src) / Scalar(rep.n_source_success);
    table[level] = rep;
  }

  ex.cfg.mask_level = saved_level;
  ex.cfg.latent_epsilon = saved_eps;
  ex.cfg.queries = saved_q;
  return table;
}

std::vector<StrengthRow> run_strength_ablation(Experiment& ex, std::size_t detector_index,
                                               const std::vector<Scalar>& epsilons,
                                               int queries) {
  if (epsilons.empty()) throw ConfigError("strength ablation: empty epsilon list");
  std::vector<StrengthRow> rows;
  const Scalar saved_eps = ex.cfg.latent_epsilon;
  const int saved_q = ex.cfg.queries;
  ex.cfg.queries = queries;

  std::vector<std::size_t> fake_idx;
  for (std::size_t i = 0; i < ex.corpus.size(); ++i)
    if (ex.corpus[i].label == Label::fake) fake_idx.push_back(i);
  if (fake_idx.empty()) throw CorpusError("strength ablation: no fakes in corpus");
  for (std::size_t i : fake_idx) toy::item_image(ex.corpus[i]);

  for (Scalar eps : epsilons) {
    ex.cfg.latent_epsilon = eps;
    std::vector<std::optional<RunRecord>> produced(fake_idx.size());
    run_indexed(fake_idx.size(), ex.cfg.workers, backend_reentrant(ex.backend),
                [&](std::size_t j) {
                  produced[j] = run_single(ex, ex.corpus[fake_idx[j]], detector_index, "latent");
                });
    std::vector<RunRecord> recs;
    for (auto& p : produced) recs.push_back(std::move(*p));
    append_records(ex.records_path, recs);

    StrengthRow row{};
    row.epsilon = eps;
    Index hits = 0;
    for (const auto& r : recs) {
      if (r.status == "success") {
        ++row.n_success;
        row.id_similarity += r.quality.id_similarity;
        row.perceptual += r.quality.perceptual;
        row.esnle += r.quality.esnle;
      }
      const std::string eval = ex.backend.detectors[detector_index]->name();
      if (r.verdicts.at(eval) == to_string(ex.cfg.target)) ++hits;
    }
    row.asr = Scalar(hits) / Scalar(recs.size());
    if (row.n_success > 0) {
      row.id_similarity /= Scalar(row.n_success);
      row.perceptual /= Scalar(row.n_success);
      row.esnle /= Scalar(row.n_success);
    }
    rows.push_back(row);
  }

  ex.cfg.latent_epsilon = saved_eps;
  ex.cfg.queries = saved_q;
  return rows;
}

std::map<std::string, std::array<Scalar, 3>> latent_delta_profile(
    const std::vector<RunRecord>& records) {
  std::map<std::string, std::array<Scalar, 3>> sums;
  std::map<std::string, Index> counts;
  for (const auto& r : records) {
    if (r.attack_method != "latent" || r.status != "success" || !r.latent_delta) continue;
    auto& s = sums[r.dataset];
    for (int i = 0; i < 3; ++i) s[i] += (*r.latent_delta)[i];
    ++counts[r.dataset];
  }
  if (sums.empty()) throw CorpusError("latent_delta_profile: no successful latent records");
  for (auto& [tag, s] : sums)
    for (int i = 0; i < 3; ++i) s[i] /= Scalar(counts[tag]);
  return sums;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("manifest parse error: " + std::string(e.what()));
  }
  Manifest m;
  m.dataset = j.value("dataset", "unnamed");
  if (!j.contains("items") || !j["items"].is_array())
    throw ConfigError("manifest has no items array: " + path.string());
  const auto base = path.parent_path();
  for (const auto& it : j["items"]) {
    toy::CorpusItem item;
    item.id = it.at("id").get<std::string>();
    item.path = base / it.at("path").get<std::string>();
    item.label = label_from_string(it.at("label").get<std::string>());
    m.items.push_back(std::move(item));
  }
  if (m.items.empty()) throw CorpusError("manifest lists no items: " + path.string());
  return m;
}

void save_manifest(const std::filesystem::path& path, const std::string& dataset,
                   const std::vector<toy::CorpusItem>& items) {
  json j;
  j["dataset"] = dataset;
  j["items"] = json::array();
  const auto base = path.parent_path();
  for (const auto& item : items) {
    json e;
    e["id"] = item.id;
    e["path"] = std::filesystem::relative(item.path, base).string();
    e["label"] = to_string(item.label);
    j["items"].push_back(std::move(e));
  }
  const std::string body = j.dump(2) + "\n";
  write_file(path, body.data(), body.size());
}

// ---- Rendering ----

namespace {

std::string fixed(Scalar v, int prec = 1) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

}  // namespace

std::string render_transfer_table(const TransferMatrix& m) {
  std::ostringstream out;
  out << "transfer ASR% (" << m.method << "), rows=source, cols=eval\n";
  out << std::left << std::setw(14) << "source";
  for (const auto& d : m.detectors) out << std::right << std::setw(12) << d;
  out << "\n";
  for (std::size_t s = 0; s < m.detectors.size(); ++s) {
    out << std::left << std::setw(14) << m.detectors[s];
    for (std::size_t e = 0; e < m.detectors.size(); ++e)
      out << std::right << std::setw(12)
          << (m.asr_percent[s][e] ? fixed(*m.asr_percent[s][e]) : std::string("-"));
    out << "\n";
  }
  return out.str();
}

std::string render_level_table(const std::map<Level, AsrReport>& table) {
  std::ostringstream out;
  out << "level-wise ASR%\n";
  out << std::left << std::setw(8) << "level" << std::right << std::setw(10) << "ASR"
      << std::setw(10) << "n" << "\n";
  for (Level l : {Level::S, Level::M, Level::D, Level::Full}) {
    const auto& rep = table.at(l);
    out << std::left << std::setw(8) << to_string(l) << std::right << std::setw(10)
        << fixed(100.0 * rep.over_all) << std::setw(10) << rep.n_all << "\n";
  }
  return out.str();
}

std::string render_strength_table(const std::vector<StrengthRow>& rows) {
  std::ostringstream out;
  out << "strength ablation (quality on successful examples)\n";
  out << std::left << std::setw(10) << "epsilon" << std::right << std::setw(10) << "ID"
      << std::setw(12) << "perceptual" << std::setw(10) << "ESNLE" << std::setw(10) << "ASR"
      << "\n";
  for (const auto& r : rows)
    out << std::left << std::setw(10) << r.epsilon << std::right << std::setw(10)
        << fixed(r.id_similarity, 3) << std::setw(12) << fixed(r.perceptual, 4)
        << std::setw(10) << fixed(r.esnle, 3) << std::setw(10) << fixed(100.0 * r.asr)
        << "\n";
  return out.str();
}

std::string render_quality_table(const std::vector<RunRecord>& records,
                                 const std::vector<std::string>& methods) {
  std::ostringstream out;
  out << "quality of successful adversarial examples\n";
  out << std::left << std::setw(10) << "method" << std::right << std::setw(8) << "n"
      << std::setw(10) << "ID-ret" << std::setw(12) << "perceptual" << std::setw(10) << "TV"
      << std::setw(10) << "ESNLE" << "\n";
  for (const auto& method : methods) {
    Index n = 0, retained = 0;
    Scalar tv = 0, es = 0, perc = 0;
    for (const auto& r : records) {
      if (r.attack_method != method || r.status != "success") continue;
      ++n;
      retained += r.quality.id_retained;
      tv += r.quality.tv;
      es += r.quality.esnle;
      perc += r.quality.perceptual;
    }
    out << std::left << std::setw(10) << method << std::right << std::setw(8) << n;
    if (n > 0)
      out << std::setw(10) << fixed(Scalar(retained) / n, 3) << std::setw(12)
          << fixed(perc / n, 4) << std::setw(10) << fixed(tv / n) << std::setw(10)
          << fixed(es / n, 3);
    else
      out << std::setw(10) << "-" << std::setw(12) << "-" << std::setw(10) << "-"
          << std::setw(10) << "-";
    out << "\n";
  }
  return out.str();
}

void write_transfer_csv(const std::filesystem::path& path, const TransferMatrix& m) {
  std::ostringstream out;
  out << "method,source";
  for (const auto& d : m.detectors) out << "," << d;
  out << "\n";
  for (std::size_t s = 0; s < m.detectors.size(); ++s) {
    out << m.method << "," << m.detectors[s];
    for (std::size_t e = 0; e < m.detectors.size(); ++e)
      out << "," << (m.asr_percent[s][e] ? fixed(*m.asr_percent[s][e], 2) : std::string(""));
    out << "\n";
  }
  const std::string s = out.str();
  write_file(path, s.data(), s.size());
}

void write_level_csv(const std::filesystem::path& path,
                     const std::map<Level, AsrReport>& table) {
  std::ostringstream out;
  out << "level,asr,n\n";
  for (Level l : {Level::S, Level::M, Level::D, Level::Full}) {
    const auto& rep = table.at(l);
    out << to_string(l) << "," << fixed(100.0 * rep.over_all, 2) << "," << rep.n_all << "\n";
  }
  const std::string s = out.str();
  write_file(path, s.data(), s.size());
}

void write_strength_csv(const std::filesystem::path& path,
                        const std::vector<StrengthRow>& rows) {
  std::ostringstream out;
  out << "epsilon,id,perceptual,esnle,asr,n_success\n";
  for (const auto& r : rows)
    out << r.epsilon << "," << fixed(r.id_similarity, 4) << "," << fixed(r.perceptual, 5)
        << "," << fixed(r.esnle, 4) << "," << fixed(100.0 * r.asr, 2) << "," << r.n_success
        << "\n";
  const std::string s = out.str();
  write_file(path, s.data(), s.size());
}

}  // namespace artifact
