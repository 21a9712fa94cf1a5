// SPDX-License-Identifier: Apache-2.0
//
// Stage orchestration over an on-disk store:
//
//   <store>/corpus/decisions.jsonl
//   <store>/chunks/chunks.jsonl
//   <store>/stats/{stats.json,stats.tsv,summary.txt}
//   <store>/records/<provision key>.jsonl
//   <store>/clusters/<provision key>.json
//   <store>/commentaries/<provision key>/{drafts.json,<model>.json,<model>.md,<model>.citations.json}
//   <store>/evaluation/{report.json,report.txt,judge_scores.json}
//   <store>/manifests/<stage>.json
//   <store>/run_manifest.json
//
// Each stage writes into a staging directory and swaps it in when done. Stage
// manifests hold only digests and are reproducible; run_manifest.json carries
// timestamps and absolute paths.
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexcomm/cluster.hpp"
#include "lexcomm/corpus.hpp"
#include "lexcomm/enrich.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/evaluate.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/generate.hpp"
#include "lexcomm/io.hpp"
#include "lexcomm/parallel.hpp"
#include "lexcomm/provision.hpp"
#include "lexcomm/record.hpp"
#include "lexcomm/templates.hpp"

#ifndef LEXCOMM_VERSION
#define LEXCOMM_VERSION "0.1.0"
#endif

namespace lexcomm {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = LEXCOMM_VERSION;

inline std::vector<ModelId> default_generators() {
  return {{"openai", "gpt-4o"}, {"openai", "gpt-4.1"}, {"openai", "gpt-4.5-preview"}, {"openai", "o3"}};
}

inline std::vector<ProvisionRef> default_provisions() {
  return {{"BGB", 242}, {"BGB", 280}, {"BGB", 812}, {"BGB", 823}};
}

struct PipelineConfig {
  fs::path corpus_dir = "corpus";
  fs::path store_dir = "store";
  std::optional<fs::path> cache_dir;
  fs::path registry = "provisions.json";
  std::optional<fs::path> prompts_dir;
  std::optional<fs::path> human_scores;
  std::vector<ProvisionRef> provisions = default_provisions();
  std::size_t min_chunk_chars = 100;
  ClusterParams cluster;
  std::vector<ModelId> generators = default_generators();
  ModelId summarizer{"openai", "gpt-4o"};
  /// Writes headlines and section drafts; defaults to the summarizer.
  std::optional<ModelId> section_model;
  ModelId embedder{"openai", "text-embedding-3-large"};
  ModelId judge{"google", "gemini-2.5-flash"};
  std::string backend = "mock";
  std::uint64_t seed = 0;
  std::string language = "de";
  std::size_t workers = 4;
  std::size_t max_in_flight = 8;

  ModelId drafting_model() const { return section_model.value_or(summarizer); }

  /// Report label of a generator: its bare model name.
  static std::string label(const ModelId& m) { return m.name; }

  void validate() const {
    if (provisions.empty()) throw ConfigError("no provisions configured");
    if (generators.empty()) throw ConfigError("no generator models configured");
    if (std::find(generators.begin(), generators.end(), judge) != generators.end()) {
      throw ConfigError("judge model " + judge.str() + " is also a generator model");
    }
    std::set<std::string> labels;
    for (const auto& g : generators) {
      if (!labels.insert(label(g)).second) throw ConfigError("generator model listed twice: " + g.str());
    }
    if (backend != "mock" && backend != "live") throw ConfigError("backend must be 'mock' or 'live', got '" + backend + "'");
    if (language != "de" && language != "en") throw ConfigError("language must be 'de' or 'en'");
    if (min_chunk_chars < 1) throw ConfigError("min_chunk_chars must be >= 1");
    cluster.validate();
  }

  /// Reads a JSON config. Relative paths are resolved against base_dir.
  static PipelineConfig from_json(const nlohmann::json& j, const fs::path& base_dir) {
    static const std::set<std::string> known{
        "corpus_dir",      "store_dir",     "cache_dir",        "registry",        "prompts_dir",   "human_scores",
        "provisions",      "min_chunk_chars", "min_cluster_size", "min_samples",   "generator_models",
        "summarizer_model", "section_model", "embedding_model", "judge_model",     "backend",       "seed",
        "language",        "workers",       "max_in_flight"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (!known.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    PipelineConfig c;
    auto path = [&](const char* key) { return base_dir / j.at(key).get<std::string>(); };
    try {
      if (j.contains("corpus_dir")) c.corpus_dir = path("corpus_dir");
      if (j.contains("store_dir")) c.store_dir = path("store_dir");
      if (j.contains("cache_dir")) c.cache_dir = path("cache_dir");
      if (j.contains("registry")) c.registry = path("registry");
      if (j.contains("prompts_dir")) c.prompts_dir = path("prompts_dir");
      if (j.contains("human_scores")) c.human_scores = path("human_scores");
      if (j.contains("provisions")) {
        c.provisions.clear();
        for (const auto& p : j["provisions"]) c.provisions.push_back(ProvisionRef::parse(p.get<std::string>()));
      }
      if (j.contains("min_chunk_chars")) c.min_chunk_chars = j["min_chunk_chars"].get<std::size_t>();
      if (j.contains("min_cluster_size")) c.cluster.min_cluster_size = j["min_cluster_size"].get<std::size_t>();
      if (j.contains("min_samples")) c.cluster.min_samples = j["min_samples"].get<std::size_t>();
      if (j.contains("generator_models")) c.generators = j["generator_models"].get<std::vector<ModelId>>();
      if (j.contains("summarizer_model")) c.summarizer = j["summarizer_model"].get<ModelId>();
      if (j.contains("section_model")) c.section_model = j["section_model"].get<ModelId>();
      if (j.contains("embedding_model")) c.embedder = j["embedding_model"].get<ModelId>();
      if (j.contains("judge_model")) c.judge = j["judge_model"].get<ModelId>();
      if (j.contains("backend")) c.backend = j["backend"].get<std::string>();
      if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("language")) c.language = j["language"].get<std::string>();
      if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
      if (j.contains("max_in_flight")) c.max_in_flight = j["max_in_flight"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
  }

  static PipelineConfig load(const fs::path& file) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(file));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(file.string() + ": " + e.what());
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    return from_json(j, fs::absolute(file).parent_path());
  }

  /// Settings that determine stage outputs; paths are left out so that runs
  /// into different stores compare equal.
  nlohmann::json settings() const {
    return {{"provisions", provisions},
            {"min_chunk_chars", min_chunk_chars},
            {"cluster", cluster},
            {"generator_models", generators},
            {"summarizer_model", summarizer},
            {"section_model", drafting_model()},
            {"embedding_model", embedder},
            {"judge_model", judge},
            {"backend", backend},
            {"seed", seed},
            {"language", language}};
  }

  nlohmann::json snapshot() const {
    auto j = settings();
    auto opt = [](const std::optional<fs::path>& p) { return p ? nlohmann::json(fs::absolute(*p).string()) : nlohmann::json(nullptr); };
    j["corpus_dir"] = fs::absolute(corpus_dir).string();
    j["store_dir"] = fs::absolute(store_dir).string();
    j["registry"] = fs::absolute(registry).string();
    j["cache_dir"] = opt(cache_dir);
    j["prompts_dir"] = opt(prompts_dir);
    j["human_scores"] = opt(human_scores);
    j["workers"] = workers;
    j["max_in_flight"] = max_in_flight;
    return j;
  }
};

enum class Stage { ingest, chunk, stats, enrich, cluster, generate, evaluate };

inline constexpr std::array<Stage, 7> kStageOrder{Stage::ingest, Stage::chunk,    Stage::stats,   Stage::enrich,
                                                  Stage::cluster, Stage::generate, Stage::evaluate};

inline std::string stage_name(Stage s) {
  static constexpr std::array<const char*, 7> names{"ingest", "chunk", "stats", "enrich", "cluster", "generate", "evaluate"};
  return names[static_cast<std::size_t>(s)];
}

inline Stage parse_stage(std::string_view name) {
  for (auto s : kStageOrder) {
    if (stage_name(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

/// Output directory of a stage, relative to the store.
inline std::string stage_dir(Stage s) {
  static constexpr std::array<const char*, 7> dirs{"corpus",   "chunks",       "stats",     "records",
                                                   "clusters", "commentaries", "evaluation"};
  return dirs[static_cast<std::size_t>(s)];
}

/// The stage whose output this stage reads, if any.
inline std::optional<Stage> predecessor(Stage s) {
  switch (s) {
    case Stage::ingest: return std::nullopt;
    case Stage::chunk: return Stage::ingest;
    case Stage::stats: return Stage::chunk;
    case Stage::enrich: return Stage::chunk;
    case Stage::cluster: return Stage::enrich;
    case Stage::generate: return Stage::cluster;
    case Stage::evaluate: return Stage::generate;
  }
  return std::nullopt;
}

struct StageReport {
  Stage stage = Stage::ingest;
  bool skipped = false;
  std::vector<std::string> processed;  // provisions (or items) computed in this run
  std::vector<std::string> reused;     // provisions whose previous output was kept
  std::vector<std::string> warnings;
  std::string input_digest;
  std::string output_digest;
};

inline nlohmann::json to_json_report(const StageReport& r) {
  return {{"stage", stage_name(r.stage)}, {"skipped", r.skipped},   {"processed", r.processed},
          {"reused", r.reused},           {"warnings", r.warnings}, {"input_digest", r.input_digest},
          {"output_digest", r.output_digest}};
}

using Log = std::function<void(const std::string&)>;

class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<Backend> backend, Log log = {})
      : config_(std::move(config)), log_(std::move(log)) {
    config_.validate();
    if (!backend) throw ConfigError("pipeline needs a backend");
    if (config_.prompts_dir) templates_.load_overrides(*config_.prompts_dir);
    auto cache = config_.cache_dir ? std::make_shared<ResponseCache>(*config_.cache_dir) : std::make_shared<ResponseCache>();
    gateway_ = std::make_unique<Gateway>(std::move(backend), std::move(cache), RetryPolicy{}, config_.max_in_flight);
  }

  const PipelineConfig& config() const noexcept { return config_; }
  Gateway& gateway() noexcept { return *gateway_; }
  const templates::TemplateSet& templates() const noexcept { return templates_; }
  fs::path store() const { return config_.store_dir; }
  fs::path dir(Stage s) const { return store() / stage_dir(s); }
  fs::path manifest_path(Stage s) const { return store() / "manifests" / (stage_name(s) + ".json"); }

  StageReport run_stage(Stage s) {
    switch (s) {
      case Stage::ingest: return ingest();
      case Stage::chunk: return chunk();
      case Stage::stats: return stats();
      case Stage::enrich: return enrich();
      case Stage::cluster: return cluster();
      case Stage::generate: return generate();
      case Stage::evaluate: return evaluate();
    }
    throw ConfigError("unknown stage");
  }

  /// All stages in order. A fabrication failure in generate is rethrown after
  /// evaluate has run on the commentaries that did succeed.
  std::vector<StageReport> run() {
    std::vector<StageReport> reports;
    std::optional<FabricationError> deferred;
    for (auto s : kStageOrder) {
      try {
        reports.push_back(run_stage(s));
      } catch (const FabricationError& e) {
        if (s != Stage::generate) throw;
        deferred = e;
      }
    }
    if (deferred) throw *deferred;
    return reports;
  }

  /// Digest of everything a stage reads, as the store and config are now.
  std::string input_digest(Stage s) const {
    Hasher h;
    h.field(kToolVersion).field(stage_name(s));
    switch (s) {
      case Stage::ingest:
        h.field(corpus_files_digest()).field(registry().digest());
        break;
      case Stage::chunk:
        h.field(io::tree_digest(dir(Stage::ingest))).field(std::to_string(config_.min_chunk_chars));
        break;
      case Stage::stats:
        h.field(io::tree_digest(dir(Stage::ingest))).field(io::tree_digest(dir(Stage::chunk)));
        break;
      case Stage::enrich:
        h.field(io::tree_digest(dir(Stage::chunk))).field(enrich_settings());
        break;
      case Stage::cluster:
        h.field(io::tree_digest(dir(Stage::enrich))).field(cluster_settings());
        break;
      case Stage::generate:
        h.field(io::tree_digest(dir(Stage::cluster)))
            .field(io::tree_digest(dir(Stage::enrich)))
            .field(generate_settings());
        break;
      case Stage::evaluate:
        h.field(io::tree_digest(dir(Stage::generate))).field(evaluate_settings());
        break;
    }
    return h.hex();
  }

  /// Throws StageDependencyError naming the earliest ancestor of s that is
  /// missing or whose inputs changed since it last ran.
  void require_predecessors(Stage s) const {
    std::vector<Stage> chain;
    for (auto p = predecessor(s); p; p = predecessor(*p)) chain.push_back(*p);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const auto p = *it;
      const auto m = manifest_path(p);
      if (!fs::exists(m) || !fs::exists(dir(p))) {
        throw StageDependencyError(stage_name(p), "stage '" + stage_name(s) + "' needs the output of '" +
                                                      stage_name(p) + "', which has not been run");
      }
      const auto recorded = io::read_json(m).at("input_digest").get<std::string>();
      if (recorded != input_digest(p)) {
        throw StageDependencyError(stage_name(p), "the output of stage '" + stage_name(p) +
                                                      "' is stale (its inputs changed); re-run '" + stage_name(p) + "'");
      }
    }
  }

  /// Writes run_manifest.json: config snapshot, template digests, stage reports
  /// and store digests, with wall-clock timestamps.
  void write_run_manifest(const std::string& command, const std::vector<StageReport>& reports,
                          const std::string& started_at) const {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& r : reports) stages.push_back(to_json_report(r));
    nlohmann::json digests = nlohmann::json::object();
    for (auto s : kStageOrder) {
      if (fs::exists(dir(s))) digests[stage_dir(s)] = io::tree_digest(dir(s));
    }
    io::write_json(store() / "run_manifest.json", {{"tool_version", kToolVersion},
                                                   {"command", command},
                                                   {"started_at", started_at},
                                                   {"finished_at", now_iso()},
                                                   {"config", config_.snapshot()},
                                                   {"templates", templates_.digests()},
                                                   {"stages", stages},
                                                   {"store_digests", digests}});
  }

  static std::string now_iso() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  // -------------------------------------------------------------------------
  // Store readers
  // -------------------------------------------------------------------------

  const ProvisionRegistry& registry() const {
    if (!registry_) registry_ = ProvisionRegistry::load(config_.registry);
    return *registry_;
  }

  std::vector<Decision> load_decisions() const {
    std::vector<Decision> out;
    for (const auto& row : io::read_jsonl(dir(Stage::ingest) / "decisions.jsonl")) out.push_back(row.get<Decision>());
    return out;
  }

  std::vector<Chunk> load_chunks() const {
    std::vector<Chunk> out;
    for (const auto& row : io::read_jsonl(dir(Stage::chunk) / "chunks.jsonl")) out.push_back(row.get<Chunk>());
    return out;
  }

  ClusteringResult load_clustering(const ProvisionRef& p) const {
    return io::read_json(dir(Stage::cluster) / (p.key() + ".json")).get<ClusteringResult>();
  }

  fs::path commentary_dir(const ProvisionRef& p) const { return dir(Stage::generate) / p.key(); }

  std::optional<Commentary> load_commentary(const ProvisionRef& p, const ModelId& m) const {
    const auto f = commentary_dir(p) / (m.key() + ".json");
    if (!fs::exists(f)) return std::nullopt;
    return io::read_json(f).get<Commentary>();
  }

 private:
  Llm llm() { return Llm{*gateway_, templates_, {}}; }

  void info(const std::string& msg) const {
    if (log_) log_(msg);
  }

  std::string corpus_files_digest() const {
    Hasher h;
    if (!fs::is_directory(config_.corpus_dir)) return h.field("<missing corpus>").hex();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config_.corpus_dir)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".json" || ext == ".xml")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) h.field(f.filename().string()).field(read_file(f));
    return h.hex();
  }

  std::string template_digest(std::initializer_list<const char*> ids, bool both_languages = false) const {
    Hasher h;
    for (const auto* id : ids) {
      h.field(templates_.get(id, both_languages ? config_.language : "de").digest());
    }
    return h.hex();
  }

  std::string enrich_settings() const {
    return nlohmann::json{{"provisions", config_.provisions},
                          {"summarizer", config_.summarizer},
                          {"embedder", config_.embedder},
                          {"seed", config_.seed},
                          {"backend", config_.backend},
                          {"registry", registry().digest()},
                          {"templates", template_digest({templates::kSummarize, templates::kKeyword})}}
        .dump();
  }

  std::string cluster_settings() const {
    return nlohmann::json{{"provisions", config_.provisions}, {"params", config_.cluster}}.dump();
  }

  std::string generate_settings() const {
    return nlohmann::json{{"provisions", config_.provisions},
                          {"generators", config_.generators},
                          {"drafting_model", config_.drafting_model()},
                          {"backend", config_.backend},
                          {"seed", config_.seed},
                          {"language", config_.language},
                          {"registry", registry().digest()},
                          {"templates", template_digest({templates::kHeadline, templates::kSection}) +
                                            template_digest({templates::kMerge}, true)}}
        .dump();
  }

  std::string evaluate_settings() const {
    std::string human = "<none>";
    if (config_.human_scores) human = file_digest(*config_.human_scores);
    return nlohmann::json{{"provisions", config_.provisions},
                          {"generators", config_.generators},
                          {"judge", config_.judge},
                          {"backend", config_.backend},
                          {"seed", config_.seed},
                          {"human_scores", human},
                          {"templates", template_digest({templates::kJudge, templates::kJudgeRetry}, true)}}
        .dump();
  }

  /// Common prologue: dependency check and whole-stage skip. Returns a report
  /// with skipped = true when the recorded input digest still matches.
  StageReport begin(Stage s, bool allow_skip = true) const {
    require_predecessors(s);
    StageReport r;
    r.stage = s;
    r.input_digest = input_digest(s);
    if (allow_skip && fs::exists(manifest_path(s)) && fs::exists(dir(s))) {
      const auto m = io::read_json(manifest_path(s));
      if (m.at("input_digest") == r.input_digest && m.value("complete", true)) {
        r.skipped = true;
        r.output_digest = m.at("output_digest").get<std::string>();
        info(stage_name(s) + ": up to date");
      }
    }
    return r;
  }

  fs::path staging(Stage s) const {
    const auto p = store() / (".staging-" + stage_dir(s));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }

  void finish(StageReport& r, const fs::path& staged, nlohmann::json details = nlohmann::json::object(),
              bool complete = true) const {
    io::promote_directory(staged, dir(r.stage));
    r.output_digest = io::tree_digest(dir(r.stage));
    io::write_json(manifest_path(r.stage), {{"stage", stage_name(r.stage)},
                                            {"tool_version", kToolVersion},
                                            {"input_digest", r.input_digest},
                                            {"output_digest", r.output_digest},
                                            {"complete", complete},
                                            {"details", std::move(details)}});
    for (const auto& w : r.warnings) info(stage_name(r.stage) + ": warning: " + w);
  }

  // -------------------------------------------------------------------------
  // Stages
  // -------------------------------------------------------------------------

  StageReport ingest() {
    auto r = begin(Stage::ingest);
    if (r.skipped) return r;
    const auto corpus = Corpus::ingest_directory(config_.corpus_dir, registry());
    const auto out = staging(Stage::ingest);
    std::vector<nlohmann::json> rows;
    for (const auto& d : corpus.decisions()) {
      rows.push_back(d);
      if (!d.reasons) r.warnings.push_back(d.decision_id + ": no reasons section found");
      if (d.citations.empty()) r.warnings.push_back(d.decision_id + ": cites no registered provision");
    }
    io::write_file_atomic(out / "decisions.jsonl", io::to_jsonl(rows));
    info("ingest: " + std::to_string(corpus.size()) + " decisions");
    finish(r, out, {{"decisions", corpus.size()}});
    return r;
  }

  StageReport chunk() {
    auto r = begin(Stage::chunk);
    if (r.skipped) return r;
    const auto decisions = load_decisions();
    const auto out = staging(Stage::chunk);
    std::vector<nlohmann::json> rows;
    for (const auto& d : decisions) {
      for (const auto& c : chunk_decision(d, config_.min_chunk_chars)) rows.push_back(c);
    }
    io::write_file_atomic(out / "chunks.jsonl", io::to_jsonl(rows));
    info("chunk: " + std::to_string(rows.size()) + " chunks");
    finish(r, out, {{"chunks", rows.size()}});
    return r;
  }

  StageReport stats() {
    auto r = begin(Stage::stats);
    if (r.skipped) return r;
    const auto decisions = load_decisions();
    const auto chunks = load_chunks();
    const auto st = corpus_stats(decisions, chunks);
    const auto out = staging(Stage::stats);
    io::write_json(out / "stats.json", stats_to_json(st));
    io::write_file_atomic(out / "stats.tsv", render_stats_table(st));
    io::write_file_atomic(out / "summary.txt", render_stats_summary(st));
    finish(r, out);
    return r;
  }

  /// Digest of the chunks one provision's records are built from.
  std::string provision_input(const ProvisionRef& p, const std::vector<Chunk>& chunks) const {
    Hasher h;
    h.field(p.key()).field(enrich_settings());
    for (const auto& c : chunks) {
      if (cites(c.citations, p)) h.field(nlohmann::json(c).dump());
    }
    return h.hex();
  }

  StageReport enrich() {
    auto r = begin(Stage::enrich);
    if (r.skipped) return r;
    const auto chunks = load_chunks();
    nlohmann::json previous = nlohmann::json::object();
    if (fs::exists(manifest_path(Stage::enrich))) {
      previous = io::read_json(manifest_path(Stage::enrich)).at("details").value("provisions", nlohmann::json::object());
    }
    const auto out = staging(Stage::enrich);
    nlohmann::json digests = nlohmann::json::object();
    std::vector<ProvisionRef> todo;
    for (const auto& p : config_.provisions) {
      const auto d = provision_input(p, chunks);
      digests[p.key()] = d;
      const auto existing = dir(Stage::enrich) / (p.key() + ".jsonl");
      if (previous.value(p.key(), "") == d && fs::exists(existing)) {
        fs::copy_file(existing, out / existing.filename());
        r.reused.push_back(p.key());
      } else {
        todo.push_back(p);
      }
    }
    RecordStore store(out);
    EnrichOptions opt;
    opt.summarizer = config_.summarizer;
    opt.embedder = config_.embedder;
    opt.seed = config_.seed;
    opt.workers = config_.workers;
    for (const auto& p : todo) {
      auto res = enrich_provision(llm(), opt, p, chunks, registry());
      store.append(p, res.records);
      for (auto& w : res.warnings) r.warnings.push_back(p.render() + ": " + w);
      info("enrich: " + p.render() + ": " + std::to_string(res.records.size()) + " records, " +
           std::to_string(res.relevant_count()) + " relevant");
      r.processed.push_back(p.key());
    }
    finish(r, out, {{"provisions", digests}});
    return r;
  }

  StageReport cluster() {
    auto r = begin(Stage::cluster);
    if (r.skipped) return r;
    const RecordStore records(dir(Stage::enrich));
    const auto out = staging(Stage::cluster);
    const auto& ps = config_.provisions;
    std::vector<std::vector<Record>> inputs(ps.size());
    std::vector<bool> reuse(ps.size(), false);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      inputs[i] = records.load(ps[i]);
      const auto existing = dir(Stage::cluster) / (ps[i].key() + ".json");
      if (!fs::exists(existing)) continue;
      std::vector<const Record*> clusterable;
      for (const auto& rec : inputs[i]) {
        if (rec.clusterable()) clusterable.push_back(&rec);
      }
      const auto prev = io::read_json(existing);
      reuse[i] = prev.at("input_digest") == records_digest(clusterable) &&
                 prev.at("params") == nlohmann::json(config_.cluster);
    }
    std::vector<std::vector<std::string>> warnings(ps.size());
    parallel_for(ps.size(), config_.workers, [&](std::size_t i) {
      const auto target = out / (ps[i].key() + ".json");
      if (reuse[i]) {
        fs::copy_file(dir(Stage::cluster) / target.filename(), target);
        return;
      }
      auto result = run_clustering(ps[i], inputs[i], config_.cluster);
      warnings[i] = result.warnings;
      io::write_json(target, result);
    });
    for (std::size_t i = 0; i < ps.size(); ++i) {
      (reuse[i] ? r.reused : r.processed).push_back(ps[i].key());
      for (auto& w : warnings[i]) r.warnings.push_back(std::move(w));
    }
    info("cluster: processed " + std::to_string(r.processed.size()) + ", reused " + std::to_string(r.reused.size()));
    finish(r, out);
    return r;
  }

  StageReport generate() {
    auto r = begin(Stage::generate);
    if (r.skipped) return r;
    const RecordStore records(dir(Stage::enrich));
    const auto lookup = [&](std::string_view id) { return records.find(id); };
    const auto out = staging(Stage::generate);
    nlohmann::json failures = nlohmann::json::array();
    nlohmann::json dropped = nlohmann::json::array();
    auto l = llm();
    for (const auto& p : config_.provisions) {
      const auto clustering = load_clustering(p);
      const auto pdir = out / p.key();
      fs::create_directories(pdir);
      const auto& cs = clustering.clusters;
      std::vector<std::optional<SectionDraft>> slots(cs.size());
      std::vector<std::string> errors(cs.size());
      parallel_for(cs.size(), config_.workers, [&](std::size_t i) {
        std::vector<std::string> keywords;
        for (const auto& id : cs[i].headlines) keywords.push_back(records.find(id)->keyword);
        const auto headline = generate_headline(l, config_.drafting_model(), keywords, p, registry());
        std::vector<MemberSummary> members;
        for (const auto& id : cs[i].members) members.push_back({id, records.find(id)->summary});
        try {
          slots[i] = generate_section(l, config_.drafting_model(), cs[i].index, headline, members, p, registry());
        } catch (const FabricationError& e) {
          errors[i] = e.what();
        }
      });
      std::vector<SectionDraft> drafts;
      for (std::size_t i = 0; i < cs.size(); ++i) {
        if (slots[i]) {
          drafts.push_back(std::move(*slots[i]));
        } else {
          r.warnings.push_back(p.render() + ": section " + std::to_string(i + 1) + " dropped: " + errors[i]);
          dropped.push_back({{"provision", p.key()}, {"cluster_index", i}, {"error", errors[i]}});
        }
      }
      io::write_json(pdir / "drafts.json", drafts);
      if (drafts.empty()) {
        r.warnings.push_back(p.render() + ": no section drafts; no commentary generated");
        continue;
      }
      for (const auto& model : config_.generators) {
        Commentary c;
        try {
          c = merge_commentary(l, model, drafts, registry().at(p), config_.language);
        } catch (const FabricationError& e) {
          failures.push_back({{"provision", p.key()}, {"model", model}, {"token", e.token()}, {"error", e.what()}});
          r.warnings.push_back(e.what());
          continue;
        }
        const auto report = verify_citations(c.text, lookup);
        io::write_json(pdir / (model.key() + ".json"), c);
        io::write_json(pdir / (model.key() + ".citations.json"), report);
        io::write_file_atomic(pdir / (model.key() + ".md"), "# " + p.render() + " (" + model.str() + ")\n\n" +
                                                                render_human(c.text, lookup) + "\n");
        if (report.unresolvable() > 0) {
          r.warnings.push_back(p.render() + " / " + model.str() + ": " + std::to_string(report.unresolvable()) +
                               " unresolvable citations");
        }
      }
      r.processed.push_back(p.key());
      info("generate: " + p.render() + ": " + std::to_string(drafts.size()) + " sections");
    }
    const bool ok = failures.empty();
    finish(r, out, {{"fabrication_failures", failures}, {"dropped_sections", dropped}}, ok);
    if (!ok) {
      const auto& first = failures.front();
      throw FabricationError(first.at("token").get<std::string>(),
                             std::to_string(failures.size()) + " commentary merge(s) failed on fabricated citations; first: " +
                                 first.at("error").get<std::string>());
    }
    return r;
  }

  StageReport evaluate() {
    auto r = begin(Stage::evaluate);
    if (r.skipped) return r;
    struct Job {
      ProvisionRef provision;
      ModelId model;
      std::string text;
    };
    std::vector<Job> jobs;
    for (const auto& p : config_.provisions) {
      for (const auto& m : config_.generators) {
        if (auto c = load_commentary(p, m)) jobs.push_back({p, m, c->text});
      }
    }
    std::vector<std::optional<JudgeScore>> scores(jobs.size());
    std::vector<std::string> errors(jobs.size());
    auto l = llm();
    parallel_for(jobs.size(), config_.workers, [&](std::size_t i) {
      try {
        scores[i] = judge(l, config_.judge, jobs[i].model, jobs[i].text, config_.language);
      } catch (const ValidationError& e) {
        errors[i] = e.what();
      }
    });
    std::vector<ScoreEntry> entries;
    nlohmann::json llm_rows = nlohmann::json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto label = PipelineConfig::label(jobs[i].model);
      if (!scores[i]) {
        r.warnings.push_back(jobs[i].provision.render() + " / " + label + ": judge failed: " + errors[i]);
        continue;
      }
      entries.push_back({jobs[i].provision, label, *scores[i]});
      nlohmann::json row{{"provision", jobs[i].provision}, {"model", jobs[i].model}, {"judge_model", config_.judge}};
      for (auto c : kCriteria) row[std::string(criterion_key(c))] = (*scores[i])[c];
      llm_rows.push_back(row);
    }
    if (config_.human_scores) {
      auto human = import_human_scores(read_file(*config_.human_scores), config_.human_scores->filename().string());
      for (auto& w : human.warnings) r.warnings.push_back(std::move(w));
      for (auto& e : human.entries) {
        e.model = match_generator_label(e.model);
        entries.push_back(std::move(e));
      }
    }
    auto report = build_report(entries);
    for (const auto& w : report.warnings) r.warnings.push_back(w);
    const auto out = staging(Stage::evaluate);
    io::write_json(out / "judge_scores.json", llm_rows);
    io::write_json(out / "report.json", report_to_json(report));
    io::write_file_atomic(out / "report.txt", render_report_text(report));
    info("evaluate: " + std::to_string(llm_rows.size()) + " judged commentaries");
    finish(r, out);
    return r;
  }

  /// Maps an annotation-file model name onto a configured generator's label
  /// (case-insensitive on the bare name or provider/name); unknown names pass through.
  std::string match_generator_label(const std::string& name) const {
    const auto lower = text::to_lower(name);
    for (const auto& g : config_.generators) {
      if (text::to_lower(g.name) == lower || text::to_lower(g.str()) == lower) return PipelineConfig::label(g);
    }
    return name;
  }

  PipelineConfig config_;
  Log log_;
  templates::TemplateSet templates_;
  std::unique_ptr<Gateway> gateway_;
  mutable std::optional<ProvisionRegistry> registry_;
};

}  // namespace lexcomm
