// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "lexcomm/cli.hpp"
#include "support.hpp"

using namespace lexcomm;
using lexcomm::test::ScratchDir;
using lexcomm::test::ScriptedBackend;

namespace {

namespace fs = std::filesystem;

const std::string kFabricated = "ObjectId('ffffffffffffffffffffffff')";

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args, const BackendFactory& factory = make_backend) {
  args.insert(args.begin(), "lexcomm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, factory);
  return {code, out.str(), err.str()};
}

std::string config_file() { return (test::fixtures() / "config.json").string(); }

CliResult run_fixture(const fs::path& store, const std::string& command = "run",
                      const BackendFactory& factory = make_backend) {
  return cli({"--config", config_file(), "--store-dir", store.string(), "-q", command}, factory);
}

/// Relative path -> content for every file under root except the run manifest.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (rel == "run_manifest.json") continue;
    out[rel] = read_file(e.path());
  }
  return out;
}

PipelineConfig fixture_config(const fs::path& store) {
  auto c = PipelineConfig::load(config_file());
  c.store_dir = store;
  return c;
}

/// Offline backend whose merge output for `model_name` gains a fabricated citation.
BackendFactory fabricating_factory(std::string model_name) {
  return [model_name](const PipelineConfig& c) -> std::shared_ptr<Backend> {
    auto mock = std::make_shared<MockBackend>(c.seed);
    return std::make_shared<ScriptedBackend>(
        c.seed, [mock, model_name](const CompletionRequest& r, int) -> std::optional<std::string> {
          if (r.template_id != templates::kMerge || r.model.name != model_name) return std::nullopt;
          return mock->complete(r) + "\n\nSiehe auch " + kFabricated + ".";
        });
  };
}

}  // namespace

TEST(Cli, FullRunOnFixturesHasOnlyResolvableCitations) {
  ScratchDir store("run");
  const auto r = run_fixture(store.path());
  ASSERT_EQ(r.code, 0) << r.err;

  const RecordStore records(store / "records");
  std::size_t commentaries = 0;
  for (const auto& p : default_provisions()) {
    const auto clustering = io::read_json(store / "clusters" / (p.key() + ".json")).get<ClusteringResult>();
    ASSERT_FALSE(clustering.clusters.empty()) << p.render();
    std::set<std::string> members;
    for (const auto& c : clustering.clusters) {
      EXPECT_GE(c.members.size(), 3u);
      members.insert(c.members.begin(), c.members.end());
    }
    std::set<std::string> drafted;
    for (const auto& d : io::read_json(store / "commentaries" / p.key() / "drafts.json")) {
      for (const auto& id : d.at("cited")) drafted.insert(id.get<std::string>());
    }
    EXPECT_TRUE(std::includes(members.begin(), members.end(), drafted.begin(), drafted.end()));
    for (const auto& m : default_generators()) {
      const auto dir = store / "commentaries" / p.key();
      const auto c = io::read_json(dir / (m.key() + ".json")).get<Commentary>();
      EXPECT_TRUE(std::includes(drafted.begin(), drafted.end(), c.cited.begin(), c.cited.end()));
      const auto report = verify_citations(c.text, records);
      EXPECT_GT(report.entries.size(), 0u);
      EXPECT_EQ(report.unresolvable(), 0u) << p.render() << " " << m.str();
      EXPECT_EQ(io::read_json(dir / (m.key() + ".citations.json"))["unresolvable"], 0);
      EXPECT_EQ(read_file(dir / (m.key() + ".md")).find("ObjectId("), std::string::npos);
      ++commentaries;
    }
  }
  EXPECT_EQ(commentaries, 16u);
  EXPECT_TRUE(fs::exists(store / "evaluation" / "report.txt"));
  EXPECT_TRUE(fs::exists(store / "stats" / "summary.txt"));
  EXPECT_EQ(io::read_json(store / "evaluation" / "judge_scores.json").size(), 16u);

  const auto manifest = io::read_json(store / "run_manifest.json");
  EXPECT_EQ(manifest["command"], "run");
  EXPECT_EQ(manifest["stages"].size(), 7u);
  EXPECT_TRUE(manifest["templates"].contains("merge_commentary.de.v1.txt"));
  EXPECT_EQ(manifest["config"]["seed"], 42);
}

TEST(Cli, SecondRunSkipsEveryStage) {
  ScratchDir store("rerun");
  ASSERT_EQ(run_fixture(store.path()).code, 0);
  const auto before = tree(store.path());
  const auto r = cli({"--config", config_file(), "--store-dir", store.path().string(), "run"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (auto s : kStageOrder) EXPECT_NE(r.out.find(stage_name(s) + ": up to date"), std::string::npos) << r.out;
  EXPECT_EQ(tree(store.path()), before);
}

TEST(Cli, RunsAreByteIdentical) {
  ScratchDir a("det-a");
  ScratchDir b("det-b");
  ASSERT_EQ(run_fixture(a.path()).code, 0);
  ASSERT_EQ(run_fixture(b.path()).code, 0);
  const auto ta = tree(a.path());
  EXPECT_EQ(ta, tree(b.path()));
  EXPECT_GT(ta.size(), 60u);

  // Worker count does not leak into outputs.
  ScratchDir c("det-c");
  auto config = fixture_config(c.path());
  config.workers = 1;
  Pipeline p(config, std::make_shared<MockBackend>(config.seed));
  p.run();
  EXPECT_EQ(tree(c.path()), ta);
}

TEST(Cli, FabricatedMergeCitationFailsTheRunAfterEvaluation) {
  ScratchDir store("fab");
  const auto r = run_fixture(store.path(), "run", fabricating_factory("o3"));
  EXPECT_EQ(r.code, 5) << r.err;
  EXPECT_NE(r.err.find("ffffffffffffffffffffffff"), std::string::npos) << r.err;
  const auto dir = store / "commentaries" / "BGB-823";
  EXPECT_FALSE(fs::exists(dir / "openai_o3.json"));
  EXPECT_TRUE(fs::exists(dir / "openai_gpt-4o.json"));
  // The other models' commentaries were still judged.
  EXPECT_EQ(io::read_json(store / "evaluation" / "judge_scores.json").size(), 12u);
  const auto manifest = io::read_json(store / "manifests" / "generate.json");
  EXPECT_EQ(manifest["complete"], false);
  EXPECT_EQ(manifest["details"]["fabrication_failures"].size(), 4u);
  EXPECT_TRUE(fs::exists(store / "run_manifest.json"));

  // A clean backend afterwards regenerates rather than trusting the incomplete stage.
  const auto again = run_fixture(store.path());
  EXPECT_EQ(again.code, 0) << again.err;
  EXPECT_TRUE(fs::exists(dir / "openai_o3.json"));
}

TEST(Cli, GenerateAloneReportsFabrication) {
  ScratchDir store("fab-gen");
  for (const auto* s : {"ingest", "chunk", "enrich", "cluster"}) ASSERT_EQ(run_fixture(store.path(), s).code, 0);
  EXPECT_EQ(run_fixture(store.path(), "generate", fabricating_factory("gpt-4.1")).code, 5);
}

TEST(Cli, MissingPredecessorIsAStageDependencyError) {
  ScratchDir store("dep");
  const auto r = run_fixture(store.path(), "cluster");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("'ingest'"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("lexcomm ingest"), std::string::npos) << r.err;

  ASSERT_EQ(run_fixture(store.path(), "ingest").code, 0);
  const auto r2 = run_fixture(store.path(), "enrich");
  EXPECT_EQ(r2.code, 3);
  EXPECT_NE(r2.err.find("'chunk'"), std::string::npos) << r2.err;
}

TEST(Cli, StalePredecessorIsReported) {
  ScratchDir store("stale");
  ASSERT_EQ(run_fixture(store.path()).code, 0);
  // Change a record after clustering: generate must refuse the stale clusters.
  const auto file = store / "records" / "BGB-812.jsonl";
  auto rows = io::read_jsonl(file);
  rows[0]["keyword"] = "geänderte kondiktion";
  io::write_file_atomic(file, io::to_jsonl(rows));
  const auto r = run_fixture(store.path(), "generate");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("'cluster'"), std::string::npos) << r.err;
}

TEST(Cli, EditingOneRecordReclustersOnlyItsProvision) {
  ScratchDir store("incr");
  ASSERT_EQ(run_fixture(store.path()).code, 0);
  const auto file = store / "records" / "BGB-812.jsonl";
  auto rows = io::read_jsonl(file);
  rows[0]["keyword"] = "geänderte kondiktion";
  io::write_file_atomic(file, io::to_jsonl(rows));
  const auto before = tree(store.path());

  Pipeline p(fixture_config(store.path()), std::make_shared<MockBackend>(42));
  const auto r = p.run_stage(Stage::cluster);
  EXPECT_FALSE(r.skipped);
  EXPECT_EQ(r.processed, (std::vector<std::string>{"BGB-812"}));
  EXPECT_EQ(r.reused, (std::vector<std::string>{"BGB-242", "BGB-280", "BGB-823"}));
  const auto after = tree(store.path());
  for (const auto* key : {"BGB-242", "BGB-280", "BGB-823"}) {
    const auto rel = std::string("clusters/") + key + ".json";
    EXPECT_EQ(after.at(rel), before.at(rel));
  }
  EXPECT_TRUE(p.run_stage(Stage::cluster).skipped);
}

TEST(Cli, ProvisionFilterRestrictsTheRun) {
  ScratchDir store("filter");
  const auto r = cli({"--config", config_file(), "--store-dir", store.path().string(), "-q", "--provision", "BGB-812",
                      "run"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(store / "clusters" / "BGB-812.json"));
  EXPECT_FALSE(fs::exists(store / "clusters" / "BGB-823.json"));
  EXPECT_EQ(io::read_json(store / "evaluation" / "judge_scores.json").size(), 4u);
}

TEST(Cli, JudgeThatAlsoGeneratesIsAConfigError) {
  ScratchDir dir("judge-cfg");
  auto j = nlohmann::json::parse(read_file(config_file()));
  j["corpus_dir"] = (test::fixtures() / "corpus").string();
  j["registry"] = (test::fixtures() / "provisions.json").string();
  j.erase("human_scores");
  j["judge_model"] = "openai/gpt-4.1";
  io::write_json(dir / "config.json", j);
  const auto r = cli({"--config", (dir / "config.json").string(), "--store-dir", (dir / "store").string(), "evaluate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("judge model openai/gpt-4.1"), std::string::npos) << r.err;
}

TEST(Cli, ConfigurationErrors) {
  ScratchDir dir("cfg");
  EXPECT_EQ(cli({"--config", (dir / "missing.json").string(), "run"}).code, 2);
  io::write_json(dir / "bad.json", {{"min_cluster_sise", 3}});
  const auto unknown = cli({"--config", (dir / "bad.json").string(), "run"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("min_cluster_sise"), std::string::npos);
  EXPECT_EQ(cli({"--config", config_file(), "bogus"}).code, 2);
  EXPECT_EQ(cli({"--config", config_file(), "--backend", "cloud", "run"}).code, 2);
  EXPECT_EQ(cli({"--config", config_file(), "--provision", "Art. 8 GG", "run"}).code, 2);
  io::write_json(dir / "bad_provision.json", {{"provisions", {"Art. 8 GG"}}});
  EXPECT_EQ(cli({"--config", (dir / "bad_provision.json").string(), "run"}).code, 2);
}

TEST(Cli, LiveBackendWithoutCredentialsIsAConfigError) {
  for (const auto* v : {"OPENAI_API_KEY", "GEMINI_API_KEY", "GOOGLE_API_KEY"}) ::unsetenv(v);
  ScratchDir store("live");
  const auto r = cli({"--config", config_file(), "--store-dir", store.path().string(), "--backend", "live", "ingest"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("needs credentials"), std::string::npos) << r.err;
}

TEST(Cli, VersionAndHelp) {
  const auto v = cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(kToolVersion), std::string::npos);
  EXPECT_EQ(cli({"--help"}).code, 0);
}
