// SPDX-License-Identifier: Apache-2.0
//
// The `lexcomm` command line: one subcommand per stage plus `run`.
#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lexcomm/error.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/live_backend.hpp"
#include "lexcomm/pipeline.hpp"

namespace lexcomm {

/// Builds the backend named by the config. A live backend needs credentials
/// for every provider the config refers to.
inline std::shared_ptr<Backend> make_backend(const PipelineConfig& c) {
  if (c.backend == "mock") return std::make_shared<MockBackend>(c.seed);
  std::set<std::string> providers{c.summarizer.provider, c.drafting_model().provider, c.embedder.provider,
                                  c.judge.provider};
  for (const auto& g : c.generators) providers.insert(g.provider);
  LiveOptions opt;
  opt.require(providers);
  return std::make_shared<LiveBackend>(std::move(opt));
}

using BackendFactory = std::function<std::shared_ptr<Backend>(const PipelineConfig&)>;

struct CliOptions {
  std::string config_file;
  std::optional<std::string> backend;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> provisions;
  std::optional<std::string> store_dir;
  std::optional<std::string> cache_dir;
  std::optional<std::string> corpus_dir;
  std::optional<std::size_t> min_cluster_size;
  bool quiet = false;
};

inline PipelineConfig resolve_config(const CliOptions& o) {
  PipelineConfig c = o.config_file.empty() ? PipelineConfig{} : PipelineConfig::load(o.config_file);
  if (o.backend) c.backend = *o.backend;
  if (o.seed) c.seed = *o.seed;
  if (!o.provisions.empty()) {
    c.provisions.clear();
    for (const auto& p : o.provisions) {
      try {
        c.provisions.push_back(ProvisionRef::parse(p));
      } catch (const ValidationError& e) {
        throw ConfigError(std::string("--provision: ") + e.what());
      }
    }
  }
  if (o.store_dir) c.store_dir = *o.store_dir;
  if (o.cache_dir) c.cache_dir = *o.cache_dir;
  if (o.corpus_dir) c.corpus_dir = *o.corpus_dir;
  if (o.min_cluster_size) c.cluster.min_cluster_size = *o.min_cluster_size;
  c.validate();
  return c;
}

inline void print_report(std::ostream& out, const StageReport& r) {
  out << stage_name(r.stage) << ": ";
  if (r.skipped) {
    out << "up to date\n";
    return;
  }
  out << "done";
  if (!r.processed.empty() || !r.reused.empty()) {
    out << " (processed " << r.processed.size() << ", reused " << r.reused.size() << ")";
  }
  if (!r.warnings.empty()) out << ", " << r.warnings.size() << " warning(s)";
  out << "\n";
}

/// Entry point shared by the executable and the tests. Returns the process exit code.
inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                   const BackendFactory& factory = make_backend) {
  CLI::App app{"Commentary drafts for statutory provisions from court decisions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  CliOptions o;
  app.add_option("--config", o.config_file, "JSON config file; relative paths in it are resolved against its directory");
  app.add_option("--backend", o.backend, "mock or live")->check(CLI::IsMember({"mock", "live"}));
  app.add_option("--seed", o.seed, "seed for the offline backend and record ids");
  app.add_option("--provision", o.provisions, "restrict to this provision, e.g. \"§ 823 BGB\" or BGB-823 (repeatable)");
  app.add_option("--store-dir", o.store_dir, "output store directory");
  app.add_option("--cache-dir", o.cache_dir, "response cache directory");
  app.add_option("--corpus-dir", o.corpus_dir, "directory of decision documents");
  app.add_option("--min-cluster-size", o.min_cluster_size, "smallest accepted cluster");
  app.add_flag("-q,--quiet", o.quiet, "only print errors");

  std::vector<Stage> stages;
  std::string command;
  for (auto s : kStageOrder) {
    auto* sub = app.add_subcommand(stage_name(s), "run the " + stage_name(s) + " stage");
    sub->callback([&stages, &command, s] {
      stages = {s};
      command = stage_name(s);
    });
  }
  app.add_subcommand("run", "run all stages in order")->callback([&] {
    stages.assign(kStageOrder.begin(), kStageOrder.end());
    command = "run";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    const auto config = resolve_config(o);
    Log log;
    if (!o.quiet) log = [&err](const std::string& m) { err << m << "\n"; };
    Pipeline pipeline(config, factory(config), log);
    const auto started = Pipeline::now_iso();
    std::vector<StageReport> reports;
    try {
      // A fabrication failure in generate still lets evaluate score the
      // commentaries that were written; the failure is reported afterwards.
      std::exception_ptr deferred;
      for (auto s : stages) {
        try {
          reports.push_back(pipeline.run_stage(s));
        } catch (const FabricationError&) {
          if (s != Stage::generate || stages.size() == 1) throw;
          deferred = std::current_exception();
        }
      }
      if (deferred) std::rethrow_exception(deferred);
    } catch (...) {
      pipeline.write_run_manifest(command, reports, started);
      throw;
    }
    pipeline.write_run_manifest(command, reports, started);
    if (!o.quiet) {
      for (const auto& r : reports) print_report(out, r);
    }
    return 0;
  } catch (const StageDependencyError& e) {
    err << "error: " << e.what() << "\n";
    err << "hint: run `lexcomm " << e.stage() << "` first\n";
    return exit_code(e.kind());
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::io);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lexcomm
