// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: fixture paths, scratch directories, scripted backends.
#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "lexcomm/digest.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/provision.hpp"
#include "lexcomm/templates.hpp"

namespace lexcomm {
inline void PrintTo(const ProvisionRef& r, std::ostream* os) { *os << r.render(); }
}  // namespace lexcomm

namespace lexcomm::test {

namespace fs = std::filesystem;

inline fs::path fixtures() { return LEXCOMM_FIXTURES; }
inline fs::path prompts_dir() { return LEXCOMM_PROMPTS; }

inline const ProvisionRegistry& fixture_registry() {
  static const auto reg = ProvisionRegistry::load(fixtures() / "provisions.json");
  return reg;
}

/// A fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("lexcomm-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

/// Wraps the offline backend; `override_fn` may replace any completion.
class ScriptedBackend : public Backend {
 public:
  using Override = std::function<std::optional<std::string>(const CompletionRequest&, int call)>;

  explicit ScriptedBackend(std::uint64_t seed = 0, Override fn = {})
      : mock_(seed), override_(std::move(fn)) {}

  std::string complete(const CompletionRequest& r) override {
    std::lock_guard lock(mutex_);
    const int n = ++calls_[r.template_id];
    requests.push_back(r);
    if (override_) {
      if (auto text = override_(r, n)) return *text;
    }
    return mock_.complete(r);
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const ModelId& model) override {
    return mock_.embed(texts, model);
  }

  int calls(const std::string& template_id) const {
    std::lock_guard lock(mutex_);
    auto it = calls_.find(template_id);
    return it == calls_.end() ? 0 : it->second;
  }

  std::vector<CompletionRequest> requests;

 private:
  MockBackend mock_;
  Override override_;
  mutable std::mutex mutex_;
  std::map<std::string, int> calls_;
};

/// Gateway plus template set, bundled so a test can hand out an Llm.
struct Harness {
  explicit Harness(std::shared_ptr<Backend> b) : backend(std::move(b)), gateway(backend, std::make_shared<ResponseCache>(), {1, std::chrono::milliseconds(0)}) {}
  std::shared_ptr<Backend> backend;
  Gateway gateway;
  templates::TemplateSet templates;
  Llm llm() { return Llm{gateway, templates}; }
};

inline std::string hex_id(std::mt19937_64& rng) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(24, '0');
  for (auto& c : s) c = digits[rng() % 16];
  return s;
}

}  // namespace lexcomm::test
