// SPDX-License-Identifier: Apache-2.0
//
// Uniform access to completion and embedding services: response caching,
// bounded retries, an in-flight limiter for live services, and a deterministic
// offline backend.
#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lexcomm/digest.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/prompt.hpp"
#include "lexcomm/templates.hpp"
#include "lexcomm/text.hpp"

namespace lexcomm {

struct ModelId {
  std::string provider;
  std::string name;

  ModelId() = default;
  ModelId(std::string p, std::string n) : provider(std::move(p)), name(std::move(n)) {
    if (provider.empty() || name.empty()) throw ConfigError("model id needs a provider and a name");
  }

  /// "provider/name", or a bare name whose provider is inferred ("gemini-*" is google, else openai).
  static ModelId parse(std::string_view s) {
    const std::string str(text::trim(s));
    if (const auto slash = str.find('/'); slash != std::string::npos) {
      return {str.substr(0, slash), str.substr(slash + 1)};
    }
    if (str.empty()) throw ConfigError("empty model id");
    return {str.starts_with("gemini") ? "google" : "openai", str};
  }

  std::string str() const { return provider + "/" + name; }

  /// File-name friendly form.
  std::string key() const {
    std::string out = provider + "_" + name;
    for (char& c : out) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_')) c = '_';
    }
    return out;
  }

  friend auto operator<=>(const ModelId&, const ModelId&) = default;
  friend bool operator==(const ModelId&, const ModelId&) = default;
};

inline void to_json(nlohmann::json& j, const ModelId& m) { j = m.str(); }
inline void from_json(const nlohmann::json& j, ModelId& m) { m = ModelId::parse(j.get<std::string>()); }

/// Unset fields mean "provider default".
struct DecodingParams {
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (temperature) j["temperature"] = *temperature;
    if (top_p) j["top_p"] = *top_p;
    if (max_tokens) j["max_tokens"] = *max_tokens;
    return j;
  }
};

inline void from_json(const nlohmann::json& j, DecodingParams& p) {
  if (j.contains("temperature") && !j["temperature"].is_null()) p.temperature = j["temperature"].get<double>();
  if (j.contains("top_p") && !j["top_p"].is_null()) p.top_p = j["top_p"].get<double>();
  if (j.contains("max_tokens") && !j["max_tokens"].is_null()) p.max_tokens = j["max_tokens"].get<int>();
}

struct Embedding {
  std::vector<double> vector;
  bool normalized = false;

  std::size_t dim() const noexcept { return vector.size(); }

  double norm() const {
    double s = 0.0;
    for (double x : vector) s += x * x;
    return std::sqrt(s);
  }

  /// L2-normalized copy of v; zero vectors are rejected.
  static Embedding unit(std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("cannot normalize a zero or non-finite embedding");
    const double inv = 1.0 / std::sqrt(s);
    for (double& x : v) x *= inv;
    return {std::move(v), true};
  }
};

inline void to_json(nlohmann::json& j, const Embedding& e) {
  j = nlohmann::json{{"vector", e.vector}, {"normalized", e.normalized}};
}
inline void from_json(const nlohmann::json& j, Embedding& e) {
  e.vector = j.at("vector").get<std::vector<double>>();
  e.normalized = j.at("normalized").get<bool>();
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

struct CompletionRequest {
  std::string template_id;
  std::string prompt;
  Bindings bindings;
  ModelId model;
  DecodingParams params;
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Throws GatewayError; retriable() marks transport-level failures.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const ModelId& model) = 0;
  /// Live backends are subject to the in-flight limiter.
  virtual bool is_live() const { return false; }
};

// ---------------------------------------------------------------------------
// Offline backend
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Deterministic standard-normal vector derived from a digest (Box-Muller over splitmix64).
inline std::vector<double> gaussian_vector(const Sha256& seed, std::size_t dim) {
  std::uint64_t state = 0;
  for (int i = 0; i < 8; ++i) state |= static_cast<std::uint64_t>(seed[i]) << (8 * i);
  std::uint64_t mix = 0;
  for (int i = 8; i < 16; ++i) mix |= static_cast<std::uint64_t>(seed[i]) << (8 * (i - 8));
  state ^= mix;
  std::vector<double> v(dim);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (std::size_t i = 0; i < dim; i += 2) {
    const double u1 = (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = r * std::cos(two_pi * u2);
    if (i + 1 < dim) v[i + 1] = r * std::sin(two_pi * u2);
  }
  return v;
}

inline std::vector<double> unit_vector(const Sha256& seed, std::size_t dim) {
  return Embedding::unit(gaussian_vector(seed, dim)).vector;
}

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words{
      // English
      "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "for", "from", "had", "has", "have", "he",
      "her", "his", "if", "in", "into", "is", "it", "its", "not", "of", "on", "or", "she", "so", "that", "the",
      "their", "there", "this", "to", "was", "were", "which", "with",
      // German
      "aber", "als", "am", "an", "auch", "auf", "aus", "bei", "bis", "da", "dann", "das", "dass", "dem", "den",
      "der", "des", "die", "dies", "diese", "dieser", "dieses", "durch", "ein", "eine", "einem", "einen", "einer",
      "eines", "er", "es", "für", "gegen", "hat", "hatte", "ihm", "ihn", "ihr", "im", "in", "ist", "kann", "mit",
      "nach", "nicht", "noch", "nur", "ob", "oder", "sei", "sich", "sie", "sind", "so", "über", "um", "und", "uns",
      "unter", "vom", "von", "vor", "war", "wird", "wenn", "werden", "wie", "zu", "zum", "zur", "summary"};
  return words;
}

/// First sentence: up to the first '.', '!' or '?' that is followed by whitespace
/// and an upper-case letter, or the end of the text.
inline std::string first_sentence(std::string_view s) {
  s = text::trim(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= s.size()) break;
    if (!text::is_space(s[j])) continue;
    while (j < s.size() && text::is_space(s[j])) ++j;
    if (j < s.size()) {
      const auto n = static_cast<unsigned char>(s[j]);
      const bool upper = (n >= 'A' && n <= 'Z') ||
                         (n == 0xC3 && j + 1 < s.size() &&
                          (static_cast<unsigned char>(s[j + 1]) == 0x84 || static_cast<unsigned char>(s[j + 1]) == 0x96 ||
                           static_cast<unsigned char>(s[j + 1]) == 0x9C));
      if (upper) return std::string(s.substr(0, i + 1));
    }
  }
  return std::string(s);
}

/// The two most frequent non-stopword tokens, ties broken by ascending token.
inline std::string frequency_keyword(std::string_view summary) {
  auto body = text::trim(summary);
  if (body.starts_with("SUMMARY:")) body.remove_prefix(8);
  std::map<std::string, int> freq;
  for (const auto& w : text::words(body)) {
    auto lw = text::to_lower(w);
    if (lw.size() < 2 || stopwords().contains(lw)) continue;
    if (std::all_of(lw.begin(), lw.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    ++freq[lw];
  }
  std::vector<std::pair<std::string, int>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string out;
  for (std::size_t i = 0; i < ranked.size() && i < 2; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += ranked[i].first;
  }
  return out;
}

inline std::vector<std::string> nonempty_lines(std::string_view s) {
  std::vector<std::string> out;
  for (auto l : text::split_lines(s)) {
    l = text::trim(l);
    if (!l.empty()) out.emplace_back(l);
  }
  return out;
}

}  // namespace detail

struct MockOptions {
  std::size_t dim = 64;
  /// A chunk containing any of these markers is answered with the irrelevance sentinel.
  std::vector<std::string> irrelevant_markers{"[IRRELEVANT]"};
  /// Scale of the per-text perturbation around a "CLUSTER<k>:" direction. 0.2 keeps
  /// any two members of a group within cosine similarity 0.92.
  double cluster_spread = 0.2;
};

/// Deterministic, template-aware offline backend. Every output is a pure
/// function of (seed, request); citations in its inputs are carried over verbatim.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::uint64_t seed, MockOptions options = {}) : seed_(seed), options_(std::move(options)) {}

  std::string complete(const CompletionRequest& r) override {
    ++completions_;
    const auto& id = r.template_id;
    if (id == templates::kSummarize) return summarize(binding(r, "chunk"));
    if (id == templates::kKeyword) return detail::frequency_keyword(binding(r, "summary"));
    if (id == templates::kHeadline) return headline(binding(r, "keywords"));
    if (id == templates::kSection) return section(binding(r, "summaries"));
    if (id == templates::kMerge) return merge(binding(r, "normtext"), binding(r, "draft"));
    if (id == templates::kJudge || id == templates::kJudgeRetry) return judge(r.prompt);
    return "MOCK " + sha256_hex(r.prompt).substr(0, 16);
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const ModelId&) override {
    ++embed_calls_;
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::vector<double> embed_one(std::string_view text) const {
    const auto seed = std::to_string(seed_);
    if (auto marker = cluster_marker(text)) {
      const auto base = detail::unit_vector(Hasher{}.field("cluster").field(seed).field(*marker).finish(), options_.dim);
      auto noise = detail::unit_vector(Hasher{}.field("text").field(seed).field(text).finish(), options_.dim);
      double dot = 0.0;
      for (std::size_t i = 0; i < base.size(); ++i) dot += base[i] * noise[i];
      for (std::size_t i = 0; i < base.size(); ++i) noise[i] -= dot * base[i];
      noise = Embedding::unit(std::move(noise)).vector;
      std::vector<double> v(base.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + options_.cluster_spread * noise[i];
      return Embedding::unit(std::move(v)).vector;
    }
    return detail::unit_vector(Hasher{}.field("text").field(seed).field(text).finish(), options_.dim);
  }

  /// "CLUSTER<k>:" when text starts with such a marker token.
  static std::optional<std::string> cluster_marker(std::string_view text) {
    text = text::trim(text);
    if (!text.starts_with("CLUSTER")) return std::nullopt;
    std::size_t i = 7;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
    if (i == 7 || i >= text.size() || text[i] != ':') return std::nullopt;
    return std::string(text.substr(0, i + 1));
  }

  std::size_t completion_calls() const noexcept { return completions_; }
  std::size_t embed_calls() const noexcept { return embed_calls_; }
  std::size_t dim() const noexcept { return options_.dim; }

 private:
  static std::string binding(const CompletionRequest& r, const std::string& name) {
    auto it = r.bindings.find(name);
    return it == r.bindings.end() ? std::string{} : it->second;
  }

  std::string summarize(const std::string& chunk) const {
    for (const auto& m : options_.irrelevant_markers) {
      if (!m.empty() && chunk.find(m) != std::string::npos) return "IRRELEVANT";
    }
    return "SUMMARY: " + detail::first_sentence(chunk);
  }

  static std::string headline(const std::string& keywords) {
    std::vector<std::string> seen;
    for (const auto& k : detail::nonempty_lines(keywords)) {
      if (std::find(seen.begin(), seen.end(), k) == seen.end()) seen.push_back(k);
    }
    std::string out;
    for (const auto& k : seen) {
      if (!out.empty()) out += "; ";
      out += k;
    }
    return out;
  }

  // Each input line "ObjectId('<id>'): <summary>" becomes "<summary> (ObjectId('<id>'))".
  static std::string section(const std::string& summaries) {
    std::string out;
    for (const auto& line : detail::nonempty_lines(summaries)) {
      std::string sentence = line;
      if (line.starts_with("ObjectId('")) {
        const auto close = line.find("')");
        if (close != std::string::npos) {
          const auto ref = line.substr(0, close + 2);
          auto rest = std::string(text::trim(std::string_view(line).substr(close + 2)));
          if (rest.starts_with(":")) rest = std::string(text::trim(std::string_view(rest).substr(1)));
          sentence = rest + " (" + ref + ")";
        }
      }
      if (!out.empty()) out.push_back(' ');
      out += sentence;
    }
    return out;
  }

  static std::string merge(const std::string& normtext, const std::string& draft) {
    const auto lines = detail::nonempty_lines(normtext);
    const std::string title = lines.empty() ? std::string("Kommentar") : "Kommentierung: " + lines.front();
    return title + "\n\n" + draft;
  }

  static std::string judge(const std::string& prompt) {
    const auto d = Hasher{}.field("judge").field(prompt).finish();
    nlohmann::json j;
    const char* keys[] = {"Topical Relevance", "Heading-Match", "Citation-Faithfulness", "Cluster-Distinction",
                          "Logical Ordering"};
    for (int i = 0; i < 5; ++i) j[keys[i]] = 1 + d[i] % 5;
    return j.dump();
  }

  std::uint64_t seed_;
  MockOptions options_;
  std::atomic<std::size_t> completions_{0};
  std::atomic<std::size_t> embed_calls_{0};
};

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

/// Content-addressed response cache: in memory, optionally mirrored to a
/// directory as <dir>/<first two hex digits>/<key>.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<std::string> get(const std::string& key) {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    if (dir_) {
      const auto p = path(key);
      if (std::filesystem::exists(p)) {
        auto value = read_file(p);
        memory_.emplace(key, value);
        return value;
      }
    }
    return std::nullopt;
  }

  void put(const std::string& key, const std::string& value) {
    std::lock_guard lock(mutex_);
    memory_[key] = value;
    if (dir_) {
      const auto p = path(key);
      std::filesystem::create_directories(p.parent_path());
      const auto tmp = p.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary);
        out << value;
        if (!out) throw IoError("cannot write cache entry " + tmp);
      }
      std::filesystem::rename(tmp, p);
    }
  }

  void erase(const std::string& key) {
    std::lock_guard lock(mutex_);
    memory_.erase(key);
    if (dir_) std::filesystem::remove(path(key));
  }

 private:
  std::filesystem::path path(const std::string& key) const { return *dir_ / key.substr(0, 2) / key; }

  std::optional<std::filesystem::path> dir_;
  std::unordered_map<std::string, std::string> memory_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{500};
};

struct Completion {
  std::string text;
  std::string cache_key;
  bool cached = false;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache = std::make_shared<ResponseCache>(),
          RetryPolicy retry = {}, std::size_t max_in_flight = 8)
      : backend_(std::move(backend)), cache_(std::move(cache)), retry_(retry), max_in_flight_(max_in_flight) {
    if (!backend_) throw ConfigError("gateway needs a backend");
    if (max_in_flight_ == 0) max_in_flight_ = 1;
  }

  static std::string completion_key(const ModelId& model, std::string_view prompt, const DecodingParams& params) {
    return Hasher{}.field("complete").field(model.str()).field(prompt).field(params.to_json().dump()).hex();
  }

  static std::string embedding_key(const ModelId& model, std::string_view text) {
    return Hasher{}.field("embed").field(model.str()).field(text).hex();
  }

  Completion complete(const PromptTemplate& tmpl, const Bindings& bindings, const ModelId& model,
                      const DecodingParams& params = {}) {
    CompletionRequest req{tmpl.id, tmpl.render(bindings), bindings, model, params};
    const auto key = completion_key(model, req.prompt, params);
    if (auto hit = cache_->get(key)) return {*hit, key, true};
    auto text = with_retries([&] { return backend_->complete(req); });
    ++completion_calls_;
    cache_->put(key, text);
    return {std::move(text), key, false};
  }

  /// Drops a cached response, e.g. one that failed validation, so the next call re-invokes the backend.
  void evict(const std::string& key) { cache_->erase(key); }

  std::vector<Embedding> embed(const std::vector<std::string>& texts, const ModelId& model) {
    if (texts.empty()) throw ValidationError("embed: no texts");
    for (const auto& t : texts) {
      if (t.empty()) throw ValidationError("embed: empty text");
    }
    std::vector<std::optional<Embedding>> out(texts.size());
    std::vector<std::string> missing;
    std::map<std::string, std::vector<std::size_t>> positions;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (auto hit = cache_->get(embedding_key(model, texts[i]))) {
        out[i] = Embedding{nlohmann::json::parse(*hit).get<std::vector<double>>(), true};
      } else {
        if (!positions.contains(texts[i])) missing.push_back(texts[i]);
        positions[texts[i]].push_back(i);
      }
    }
    if (!missing.empty()) {
      auto vectors = with_retries([&] { return backend_->embed(missing, model); });
      ++embed_calls_;
      if (vectors.size() != missing.size()) throw GatewayError(false, "embedding backend returned wrong batch size");
      for (std::size_t m = 0; m < missing.size(); ++m) {
        auto e = Embedding::unit(std::move(vectors[m]));
        cache_->put(embedding_key(model, missing[m]), nlohmann::json(e.vector).dump());
        for (auto i : positions[missing[m]]) out[i] = e;
      }
    }
    std::vector<Embedding> result;
    result.reserve(out.size());
    for (auto& e : out) result.push_back(std::move(*e));
    const auto dim = result.front().dim();
    for (const auto& e : result) {
      if (e.dim() != dim) throw GatewayError(false, "embedding dimensions differ within one batch");
    }
    return result;
  }

  /// Backend invocations that were not served from the cache.
  std::size_t completion_calls() const noexcept { return completion_calls_; }
  std::size_t embed_calls() const noexcept { return embed_calls_; }
  Backend& backend() noexcept { return *backend_; }

 private:
  template <typename F>
  auto with_retries(F&& call) -> decltype(call()) {
    for (int attempt = 1;; ++attempt) {
      try {
        Slot slot(*this);
        return call();
      } catch (const GatewayError& e) {
        if (!e.retriable()) throw;
        if (attempt >= retry_.attempts) {
          throw GatewayError(true, "giving up after " + std::to_string(attempt) + " attempts: " + e.what());
        }
        std::this_thread::sleep_for(retry_.base_delay * (1 << (attempt - 1)));
      }
    }
  }

  // Holds one in-flight slot while a live backend is called.
  class Slot {
   public:
    explicit Slot(Gateway& g) : g_(g), active_(g.backend_->is_live()) {
      if (!active_) return;
      std::unique_lock lock(g_.limiter_mutex_);
      g_.limiter_cv_.wait(lock, [&] { return g_.in_flight_ < g_.max_in_flight_; });
      ++g_.in_flight_;
    }
    ~Slot() {
      if (!active_) return;
      {
        std::lock_guard lock(g_.limiter_mutex_);
        --g_.in_flight_;
      }
      g_.limiter_cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    Gateway& g_;
    bool active_;
  };

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  RetryPolicy retry_;
  std::size_t max_in_flight_;
  std::size_t in_flight_ = 0;
  std::mutex limiter_mutex_;
  std::condition_variable limiter_cv_;
  std::atomic<std::size_t> completion_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
};

}  // namespace lexcomm

namespace lexcomm {

/// What the pipeline stages need to talk to a model.
struct Llm {
  Gateway& gateway;
  const templates::TemplateSet& templates;
  DecodingParams params{};
};

}  // namespace lexcomm
