// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lexcomm/corpus.hpp"
#include "lexcomm/digest.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/io.hpp"
#include "lexcomm/provision.hpp"

namespace lexcomm {

/// True for exactly 24 lower-case hex digits.
inline bool is_record_id(std::string_view s) noexcept { return s.size() == 24 && text::is_lower_hex(s); }

/// The citation surface form used in generated text.
inline std::string object_id(std::string_view record_id) { return "ObjectId('" + std::string(record_id) + "')"; }

/// 12 bytes (24 hex digits) derived from the seed and the (provision, chunk) pair,
/// so a re-run reproduces the same ids.
inline std::string make_record_id(std::uint64_t seed, const ProvisionRef& provision, const ChunkId& chunk) {
  return Hasher{}
      .field("record")
      .field(std::to_string(seed))
      .field(provision.key())
      .field(chunk.decision_id)
      .field(std::to_string(chunk.ordinal))
      .hex()
      .substr(0, 24);
}

/// The clustering unit <keyword, summary, embedding> for one chunk under one provision.
struct Record {
  std::string record_id;
  ProvisionRef provision;
  ChunkId chunk_id;
  std::size_t paragraph = 0;
  std::string summary;
  std::string keyword;
  std::optional<Embedding> embedding;
  bool relevant = false;

  /// Ready to enter clustering.
  bool clusterable() const { return relevant && !keyword.empty() && embedding && embedding->normalized; }
};

inline void to_json(nlohmann::json& j, const Record& r) {
  j = nlohmann::json{{"record_id", r.record_id}, {"provision", r.provision}, {"chunk_id", r.chunk_id},
                     {"paragraph", r.paragraph}, {"summary", r.summary},     {"keyword", r.keyword},
                     {"relevant", r.relevant}};
  j["embedding"] = r.embedding ? nlohmann::json(*r.embedding) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, Record& r) {
  r.record_id = j.at("record_id").get<std::string>();
  if (!is_record_id(r.record_id)) throw ValidationError("malformed record_id '" + r.record_id + "'");
  r.provision = j.at("provision").get<ProvisionRef>();
  r.chunk_id = j.at("chunk_id").get<ChunkId>();
  r.paragraph = j.value("paragraph", std::size_t{0});
  r.summary = j.at("summary").get<std::string>();
  r.keyword = j.at("keyword").get<std::string>();
  r.relevant = j.at("relevant").get<bool>();
  r.embedding.reset();
  if (j.contains("embedding") && !j.at("embedding").is_null()) r.embedding = j.at("embedding").get<Embedding>();
}

/// Append-only record files, one JSON line per record, one file per provision:
/// <dir>/<provision key>.jsonl. Record ids are unique across the whole store.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::exists(dir_)) return;
    for (const auto& e : std::filesystem::directory_iterator(dir_)) {
      if (e.path().extension() != ".jsonl") continue;
      for (auto& r : read(e.path())) index(std::move(r));
    }
  }

  std::filesystem::path file(const ProvisionRef& p) const { return dir_ / (p.key() + ".jsonl"); }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::vector<Record> load(const ProvisionRef& p) const {
    const auto f = file(p);
    if (!std::filesystem::exists(f)) return {};
    return read(f);
  }

  /// Appends records to the provision's file; duplicate ids are rejected before anything is written.
  void append(const ProvisionRef& p, const std::vector<Record>& records) {
    std::set<std::string> batch;
    for (const auto& r : records) {
      if (!is_record_id(r.record_id)) throw ValidationError("malformed record_id '" + r.record_id + "'");
      if (by_id_.contains(r.record_id) || !batch.insert(r.record_id).second) {
        throw ValidationError("duplicate record_id " + r.record_id);
      }
      if (r.provision != p) throw ValidationError("record " + r.record_id + " belongs to " + r.provision.render());
    }
    std::string content;
    if (std::filesystem::exists(file(p))) content = read_file(file(p));
    for (const auto& r : records) content += nlohmann::json(r).dump() + "\n";
    io::write_file_atomic(file(p), content);
    for (const auto& r : records) index(r);
  }

  const Record* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return by_id_.size(); }

 private:
  static std::vector<Record> read(const std::filesystem::path& f) {
    std::vector<Record> out;
    for (const auto& row : io::read_jsonl(f)) {
      try {
        out.push_back(row.get<Record>());
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(f.string() + ": " + e.what());
      }
    }
    return out;
  }

  void index(Record r) {
    auto id = r.record_id;
    if (!by_id_.emplace(id, std::move(r)).second) throw ValidationError("duplicate record_id " + id + " in store");
  }

  std::filesystem::path dir_;
  std::unordered_map<std::string, Record> by_id_;
};

}  // namespace lexcomm
