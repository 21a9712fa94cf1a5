// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lexcomm/digest.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/text.hpp"

namespace lexcomm {

/// A statutory provision such as "§ 823 (1) BGB".
class ProvisionRef {
 public:
  ProvisionRef() = default;
  ProvisionRef(std::string book, int section, std::optional<int> subsection = std::nullopt)
      : book_(std::move(book)), section_(section), subsection_(subsection) {
    if (book_.empty()) throw ValidationError("provision book must not be empty");
    if (section_ < 1) throw ValidationError("provision section must be >= 1");
    if (subsection_ && *subsection_ < 1) throw ValidationError("provision subsection must be >= 1");
  }

  const std::string& book() const noexcept { return book_; }
  int section() const noexcept { return section_; }
  std::optional<int> subsection() const noexcept { return subsection_; }

  /// The same provision without its subsection.
  ProvisionRef base() const { return {book_, section_}; }

  /// True if this provision (e.g. "§ 823 BGB") covers other (e.g. "§ 823 (1) BGB").
  bool covers(const ProvisionRef& other) const {
    if (book_ != other.book_ || section_ != other.section_) return false;
    return !subsection_ || subsection_ == other.subsection_;
  }

  /// Canonical rendering: "§ 823 BGB" or "§ 823 (1) BGB".
  std::string render() const {
    std::string out = "§ " + std::to_string(section_);
    if (subsection_) out += " (" + std::to_string(*subsection_) + ")";
    return out + " " + book_;
  }

  /// Filesystem-safe key: "BGB-823" or "BGB-823-1".
  std::string key() const {
    std::string out = book_ + "-" + std::to_string(section_);
    if (subsection_) out += "-" + std::to_string(*subsection_);
    return out;
  }

  /// Accepts the canonical rendering, the key form, "823 BGB", "§823 Abs. 1 BGB"
  /// and a bare section number (book defaults to default_book).
  static ProvisionRef parse(std::string_view input, std::string_view default_book = "BGB");

  friend auto operator<=>(const ProvisionRef&, const ProvisionRef&) = default;
  friend bool operator==(const ProvisionRef&, const ProvisionRef&) = default;

 private:
  std::string book_;
  int section_ = 1;
  std::optional<int> subsection_;
};

inline ProvisionRef ProvisionRef::parse(std::string_view input, std::string_view default_book) {
  const std::string raw(text::trim(input));
  auto fail = [&]() -> ProvisionRef { throw ValidationError("cannot parse provision '" + raw + "'"); };
  // Key form: BOOK-SECTION[-SUB]
  if (const auto dash = raw.find('-'); dash != std::string::npos && raw.find(' ') == std::string::npos) {
    const auto book = raw.substr(0, dash);
    const auto rest = raw.substr(dash + 1);
    const auto dash2 = rest.find('-');
    try {
      if (dash2 == std::string::npos) return {book, std::stoi(rest)};
      return {book, std::stoi(rest.substr(0, dash2)), std::stoi(rest.substr(dash2 + 1))};
    } catch (const std::logic_error&) {
      return fail();
    }
  }
  std::string s = text::replace_all(raw, "§", " ");
  s = text::replace_all(s, "Abs.", " ( ");
  for (char& c : s) {
    if (c == '(' || c == ')' || c == '[' || c == ']') c = ' ';
  }
  const auto tokens = text::split_whitespace(s);
  std::vector<int> numbers;
  std::string book;
  for (const auto& t : tokens) {
    if (std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      if (t.size() > 6) return fail();
      numbers.push_back(std::stoi(t));
    } else if (book.empty() && std::isalpha(static_cast<unsigned char>(t[0]))) {
      book = t;
    } else {
      return fail();
    }
  }
  if (numbers.empty() || numbers.size() > 2) return fail();
  if (book.empty()) book = std::string(default_book);
  if (numbers.size() == 1) return {book, numbers[0]};
  return {book, numbers[0], numbers[1]};
}

inline void to_json(nlohmann::json& j, const ProvisionRef& p) {
  j = nlohmann::json{{"book", p.book()}, {"section", p.section()}};
  if (p.subsection()) j["subsection"] = *p.subsection();
}

inline void from_json(const nlohmann::json& j, ProvisionRef& p) {
  std::optional<int> sub;
  if (j.contains("subsection") && !j.at("subsection").is_null()) sub = j.at("subsection").get<int>();
  p = ProvisionRef(j.at("book").get<std::string>(), j.at("section").get<int>(), sub);
}

struct ProvisionText {
  ProvisionRef ref;
  std::string heading;
  std::string body;
};

/// The statutory texts known to the pipeline. Lookups by a subsection reference
/// fall back to the section's entry.
class ProvisionRegistry {
 public:
  ProvisionRegistry() = default;

  explicit ProvisionRegistry(std::vector<ProvisionText> entries) {
    for (auto& e : entries) add(std::move(e));
  }

  void add(ProvisionText entry) {
    if (text::trim(entry.body).empty()) {
      throw ValidationError("provision " + entry.ref.render() + " has an empty body");
    }
    const auto ref = entry.ref;
    if (!entries_.emplace(ref, std::move(entry)).second) {
      throw ValidationError("duplicate registry entry for " + ref.render());
    }
    books_.insert(ref.book());
  }

  const ProvisionText* find(const ProvisionRef& ref) const {
    if (auto it = entries_.find(ref); it != entries_.end()) return &it->second;
    if (ref.subsection()) {
      if (auto it = entries_.find(ref.base()); it != entries_.end()) return &it->second;
    }
    return nullptr;
  }

  const ProvisionText& at(const ProvisionRef& ref) const {
    if (const auto* p = find(ref)) return *p;
    throw ValidationError("provision " + ref.render() + " is not in the registry");
  }

  bool contains(const ProvisionRef& ref) const { return find(ref) != nullptr; }
  bool has_book(std::string_view book) const { return books_.contains(std::string(book)); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<ProvisionRef, ProvisionText>& entries() const noexcept { return entries_; }

  /// Registry file: a JSON array of {book, section, subsection?, heading, body}.
  static ProvisionRegistry load(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw ValidationError(path.string() + ": registry must be a JSON array");
    ProvisionRegistry reg;
    std::size_t index = 0;
    for (const auto& item : doc) {
      try {
        ProvisionText t;
        from_json(item, t.ref);
        t.heading = item.value("heading", "");
        t.body = item.at("body").get<std::string>();
        reg.add(std::move(t));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": entry " + std::to_string(index) + ": " + e.what());
      }
      ++index;
    }
    return reg;
  }

  std::string digest() const {
    Hasher h;
    for (const auto& [ref, t] : entries_) h.field(ref.key()).field(t.heading).field(t.body);
    return h.hex();
  }

 private:
  std::map<ProvisionRef, ProvisionText> entries_;
  std::set<std::string> books_;
};

}  // namespace lexcomm
