// SPDX-License-Identifier: Apache-2.0
//
// Decision ingestion, reasons-section extraction, statutory citation detection,
// paragraph chunking and corpus statistics.
#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lexcomm/digest.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/provision.hpp"
#include "lexcomm/text.hpp"

namespace lexcomm {

// ---------------------------------------------------------------------------
// Citation grammar
// ---------------------------------------------------------------------------

namespace detail {

class CitationScanner {
 public:
  explicit CitationScanner(std::string_view s) : s_(s) {}

  struct Item {
    int section = 0;
    std::optional<int> subsection;
    bool valid = true;
  };

  struct Match {
    std::vector<Item> items;
    std::string book;
  };

  /// Parses the citation starting at the section sign at byte pos. Returns the
  /// end position through out_end regardless of success.
  std::optional<Match> parse_at(std::size_t pos, std::size_t& out_end) {
    i_ = pos + kSection.size();
    if (lit(kSection)) {
      // "§§" list form; the item loop below handles lists for both forms.
    }
    Match m;
    while (true) {
      skip_spaces();
      Item item;
      const auto sec = number();
      if (!sec) break;
      item.section = *sec;
      if (i_ < s_.size() && is_ascii_lower(s_[i_])) {
        // "§ 312b" is a different provision than § 312.
        item.valid = false;
        ++i_;
      }
      item.subsection = subsection();
      qualifiers();
      m.items.push_back(item);
      if (!separator()) break;
    }
    out_end = i_;
    if (m.items.empty()) return std::nullopt;
    skip_spaces();
    const auto b = i_;
    if (i_ < s_.size() && s_[i_] >= 'A' && s_[i_] <= 'Z') {
      while (i_ < s_.size() && is_book_char(s_[i_])) ++i_;
    }
    if (i_ == b) return std::nullopt;
    m.book = std::string(s_.substr(b, i_ - b));
    out_end = i_;
    return m;
  }

  static constexpr std::string_view kSection = "\xC2\xA7";

 private:
  static bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_book_char(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

  bool lit(std::string_view l) {
    if (s_.substr(i_, l.size()) == l) {
      i_ += l.size();
      return true;
    }
    return false;
  }

  void skip_spaces() {
    while (i_ < s_.size()) {
      if (text::is_space(s_[i_])) {
        ++i_;
      } else if (s_.substr(i_, 2) == "\xC2\xA0") {  // no-break space
        i_ += 2;
      } else {
        break;
      }
    }
  }

  std::optional<int> number() {
    const auto b = i_;
    while (i_ < s_.size() && is_digit(s_[i_]) && i_ - b < 6) ++i_;
    if (i_ == b) return std::nullopt;
    if (i_ < s_.size() && is_digit(s_[i_])) {
      i_ = b;
      return std::nullopt;
    }
    return std::stoi(std::string(s_.substr(b, i_ - b)));
  }

  std::optional<int> subsection() {
    const auto save = i_;
    skip_spaces();
    if (lit("Abs.")) {
      skip_spaces();
      if (auto n = number()) return n;
    } else if (lit("(")) {
      if (auto n = number(); n && lit(")")) return n;
    } else if (lit("[")) {
      if (auto n = number(); n && lit("]")) return n;
    }
    i_ = save;
    return std::nullopt;
  }

  // "Satz 2", "S. 1", "Nr. 3", "Alt. 1", "lit. a", "ff." and similar refinements are consumed and ignored.
  void qualifiers() {
    static constexpr std::string_view kWords[] = {"Satz", "S.", "Nr.", "Alt.", "Var.", "Halbsatz", "Hs.", "lit."};
    while (true) {
      const auto save = i_;
      skip_spaces();
      bool hit = false;
      for (auto w : kWords) {
        if (lit(w)) {
          skip_spaces();
          if (number() || (i_ < s_.size() && is_ascii_lower(s_[i_]) && (++i_, true))) {
            hit = true;
          }
          break;
        }
      }
      if (!hit) {
        i_ = save;
        skip_spaces();
        if (!(lit("ff.") || lit("f."))) i_ = save;
        return;
      }
    }
  }

  bool separator() {
    const auto save = i_;
    skip_spaces();
    bool sep = lit(",") || lit(";") || lit("/");
    if (!sep) {
      for (auto w : {std::string_view("und "), std::string_view("sowie "), std::string_view("oder ")}) {
        if (lit(w)) {
          sep = true;
          break;
        }
      }
    }
    if (sep) {
      skip_spaces();
      lit(kSection);  // "§ 280, § 812 BGB"
      skip_spaces();
      if (i_ < s_.size() && is_digit(s_[i_])) return true;
    }
    i_ = save;
    return false;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

/// All registry provisions cited in text. Handles "§ 242 BGB", lists such as
/// "§§ 280, 812 BGB", and subsections written "§ 823 Abs. 1 BGB", "§ 823 (1) BGB"
/// or "§ 31[1] BVerfGG". Citations into books or sections absent from the
/// registry are dropped.
inline std::set<ProvisionRef> detect_citations(std::string_view text, const ProvisionRegistry& registry) {
  std::set<ProvisionRef> out;
  detail::CitationScanner scanner(text);
  std::size_t pos = text.find(detail::CitationScanner::kSection);
  while (pos != std::string_view::npos) {
    std::size_t end = pos + detail::CitationScanner::kSection.size();
    if (auto m = scanner.parse_at(pos, end); m && registry.has_book(m->book)) {
      for (const auto& item : m->items) {
        if (!item.valid) continue;
        ProvisionRef ref(m->book, item.section, item.subsection);
        if (registry.contains(ref)) out.insert(ref);
      }
    }
    pos = text.find(detail::CitationScanner::kSection, std::max(end, pos + 1));
  }
  return out;
}

inline std::string render_citations(const std::set<ProvisionRef>& refs) {
  std::string out;
  for (const auto& r : refs) {
    if (!out.empty()) out += "; ";
    out += r.render();
  }
  return out;
}

/// True if any citation in refs falls under target (same section, or the same subsection when target has one).
inline bool cites(const std::set<ProvisionRef>& refs, const ProvisionRef& target) {
  return std::any_of(refs.begin(), refs.end(), [&](const ProvisionRef& r) { return target.covers(r); });
}

// ---------------------------------------------------------------------------
// Reasons section
// ---------------------------------------------------------------------------

struct SectionMarkers {
  /// Headings that open the reasons section, in priority order.
  std::vector<std::string> reasons{"Entscheidungsgründe", "Gründe"};
  /// Other top-level headings; the reasons span ends at the first of these.
  std::vector<std::string> stops{"Tenor",   "Tatbestand",          "Leitsatz",
                                 "Leitsätze", "Orientierungssatz", "Rechtsmittelbelehrung",
                                 "Rechtsbehelfsbelehrung"};
};

namespace detail {

/// If line is a heading "<marker>" or "<marker>: inline text", returns the inline text.
inline std::optional<std::string_view> heading_match(std::string_view line, std::string_view marker) {
  std::size_t b = 0;
  while (b < line.size() && (line[b] == ' ' || line[b] == '\t')) ++b;
  line.remove_prefix(b);
  if (!line.starts_with(marker)) return std::nullopt;
  auto rest = line.substr(marker.size());
  if (text::trim(rest).empty()) return std::string_view{};
  auto r = rest;
  while (!r.empty() && (r.front() == ' ' || r.front() == '\t')) r.remove_prefix(1);
  if (r.starts_with(':')) return text::trim(r.substr(1));
  return std::nullopt;
}

}  // namespace detail

/// The span after the first reasons heading (at a line start, optionally followed
/// by ':'), up to the next stop heading or the end of the document.
inline std::optional<std::string> extract_reasons(std::string_view full_text, const SectionMarkers& markers = {}) {
  const std::string normalized = text::normalize_newlines(full_text);
  const auto lines = text::split_lines(normalized);
  std::size_t start = lines.size();
  std::string first_inline;
  for (std::size_t i = 0; i < lines.size() && start == lines.size(); ++i) {
    for (const auto& m : markers.reasons) {
      if (auto inl = detail::heading_match(lines[i], m)) {
        start = i;
        first_inline = std::string(*inl);
        break;
      }
    }
  }
  if (start == lines.size()) return std::nullopt;
  std::string span = first_inline;
  for (std::size_t i = start + 1; i < lines.size(); ++i) {
    const bool stop = std::any_of(markers.stops.begin(), markers.stops.end(),
                                  [&](const std::string& m) { return detail::heading_match(lines[i], m).has_value(); });
    if (stop) break;
    span.push_back('\n');
    span.append(lines[i]);
  }
  return std::string(text::trim(span));
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

inline std::chrono::year_month_day parse_iso_date(std::string_view s) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string str(s);
  if (str.size() != 10 || std::sscanf(str.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || str[4] != '-' ||
      str[7] != '-') {
    throw ValidationError("invalid ISO-8601 date '" + str + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date '" + str + "'");
  return ymd;
}

inline std::string format_iso_date(const std::chrono::year_month_day& ymd) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

struct Decision {
  std::string decision_id;
  std::string court;
  std::chrono::year_month_day decided_on{};
  std::string full_text;
  std::optional<std::string> reasons;
  std::set<ProvisionRef> citations;
};

inline void to_json(nlohmann::json& j, const Decision& d) {
  j = nlohmann::json{{"decision_id", d.decision_id},
                     {"court", d.court},
                     {"decided_on", format_iso_date(d.decided_on)},
                     {"full_text", d.full_text},
                     {"reasons", d.reasons ? nlohmann::json(*d.reasons) : nlohmann::json(nullptr)},
                     {"citations", d.citations}};
}

inline void from_json(const nlohmann::json& j, Decision& d) {
  d.decision_id = j.at("decision_id").get<std::string>();
  d.court = j.at("court").get<std::string>();
  d.decided_on = parse_iso_date(j.at("decided_on").get<std::string>());
  d.full_text = j.at("full_text").get<std::string>();
  d.reasons.reset();
  if (j.contains("reasons") && !j.at("reasons").is_null()) d.reasons = j.at("reasons").get<std::string>();
  d.citations = j.at("citations").get<std::set<ProvisionRef>>();
}

/// Parses one document in the normalized ingestion format: a JSON object with
/// string fields decision_id, court, decided_on (YYYY-MM-DD) and full_text.
/// Errors carry the source name and, for syntax errors, the byte offset.
inline Decision ingest_decision(std::string_view raw, const ProvisionRegistry& registry,
                                const SectionMarkers& markers = {}, std::string_view source = "<input>") {
  const std::string where(source);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(where + ": malformed document at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError(where + ": document must be a JSON object");
  auto field = [&](const char* name) -> std::string {
    if (!doc.contains(name)) throw ValidationError(where + ": missing field '" + name + "'");
    if (!doc[name].is_string()) throw ValidationError(where + ": field '" + name + "' must be a string");
    return doc[name].get<std::string>();
  };
  Decision d;
  d.decision_id = std::string(text::trim(field("decision_id")));
  if (d.decision_id.empty()) throw ValidationError(where + ": field 'decision_id' is empty");
  d.court = field("court");
  try {
    d.decided_on = parse_iso_date(field("decided_on"));
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": field 'decided_on': " + e.what());
  }
  d.full_text = text::normalize_newlines(field("full_text"));
  d.citations = detect_citations(d.full_text, registry);
  d.reasons = extract_reasons(d.full_text, markers);
  return d;
}

// ---------------------------------------------------------------------------
// Portal markup adapter
// ---------------------------------------------------------------------------

namespace detail {

inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto name = s.substr(i + 1, semi - i - 1);
    std::uint32_t cp = 0;
    if (name == "amp") cp = '&';
    else if (name == "lt") cp = '<';
    else if (name == "gt") cp = '>';
    else if (name == "quot") cp = '"';
    else if (name == "apos") cp = '\'';
    else if (name == "nbsp") cp = ' ';
    else if (name == "sect") cp = 0xA7;
    else if (name.starts_with("#")) {
      const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
      const auto digits = name.substr(hex ? 2 : 1);
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
      if (ec != std::errc{} || ptr != digits.data() + digits.size() || cp > 0x10FFFF) cp = 0;
    }
    if (cp == 0) {
      out.push_back('&');
      continue;
    }
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    i = semi;
  }
  return out;
}

inline std::optional<std::string_view> element(std::string_view xml, std::string_view tag) {
  const std::string open = "<" + std::string(tag);
  std::size_t pos = 0;
  while ((pos = xml.find(open, pos)) != std::string_view::npos) {
    const auto after = pos + open.size();
    if (after < xml.size() && (xml[after] == '>' || xml[after] == ' ' || xml[after] == '/')) break;
    pos = after;
  }
  if (pos == std::string_view::npos) return std::nullopt;
  const auto gt = xml.find('>', pos);
  if (gt == std::string_view::npos) return std::nullopt;
  if (xml[gt - 1] == '/') return std::string_view{};
  const std::string close = "</" + std::string(tag) + ">";
  const auto end = xml.find(close, gt);
  if (end == std::string_view::npos) return std::nullopt;
  return xml.substr(gt + 1, end - gt - 1);
}

/// Markup to plain text; paragraph-level elements become blank-line boundaries.
inline std::string markup_to_text(std::string_view xml) {
  static constexpr std::string_view kBlock[] = {"p", "/p", "dd", "/dd", "dt", "/dt", "div", "/div", "br", "br/", "li", "/li"};
  std::string out;
  std::size_t i = 0;
  while (i < xml.size()) {
    if (xml[i] == '<') {
      const auto gt = xml.find('>', i);
      if (gt == std::string_view::npos) break;
      auto tag = xml.substr(i + 1, gt - i - 1);
      if (tag.starts_with("![CDATA[")) {
        const auto end = xml.find("]]>", i);
        if (end == std::string_view::npos) break;
        out.append(xml.substr(i + 9, end - i - 9));
        i = end + 3;
        continue;
      }
      const auto name_end = tag.find_first_of(" \t\n/");
      auto name = tag.substr(0, name_end == 0 ? tag.find_first_of(" \t\n", 1) : name_end);
      if (std::find(std::begin(kBlock), std::end(kBlock), name) != std::end(kBlock)) out += "\n\n";
      i = gt + 1;
    } else {
      out.push_back(xml[i++]);
    }
  }
  const auto paragraphs = text::split_paragraphs(decode_entities(out));
  std::string joined;
  for (const auto& p : paragraphs) {
    std::string flat;
    for (const auto& w : text::split_whitespace(p)) {
      if (!flat.empty()) flat.push_back(' ');
      flat += w;
    }
    if (!joined.empty()) joined += "\n\n";
    joined += flat;
  }
  return joined;
}

}  // namespace detail

/// Maps one XML document of the public case-law portal export to the normalized
/// ingestion format.
inline nlohmann::json adapt_portal_xml(std::string_view xml, std::string_view source = "<input>") {
  const std::string where(source);
  auto required = [&](std::string_view tag) {
    auto v = detail::element(xml, tag);
    if (!v) throw ValidationError(where + ": missing element <" + std::string(tag) + ">");
    return std::string(text::trim(detail::markup_to_text(*v)));
  };
  nlohmann::json doc;
  doc["decision_id"] = required("aktenzeichen");
  doc["court"] = required("gertyp");
  auto date = required("entsch-datum");
  if (date.size() == 8 && std::all_of(date.begin(), date.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    date = date.substr(0, 4) + "-" + date.substr(4, 2) + "-" + date.substr(6, 2);
  }
  doc["decided_on"] = date;
  static const std::pair<std::string_view, std::string_view> kSections[] = {
      {"leitsatz", "Leitsatz"},
      {"tenor", "Tenor"},
      {"tatbestand", "Tatbestand"},
      {"entscheidungsgruende", "Entscheidungsgründe"},
      {"gruende", "Gründe"},
  };
  std::string full;
  for (const auto& [tag, heading] : kSections) {
    if (auto body = detail::element(xml, tag)) {
      const auto t = detail::markup_to_text(*body);
      if (t.empty()) continue;
      if (!full.empty()) full += "\n\n";
      full += std::string(heading) + "\n\n" + t;
    }
  }
  doc["full_text"] = full;
  return doc;
}

/// A set of decisions with unique ids.
class Corpus {
 public:
  void add(Decision d) {
    if (!ids_.insert(d.decision_id).second) throw ValidationError("duplicate decision_id '" + d.decision_id + "'");
    decisions_.push_back(std::move(d));
  }

  const std::vector<Decision>& decisions() const noexcept { return decisions_; }
  std::size_t size() const noexcept { return decisions_.size(); }
  bool contains(const std::string& id) const { return ids_.contains(id); }

  /// Ingests every *.json (normalized format) and *.xml (portal export) file in
  /// dir, in lexicographic file-name order.
  static Corpus ingest_directory(const std::filesystem::path& dir, const ProvisionRegistry& registry,
                                 const SectionMarkers& markers = {}) {
    if (!std::filesystem::is_directory(dir)) throw IoError("corpus directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".json" || ext == ".xml")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    Corpus corpus;
    for (const auto& f : files) {
      const auto raw = read_file(f);
      const auto name = f.filename().string();
      Decision d = f.extension() == ".xml"
                       ? ingest_decision(adapt_portal_xml(raw, name).dump(), registry, markers, name)
                       : ingest_decision(raw, registry, markers, name);
      try {
        corpus.add(std::move(d));
      } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
      }
    }
    return corpus;
  }

 private:
  std::vector<Decision> decisions_;
  std::unordered_set<std::string> ids_;
};

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

struct ChunkId {
  std::string decision_id;
  std::size_t ordinal = 0;
  friend auto operator<=>(const ChunkId&, const ChunkId&) = default;
  friend bool operator==(const ChunkId&, const ChunkId&) = default;
};

struct Chunk {
  ChunkId id;
  /// 1-based index of the paragraph within the reasons section, before filtering.
  std::size_t paragraph = 0;
  std::string text;
  std::size_t char_len = 0;
  std::set<ProvisionRef> citations;
};

inline void to_json(nlohmann::json& j, const ChunkId& c) {
  j = nlohmann::json{{"decision_id", c.decision_id}, {"ordinal", c.ordinal}};
}
inline void from_json(const nlohmann::json& j, ChunkId& c) {
  c.decision_id = j.at("decision_id").get<std::string>();
  c.ordinal = j.at("ordinal").get<std::size_t>();
}
inline void to_json(nlohmann::json& j, const Chunk& c) {
  j = nlohmann::json{{"id", c.id},     {"paragraph", c.paragraph}, {"text", c.text},
                     {"char_len", c.char_len}, {"citations", c.citations}};
}
inline void from_json(const nlohmann::json& j, Chunk& c) {
  c.id = j.at("id").get<ChunkId>();
  c.paragraph = j.at("paragraph").get<std::size_t>();
  c.text = j.at("text").get<std::string>();
  c.char_len = j.at("char_len").get<std::size_t>();
  c.citations = j.at("citations").get<std::set<ProvisionRef>>();
}

struct Paragraph {
  std::size_t index = 0;  // 1-based position in the source
  std::string text;
};

/// Blank-line separated, trimmed paragraphs of at least min_chars characters.
inline std::vector<Paragraph> chunk_reasons(std::string_view reasons, std::size_t min_chars = 100) {
  if (min_chars < 1) throw ValidationError("min_chars must be >= 1");
  std::vector<Paragraph> out;
  std::size_t index = 0;
  for (auto& p : text::split_paragraphs(reasons)) {
    ++index;
    if (text::utf8_length(p) >= min_chars) out.push_back({index, std::move(p)});
  }
  return out;
}

/// Chunks of one decision's reasons section. Ordinals are contiguous over the
/// surviving paragraphs; every chunk inherits the decision's citations.
inline std::vector<Chunk> chunk_decision(const Decision& d, std::size_t min_chars = 100) {
  std::vector<Chunk> out;
  if (!d.reasons) return out;
  for (auto& p : chunk_reasons(*d.reasons, min_chars)) {
    Chunk c;
    c.id = {d.decision_id, out.size()};
    c.paragraph = p.index;
    c.char_len = text::utf8_length(p.text);
    c.text = std::move(p.text);
    c.citations = d.citations;
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct ProvisionStats {
  std::size_t citing_decisions = 0;
  std::size_t chunks = 0;
  std::size_t tokens = 0;
  friend bool operator==(const ProvisionStats&, const ProvisionStats&) = default;
};

struct CorpusStats {
  std::size_t n_decisions = 0;
  /// Keyed by section-level provision; only provisions cited at least once.
  std::map<ProvisionRef, ProvisionStats> per_provision;
  double mean_citations_per_provision = 0.0;
  double median_citations_per_provision = 0.0;
};

inline double mean_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Recomputes mean and median over the per-provision citing-decision counts.
inline void update_citation_summary(CorpusStats& stats) {
  std::vector<double> counts;
  for (const auto& [ref, s] : stats.per_provision) counts.push_back(static_cast<double>(s.citing_decisions));
  stats.mean_citations_per_provision = mean_of(counts);
  stats.median_citations_per_provision = median_of(counts);
}

/// Token counts use whitespace-delimited tokens.
inline CorpusStats corpus_stats(std::span<const Decision> decisions, std::span<const Chunk> chunks) {
  CorpusStats stats;
  stats.n_decisions = decisions.size();
  for (const auto& d : decisions) {
    std::set<ProvisionRef> bases;
    for (const auto& c : d.citations) bases.insert(c.base());
    for (const auto& b : bases) ++stats.per_provision[b].citing_decisions;
  }
  for (const auto& c : chunks) {
    std::set<ProvisionRef> bases;
    for (const auto& r : c.citations) bases.insert(r.base());
    const auto tokens = text::count_tokens(c.text);
    for (const auto& b : bases) {
      auto& s = stats.per_provision[b];
      ++s.chunks;
      s.tokens += tokens;
    }
  }
  update_citation_summary(stats);
  return stats;
}

namespace detail {
inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::vector<std::pair<ProvisionRef, ProvisionStats>> by_citing_desc(const CorpusStats& stats) {
  std::vector<std::pair<ProvisionRef, ProvisionStats>> rows(stats.per_provision.begin(), stats.per_provision.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second.citing_decisions > b.second.citing_decisions; });
  return rows;
}
}  // namespace detail

/// Tab-separated table, one row per provision, most-cited first.
inline std::string render_stats_table(const CorpusStats& stats) {
  std::string out = "provision\tkey\tciting_decisions\tchunks\ttokens\n";
  for (const auto& [ref, s] : detail::by_citing_desc(stats)) {
    out += ref.render() + "\t" + ref.key() + "\t" + std::to_string(s.citing_decisions) + "\t" +
           std::to_string(s.chunks) + "\t" + std::to_string(s.tokens) + "\n";
  }
  return out;
}

inline std::string render_stats_summary(const CorpusStats& stats) {
  std::ostringstream out;
  out << stats.n_decisions << " decisions cite " << stats.per_provision.size() << " registered provisions.\n";
  out << "A provision is cited in " << detail::fixed(stats.mean_citations_per_provision, 2)
      << " decisions on average (median " << detail::fixed(stats.median_citations_per_provision, 2) << ").\n";
  const auto rows = detail::by_citing_desc(stats);
  if (!rows.empty()) {
    out << "Citing decisions: ";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) out << ", ";
      out << rows[i].second.citing_decisions << " (" << rows[i].first.render() << ")";
    }
    out << ".\nCorpus sizes: ";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) out << ", ";
      out << rows[i].first.render() << " (" << rows[i].second.chunks << " paragraphs; " << rows[i].second.tokens
          << " tokens)";
    }
    out << ".\n";
  }
  return out.str();
}

inline nlohmann::json stats_to_json(const CorpusStats& stats) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [ref, s] : detail::by_citing_desc(stats)) {
    rows.push_back({{"provision", ref},
                    {"rendered", ref.render()},
                    {"citing_decisions", s.citing_decisions},
                    {"chunks", s.chunks},
                    {"tokens", s.tokens}});
  }
  return {{"n_decisions", stats.n_decisions},
          {"mean_citations_per_provision", stats.mean_citations_per_provision},
          {"median_citations_per_provision", stats.median_citations_per_provision},
          {"tokenizer", "whitespace"},
          {"per_provision", rows}};
}

}  // namespace lexcomm
