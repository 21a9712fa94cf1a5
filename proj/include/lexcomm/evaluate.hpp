// SPDX-License-Identifier: Apache-2.0
//
// Five-criterion rubric scoring: judge calls, human score import, and the
// per-provision / averaged "human | LLM" report.
#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lexcomm/error.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/provision.hpp"
#include "lexcomm/templates.hpp"
#include "lexcomm/text.hpp"

namespace lexcomm {

enum class Criterion { topical_relevance, heading_match, citation_faithfulness, cluster_distinction, logical_ordering };

inline constexpr std::array<Criterion, 5> kCriteria{Criterion::topical_relevance, Criterion::heading_match,
                                                    Criterion::citation_faithfulness, Criterion::cluster_distinction,
                                                    Criterion::logical_ordering};

/// Rubric label as used in the judge prompt.
inline std::string_view criterion_label(Criterion c) {
  static constexpr std::array<std::string_view, 5> labels{"Topical Relevance", "Heading-Match", "Citation-Faithfulness",
                                                          "Cluster-Distinction", "Logical Ordering"};
  return labels[static_cast<std::size_t>(c)];
}

inline std::string_view criterion_key(Criterion c) {
  static constexpr std::array<std::string_view, 5> keys{"topical_relevance", "heading_match", "citation_faithfulness",
                                                        "cluster_distinction", "logical_ordering"};
  return keys[static_cast<std::size_t>(c)];
}

enum class Source { human, llm };

inline std::string_view source_name(Source s) { return s == Source::human ? "human" : "llm"; }

struct JudgeScore {
  std::array<int, 5> values{};
  Source source = Source::llm;
  std::optional<ModelId> judge_model;

  int operator[](Criterion c) const { return values[static_cast<std::size_t>(c)]; }

  void validate() const {
    for (auto c : kCriteria) {
      const int v = (*this)[c];
      if (v < 1 || v > 5) {
        throw ValidationError(std::string(criterion_label(c)) + " score " + std::to_string(v) + " outside 1..5");
      }
    }
    if (source == Source::llm && !judge_model) throw ValidationError("judge score without judge model");
  }
};

namespace detail {

// "Topical Relevance", "topical_relevance" and "topical-relevance" all map to "topicalrelevance".
inline std::string criterion_token(std::string_view key) {
  std::string out;
  for (char c : text::to_lower(key)) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) out.push_back(c);
  }
  return out;
}

inline std::optional<Criterion> criterion_from_key(std::string_view key) {
  const auto token = criterion_token(key);
  for (auto c : kCriteria) {
    if (criterion_token(criterion_label(c)) == token) return c;
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses a judge answer. The envelope is handled leniently (markdown fences,
/// text around the object, key spelling); the values are not: exactly the five
/// criteria, each an integer in 1..5.
inline JudgeScore parse_judge_response(std::string_view raw, const ModelId& judge_model) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw ValidationError("judge response contains no JSON object");
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw.substr(open, close - open + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("judge response is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("judge response is not a JSON object");
  JudgeScore s;
  s.source = Source::llm;
  s.judge_model = judge_model;
  std::array<bool, 5> seen{};
  for (const auto& [key, value] : doc.items()) {
    const auto c = detail::criterion_from_key(key);
    if (!c) throw ValidationError("judge response has unknown key '" + key + "'");
    const auto i = static_cast<std::size_t>(*c);
    if (seen[i]) throw ValidationError("judge response repeats " + std::string(criterion_label(*c)));
    if (!value.is_number_integer()) {
      throw ValidationError(std::string(criterion_label(*c)) + " is not an integer: " + value.dump());
    }
    const auto v = value.get<long long>();
    if (v < 1 || v > 5) throw ValidationError(std::string(criterion_label(*c)) + " score " + value.dump() + " outside 1..5");
    s.values[i] = static_cast<int>(v);
    seen[i] = true;
  }
  for (auto c : kCriteria) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw ValidationError("judge response lacks " + std::string(criterion_label(c)));
    }
  }
  return s;
}

/// Scores one commentary. A response that fails the schema gets one reprompt
/// with a format reminder; a second failure throws ValidationError.
inline JudgeScore judge(const Llm& llm, const ModelId& judge_model, const ModelId& generator_model,
                        const std::string& commentary, const std::string& language = "de") {
  if (judge_model == generator_model) {
    throw ConfigError("judge model " + judge_model.str() + " also generated the commentary");
  }
  const Bindings b{{"commentary", commentary}};
  std::string first_error;
  for (const auto* id : {templates::kJudge, templates::kJudgeRetry}) {
    auto out = llm.gateway.complete(llm.templates.get(id, language), b, judge_model, llm.params);
    try {
      return parse_judge_response(out.text, judge_model);
    } catch (const ValidationError& e) {
      llm.gateway.evict(out.cache_key);
      if (first_error.empty()) {
        first_error = e.what();
        continue;
      }
      throw ValidationError("judge " + judge_model.str() + " failed twice: " + first_error + "; then: " + e.what());
    }
  }
  throw ValidationError("unreachable");
}

/// One score for one (provision, generator model) cell.
struct ScoreEntry {
  ProvisionRef provision;
  std::string model;  // generator label as shown in reports
  JudgeScore score;
};

struct HumanScores {
  std::vector<ScoreEntry> entries;
  std::vector<std::string> warnings;
};

/// Annotation rows: provision, model, five integers in rubric order, optional
/// annotator id. Fields are tab-separated, or comma-separated when a line has
/// no tab. Blank lines, '#' comments and a header row starting with
/// "provision" are skipped. A repeated (provision, model) pair replaces the
/// earlier row and is reported as a warning.
inline HumanScores import_human_scores(std::string_view content, std::string_view source = "<scores>") {
  HumanScores out;
  std::map<std::pair<ProvisionRef, std::string>, std::size_t> index;
  std::size_t line_no = 0;
  for (auto line : text::split_lines(content)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const char sep = trimmed.find('\t') != std::string_view::npos ? '\t' : ',';
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto end = trimmed.find(sep, start);
      fields.emplace_back(text::trim(trimmed.substr(start, end == std::string_view::npos ? end : end - start)));
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    const auto where = std::string(source) + ": row " + std::to_string(line_no);
    if (text::to_lower(fields[0]) == "provision") continue;
    if (fields.size() != 7 && fields.size() != 8) {
      throw ValidationError(where + ": expected 7 or 8 fields, got " + std::to_string(fields.size()));
    }
    ScoreEntry e;
    try {
      e.provision = ProvisionRef::parse(fields[0]);
    } catch (const Error& err) {
      throw ValidationError(where + ": " + err.what());
    }
    e.model = fields[1];
    if (e.model.empty()) throw ValidationError(where + ": empty model");
    e.score.source = Source::human;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& f = fields[2 + i];
      int v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw ValidationError(where + ": " + std::string(criterion_label(kCriteria[i])) + " is not an integer: '" + f + "'");
      }
      e.score.values[i] = v;
    }
    try {
      e.score.validate();
    } catch (const ValidationError& err) {
      throw ValidationError(where + ": " + err.what());
    }
    const auto key = std::make_pair(e.provision, e.model);
    if (auto it = index.find(key); it != index.end()) {
      out.warnings.push_back(where + ": duplicate row for " + e.provision.render() + " / " + e.model +
                             " replaces an earlier one");
      out.entries[it->second] = std::move(e);
    } else {
      index.emplace(key, out.entries.size());
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct Cell {
  std::optional<int> human;
  std::optional<int> llm;
};

struct EvaluationReport {
  std::vector<ProvisionRef> provisions;
  std::vector<std::string> models;  // ascending by byte order
  std::map<std::tuple<ProvisionRef, std::string, Criterion>, Cell> cells;
  std::map<std::tuple<std::string, Criterion, Source>, double> averages;  // absent when no scores exist
  std::set<std::tuple<std::string, Criterion, Source>> bold;
  std::vector<std::string> warnings;

  std::optional<double> average(const std::string& model, Criterion c, Source s) const {
    auto it = averages.find({model, c, s});
    if (it == averages.end()) return std::nullopt;
    return it->second;
  }
  bool is_bold(const std::string& model, Criterion c, Source s) const { return bold.contains({model, c, s}); }
  Cell cell(const ProvisionRef& p, const std::string& model, Criterion c) const {
    auto it = cells.find({p, model, c});
    return it == cells.end() ? Cell{} : it->second;
  }
};

/// Averages over the provisions that have a score; the bold set holds every
/// model whose average is maximal (within 1e-9) in its (criterion, source) column.
inline EvaluationReport build_report(const std::vector<ScoreEntry>& scores) {
  EvaluationReport r;
  std::set<ProvisionRef> provisions;
  std::set<std::string> models;
  std::map<std::tuple<ProvisionRef, std::string, Source>, const JudgeScore*> latest;
  for (const auto& e : scores) {
    provisions.insert(e.provision);
    models.insert(e.model);
    auto& slot = latest[{e.provision, e.model, e.score.source}];
    if (slot) {
      r.warnings.push_back("duplicate " + std::string(source_name(e.score.source)) + " score for " +
                           e.provision.render() + " / " + e.model + "; last one kept");
    }
    slot = &e.score;
  }
  r.provisions.assign(provisions.begin(), provisions.end());
  r.models.assign(models.begin(), models.end());
  for (const auto& [key, score] : latest) {
    const auto& [p, m, src] = key;
    for (auto c : kCriteria) {
      auto& cell = r.cells[{p, m, c}];
      (src == Source::human ? cell.human : cell.llm) = (*score)[c];
    }
  }
  for (const auto& m : r.models) {
    for (auto c : kCriteria) {
      for (auto s : {Source::human, Source::llm}) {
        int sum = 0;
        int count = 0;
        for (const auto& p : r.provisions) {
          const auto cell = r.cell(p, m, c);
          if (const auto& v = s == Source::human ? cell.human : cell.llm) {
            sum += *v;
            ++count;
          }
        }
        if (count > 0) r.averages[{m, c, s}] = static_cast<double>(sum) / count;
      }
    }
  }
  for (auto c : kCriteria) {
    for (auto s : {Source::human, Source::llm}) {
      std::optional<double> best;
      for (const auto& m : r.models) {
        if (auto a = r.average(m, c, s); a && (!best || *a > *best)) best = a;
      }
      if (!best) continue;
      for (const auto& m : r.models) {
        if (auto a = r.average(m, c, s); a && *a >= *best - 1e-9) r.bold.insert({m, c, s});
      }
    }
  }
  return r;
}

inline std::string format_fixed(double v, int decimals = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline constexpr std::string_view kMissing = "\xE2\x80\x93";  // en dash

/// Text rendering: one block per provision, then the average block. Cells are
/// "human | LLM"; missing values print as an en dash; maximal averages as **x.xx**.
inline std::string render_report_text(const EvaluationReport& r) {
  std::string out;
  auto header = [&](const std::string& title) {
    out += title + "\n";
    out += "Model";
    for (auto c : kCriteria) out += "\t" + std::string(criterion_label(c));
    out += "\n";
  };
  auto value = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(kMissing); };
  for (const auto& p : r.provisions) {
    header(p.render());
    for (const auto& m : r.models) {
      out += m;
      for (auto c : kCriteria) {
        const auto cell = r.cell(p, m, c);
        out += "\t" + value(cell.human) + " | " + value(cell.llm);
      }
      out += "\n";
    }
    out += "\n";
  }
  header("Average score across legal provisions");
  for (const auto& m : r.models) {
    out += m;
    for (auto c : kCriteria) {
      std::string parts[2];
      int i = 0;
      for (auto s : {Source::human, Source::llm}) {
        const auto a = r.average(m, c, s);
        std::string v = a ? format_fixed(*a) : std::string(kMissing);
        if (a && r.is_bold(m, c, s)) v = "**" + v + "**";
        parts[i++] = v;
      }
      out += "\t" + parts[0] + " | " + parts[1];
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["provisions"] = r.provisions;
  j["models"] = r.models;
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& p : r.provisions) {
    nlohmann::json rows = nlohmann::json::object();
    for (const auto& m : r.models) {
      nlohmann::json row = nlohmann::json::object();
      for (auto c : kCriteria) {
        const auto cell = r.cell(p, m, c);
        row[std::string(criterion_key(c))] = {{"human", opt(cell.human)}, {"llm", opt(cell.llm)}};
      }
      rows[m] = row;
    }
    blocks.push_back({{"provision", p}, {"scores", rows}});
  }
  j["blocks"] = blocks;
  nlohmann::json avg = nlohmann::json::object();
  for (const auto& m : r.models) {
    nlohmann::json row = nlohmann::json::object();
    for (auto c : kCriteria) {
      nlohmann::json cell = nlohmann::json::object();
      for (auto s : {Source::human, Source::llm}) {
        const auto a = r.average(m, c, s);
        cell[std::string(source_name(s))] =
            a ? nlohmann::json{{"value", format_fixed(*a)}, {"bold", r.is_bold(m, c, s)}} : nlohmann::json(nullptr);
      }
      row[std::string(criterion_key(c))] = cell;
    }
    avg[m] = row;
  }
  j["averages"] = avg;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace lexcomm
