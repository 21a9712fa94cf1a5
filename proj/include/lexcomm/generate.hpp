// SPDX-License-Identifier: Apache-2.0
//
// Headline, section and merge generation with ObjectId citation checks, and
// resolution of citations against the record store.
#pragma once

#include <algorithm>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lexcomm/cluster.hpp"
#include "lexcomm/enrich.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/provision.hpp"
#include "lexcomm/record.hpp"
#include "lexcomm/templates.hpp"

namespace lexcomm {

/// One `ObjectId('...')` occurrence. `id` is the quoted content, which may be malformed.
struct ObjectIdToken {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string id;
  bool well_formed() const { return is_record_id(id); }
};

/// All ObjectId tokens in text, in order. Single or double quotes are accepted.
inline std::vector<ObjectIdToken> scan_object_ids(std::string_view text) {
  static constexpr std::string_view kOpen = "ObjectId(";
  std::vector<ObjectIdToken> out;
  std::size_t pos = 0;
  while ((pos = text.find(kOpen, pos)) != std::string_view::npos) {
    std::size_t i = pos + kOpen.size();
    while (i < text.size() && text[i] == ' ') ++i;
    if (i >= text.size() || (text[i] != '\'' && text[i] != '"')) {
      pos += kOpen.size();
      continue;
    }
    const char quote = text[i];
    const auto close = text.find(quote, i + 1);
    if (close == std::string_view::npos || close - i - 1 > 64) {
      pos += kOpen.size();
      continue;
    }
    std::size_t end = close + 1;
    while (end < text.size() && text[end] == ' ') ++end;
    if (end >= text.size() || text[end] != ')') {
      pos += kOpen.size();
      continue;
    }
    out.push_back({pos, end + 1 - pos, std::string(text.substr(i + 1, close - i - 1))});
    pos = end + 1;
  }
  return out;
}

/// Well-formed ids cited in text.
inline std::set<std::string> cited_ids(std::string_view text) {
  std::set<std::string> out;
  for (const auto& t : scan_object_ids(text)) {
    if (t.well_formed()) out.insert(t.id);
  }
  return out;
}

/// Throws FabricationError for the first token that is malformed or not in allowed.
inline void check_citations(std::string_view text, const std::set<std::string>& allowed, std::string_view what) {
  for (const auto& t : scan_object_ids(text)) {
    if (!t.well_formed() || !allowed.contains(t.id)) {
      throw FabricationError(object_id(t.id), std::string(what) + " cites unknown " + object_id(t.id));
    }
  }
}

struct SectionDraft {
  std::size_t cluster_index = 0;
  std::string headline;
  std::string body;
  std::set<std::string> cited;
};

inline void to_json(nlohmann::json& j, const SectionDraft& d) {
  j = nlohmann::json{{"cluster_index", d.cluster_index}, {"headline", d.headline}, {"body", d.body}, {"cited", d.cited}};
}
inline void from_json(const nlohmann::json& j, SectionDraft& d) {
  d.cluster_index = j.at("cluster_index").get<std::size_t>();
  d.headline = j.at("headline").get<std::string>();
  d.body = j.at("body").get<std::string>();
  d.cited = j.at("cited").get<std::set<std::string>>();
}

/// First non-empty line without markdown heading marks or surrounding quotes.
inline std::string clean_headline(std::string_view raw) {
  for (auto l : text::split_lines(raw)) {
    l = text::trim(l);
    while (!l.empty() && (l.front() == '#' || l.front() == '*' || l.front() == ' ')) l.remove_prefix(1);
    while (!l.empty() && (l.back() == '*' || l.back() == ' ')) l.remove_suffix(1);
    l = text::trim(l);
    if (l.size() >= 2 && (l.front() == '"' || l.front() == '\'') && l.back() == l.front()) l = l.substr(1, l.size() - 2);
    if (!l.empty()) return std::string(l);
  }
  return {};
}

inline std::string generate_headline(const Llm& llm, const ModelId& model, const std::vector<std::string>& keywords,
                                     const ProvisionRef& target, const ProvisionRegistry& registry) {
  if (keywords.empty()) throw ValidationError("generate_headline: no keywords");
  std::string joined;
  for (const auto& k : keywords) joined += k + "\n";
  joined.pop_back();
  const Bindings b{{"target", target_label(target, registry)}, {"keywords", joined}};
  auto out = llm.gateway.complete(llm.templates.get(templates::kHeadline), b, model, llm.params);
  auto h = clean_headline(out.text);
  if (h.empty()) {
    llm.gateway.evict(out.cache_key);
    throw GatewayError(false, "empty headline from " + model.str());
  }
  return h;
}

struct MemberSummary {
  std::string record_id;
  std::string summary;
};

/// Descending summary length in characters, then ascending record_id.
inline void order_summaries(std::vector<MemberSummary>& s) {
  std::sort(s.begin(), s.end(), [](const MemberSummary& a, const MemberSummary& b) {
    const auto la = text::utf8_length(a.summary);
    const auto lb = text::utf8_length(b.summary);
    if (la != lb) return la > lb;
    return a.record_id < b.record_id;
  });
}

/// Calls the model, rejecting and retrying once when the output cites an id
/// outside `allowed`. The second rejection propagates as FabricationError.
inline Completion complete_checked(const Llm& llm, const PromptTemplate& tmpl, const Bindings& b, const ModelId& model,
                                   const std::set<std::string>& allowed, std::string_view what) {
  for (int attempt = 0;; ++attempt) {
    auto out = llm.gateway.complete(tmpl, b, model, llm.params);
    try {
      check_citations(out.text, allowed, what);
      return out;
    } catch (const FabricationError&) {
      llm.gateway.evict(out.cache_key);
      if (attempt >= 1) throw;
    }
  }
}

inline SectionDraft generate_section(const Llm& llm, const ModelId& model, std::size_t cluster_index,
                                     const std::string& headline, std::vector<MemberSummary> members,
                                     const ProvisionRef& target, const ProvisionRegistry& registry) {
  if (members.empty()) throw ValidationError("generate_section: no member summaries");
  order_summaries(members);
  std::set<std::string> allowed;
  std::string lines;
  for (const auto& m : members) {
    allowed.insert(m.record_id);
    lines += object_id(m.record_id) + ": " + m.summary + "\n";
  }
  lines.pop_back();
  const Bindings b{{"target", target_label(target, registry)}, {"headline", headline}, {"summaries", lines}};
  auto out = complete_checked(llm, llm.templates.get(templates::kSection), b, model, allowed,
                              "section " + std::to_string(cluster_index + 1) + " of " + target.render());
  SectionDraft d;
  d.cluster_index = cluster_index;
  d.headline = headline;
  d.body = std::string(text::trim(out.text));
  d.cited = cited_ids(d.body);
  return d;
}

/// Drafts joined as numbered markdown sections.
inline std::string join_drafts(const std::vector<SectionDraft>& drafts) {
  std::string out;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (!out.empty()) out += "\n\n";
    out += "## " + std::to_string(i + 1) + ". " + drafts[i].headline + "\n\n" + drafts[i].body;
  }
  return out;
}

struct Commentary {
  ProvisionRef provision;
  ModelId model;
  std::string text;
  std::set<std::string> cited;
  std::vector<std::size_t> source_drafts;  // cluster indices
  std::string prompt;                      // the rendered merge prompt, kept for audit
};

inline void to_json(nlohmann::json& j, const Commentary& c) {
  j = nlohmann::json{{"provision", c.provision}, {"model", c.model},
                     {"text", c.text},           {"cited", c.cited},
                     {"source_drafts", c.source_drafts}, {"prompt", c.prompt}};
}
inline void from_json(const nlohmann::json& j, Commentary& c) {
  c.provision = j.at("provision").get<ProvisionRef>();
  c.model = j.at("model").get<ModelId>();
  c.text = j.at("text").get<std::string>();
  c.cited = j.at("cited").get<std::set<std::string>>();
  c.source_drafts = j.at("source_drafts").get<std::vector<std::size_t>>();
  c.prompt = j.value("prompt", "");
}

inline Commentary merge_commentary(const Llm& llm, const ModelId& model, const std::vector<SectionDraft>& drafts,
                                   const ProvisionText& target, const std::string& language = "de") {
  if (drafts.empty()) throw ValidationError("merge_commentary: no drafts for " + target.ref.render());
  std::set<std::string> allowed;
  Commentary c;
  c.provision = target.ref;
  c.model = model;
  for (const auto& d : drafts) {
    allowed.insert(d.cited.begin(), d.cited.end());
    c.source_drafts.push_back(d.cluster_index);
  }
  const Bindings b{{"normtext", provision_block(target)}, {"draft", join_drafts(drafts)}};
  const auto& tmpl = llm.templates.get(templates::kMerge, language);
  c.prompt = tmpl.render(b);
  auto out = complete_checked(llm, tmpl, b, model, allowed, model.str() + " commentary on " + target.ref.render());
  c.text = std::string(text::trim(out.text));
  if (c.text.empty()) {
    llm.gateway.evict(out.cache_key);
    throw GatewayError(false, model.str() + " returned an empty commentary for " + target.ref.render());
  }
  c.cited = cited_ids(c.text);
  return c;
}

// ---------------------------------------------------------------------------
// Citation resolution
// ---------------------------------------------------------------------------

using RecordLookup = std::function<const Record*(std::string_view)>;

struct CitationEntry {
  std::string token;
  std::string record_id;
  bool resolvable = false;
  std::string decision_id;
  std::size_t ordinal = 0;
  std::size_t paragraph = 0;
  std::string excerpt;
};

struct CitationReport {
  std::vector<CitationEntry> entries;
  std::size_t resolvable() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.resolvable; }));
  }
  std::size_t unresolvable() const { return entries.size() - resolvable(); }
};

inline void to_json(nlohmann::json& j, const CitationEntry& e) {
  j = nlohmann::json{{"token", e.token}, {"record_id", e.record_id}, {"resolvable", e.resolvable},
                     {"excerpt", e.excerpt}};
  if (e.resolvable) {
    j["decision_id"] = e.decision_id;
    j["ordinal"] = e.ordinal;
    j["paragraph"] = e.paragraph;
  }
}

inline void to_json(nlohmann::json& j, const CitationReport& r) {
  j = nlohmann::json{{"total", r.entries.size()},
                     {"resolvable", r.resolvable()},
                     {"unresolvable", r.unresolvable()},
                     {"citations", r.entries}};
}

/// Text around [offset, offset+length), at most `radius` bytes each side, cut at UTF-8 boundaries.
inline std::string excerpt(std::string_view text, std::size_t offset, std::size_t length, std::size_t radius = 80) {
  std::size_t begin = offset > radius ? offset - radius : 0;
  while (begin > 0 && (static_cast<unsigned char>(text[begin]) & 0xC0u) == 0x80u) --begin;
  const std::size_t end = std::min(text.size(), offset + length + radius);
  const auto span = text.substr(begin, text::utf8_floor(text.substr(begin), end - begin));
  std::string out;
  for (char c : span) out.push_back(c == '\n' ? ' ' : c);
  return std::string(text::trim(out));
}

inline CitationReport verify_citations(std::string_view text, const RecordLookup& lookup) {
  CitationReport report;
  for (const auto& t : scan_object_ids(text)) {
    CitationEntry e;
    e.token = std::string(text.substr(t.offset, t.length));
    e.record_id = t.id;
    e.excerpt = excerpt(text, t.offset, t.length);
    if (t.well_formed()) {
      if (const auto* r = lookup(t.id)) {
        e.resolvable = true;
        e.decision_id = r->chunk_id.decision_id;
        e.ordinal = r->chunk_id.ordinal;
        e.paragraph = r->paragraph;
      }
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

inline CitationReport verify_citations(std::string_view text, const RecordStore& store) {
  return verify_citations(text, [&](std::string_view id) { return store.find(id); });
}

/// Replaces each ObjectId token with "[decision_id, para N]", or
/// "[unresolved ObjectId]" when the record is unknown.
inline std::string render_human(std::string_view text, const RecordLookup& lookup) {
  std::string out;
  std::size_t last = 0;
  for (const auto& t : scan_object_ids(text)) {
    out.append(text.substr(last, t.offset - last));
    const Record* r = t.well_formed() ? lookup(t.id) : nullptr;
    out += r ? "[" + r->chunk_id.decision_id + ", para " + std::to_string(r->paragraph) + "]"
             : std::string("[unresolved ObjectId]");
    last = t.offset + t.length;
  }
  out.append(text.substr(last));
  return out;
}

}  // namespace lexcomm
