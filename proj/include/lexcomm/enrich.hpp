// SPDX-License-Identifier: Apache-2.0
//
// Per-provision enrichment of chunks: summary, application-step keyword and
// keyword embedding, persisted as Records.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lexcomm/corpus.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/parallel.hpp"
#include "lexcomm/provision.hpp"
#include "lexcomm/record.hpp"
#include "lexcomm/templates.hpp"

namespace lexcomm {

struct EnrichOptions {
  ModelId summarizer{"openai", "gpt-4o"};
  ModelId embedder{"openai", "text-embedding-3-large"};
  std::string sentinel = "IRRELEVANT";
  std::size_t max_keyword_tokens = 12;
  std::size_t workers = 4;
  std::size_t embed_batch = 256;
  std::uint64_t seed = 0;
};

struct Summary {
  std::string text;
  bool relevant = false;
};

/// "§ 823 BGB Schadensersatzpflicht" followed by the body on the next line.
inline std::string provision_block(const ProvisionText& p) {
  auto head = p.ref.render();
  if (!p.heading.empty()) head += " " + p.heading;
  return head + "\n" + p.body;
}

/// Texts of every provision the chunk cites, plus the target if it is not among them.
inline std::string provisions_context(const Chunk& chunk, const ProvisionRef& target, const ProvisionRegistry& registry) {
  std::vector<const ProvisionText*> texts;
  auto add = [&](const ProvisionRef& r) {
    const auto* t = &registry.at(r);
    if (std::find(texts.begin(), texts.end(), t) == texts.end()) texts.push_back(t);
  };
  add(target);
  for (const auto& r : chunk.citations) add(r);
  std::sort(texts.begin(), texts.end(), [](const auto* a, const auto* b) { return a->ref < b->ref; });
  std::string out;
  for (const auto* t : texts) {
    if (!out.empty()) out += "\n\n";
    out += provision_block(*t);
  }
  return out;
}

inline std::string target_label(const ProvisionRef& target, const ProvisionRegistry& registry) {
  const auto& t = registry.at(target);
  return t.heading.empty() ? target.render() : target.render() + " " + t.heading;
}

inline Summary summarize_chunk(const Llm& llm, const ModelId& model, const Chunk& chunk, const ProvisionRef& target,
                               const ProvisionRegistry& registry, const std::string& sentinel = "IRRELEVANT") {
  if (!cites(chunk.citations, target)) {
    throw ValidationError("chunk " + chunk.id.decision_id + "#" + std::to_string(chunk.id.ordinal) + " does not cite " +
                          target.render());
  }
  const Bindings b{{"target", target_label(target, registry)},
                   {"provisions", provisions_context(chunk, target, registry)},
                   {"chunk", chunk.text}};
  auto out = llm.gateway.complete(llm.templates.get(templates::kSummarize), b, model, llm.params);
  const auto body = std::string(text::trim(out.text));
  if (body == sentinel) return {"", false};
  return {body, true};
}

/// First non-empty line with quotes and trailing punctuation removed, cut to at
/// most max_tokens whitespace tokens. A cut prefers the last phrase boundary
/// (a token ending in ',', ';' or ':') inside the limit.
inline std::string clean_keyword(std::string_view raw, std::size_t max_tokens = 12) {
  std::string line;
  for (auto l : text::split_lines(raw)) {
    l = text::trim(l);
    if (!l.empty()) {
      line = std::string(l);
      break;
    }
  }
  auto strip = [](std::string s) {
    static constexpr std::string_view kEdge = "\"'*`.,;:";
    while (!s.empty() && (kEdge.find(s.back()) != std::string_view::npos || text::is_space(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (kEdge.find(s[i]) != std::string_view::npos || text::is_space(s[i]))) ++i;
    return s.substr(i);
  };
  line = strip(line);
  auto tokens = text::split_whitespace(line);
  if (tokens.size() <= max_tokens) return line;
  std::size_t keep = max_tokens;
  for (std::size_t i = max_tokens; i-- > 1;) {
    const char last = tokens[i - 1].back();
    if (last == ',' || last == ';' || last == ':') {
      keep = i;
      break;
    }
  }
  std::string out;
  for (std::size_t i = 0; i < keep; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tokens[i];
  }
  return strip(out);
}

/// One keyword phrase, or nullopt if the model returned nothing usable twice.
inline std::optional<std::string> extract_keyword(const Llm& llm, const ModelId& model, const std::string& summary,
                                                  const ProvisionRef& target, const ProvisionRegistry& registry,
                                                  std::size_t max_tokens = 12) {
  if (text::trim(summary).empty()) throw ValidationError("extract_keyword: empty summary");
  const Bindings b{{"target", target_label(target, registry)},
                   {"provision_text", provision_block(registry.at(target))},
                   {"summary", summary}};
  const auto& tmpl = llm.templates.get(templates::kKeyword);
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto out = llm.gateway.complete(tmpl, b, model, llm.params);
    auto kw = clean_keyword(out.text, max_tokens);
    if (!kw.empty()) return kw;
    llm.gateway.evict(out.cache_key);
  }
  return std::nullopt;
}

/// Embeds the keyword of every relevant record. A relevant record without a
/// keyword is demoted to irrelevant and reported in warnings.
inline void embed_records(Gateway& gateway, const ModelId& model, std::vector<Record>& records,
                          std::vector<std::string>& warnings, std::size_t batch = 256) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    if (!r.relevant) continue;
    if (text::trim(r.keyword).empty()) {
      warnings.push_back("record " + r.record_id + " has no keyword; skipped");
      r.relevant = false;
      r.keyword.clear();
      r.embedding.reset();
      continue;
    }
    todo.push_back(i);
  }
  for (std::size_t start = 0; start < todo.size(); start += batch) {
    const auto end = std::min(todo.size(), start + batch);
    std::vector<std::string> texts;
    for (auto k = start; k < end; ++k) texts.push_back(records[todo[k]].keyword);
    auto vectors = gateway.embed(texts, model);
    for (auto k = start; k < end; ++k) records[todo[k]].embedding = std::move(vectors[k - start]);
  }
}

struct EnrichResult {
  std::vector<Record> records;  // all chunks citing the provision, relevant or not
  std::vector<std::string> warnings;

  std::size_t relevant_count() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.relevant; }));
  }
};

/// Builds one record per chunk citing target, in chunk order.
inline EnrichResult enrich_provision(const Llm& llm, const EnrichOptions& opt, const ProvisionRef& target,
                                     const std::vector<Chunk>& chunks, const ProvisionRegistry& registry) {
  std::vector<const Chunk*> selected;
  for (const auto& c : chunks) {
    if (cites(c.citations, target)) selected.push_back(&c);
  }
  EnrichResult result;
  result.records.resize(selected.size());
  std::vector<std::string> notes(selected.size());
  parallel_for(selected.size(), opt.workers, [&](std::size_t i) {
    const Chunk& c = *selected[i];
    Record r;
    r.record_id = make_record_id(opt.seed, target, c.id);
    r.provision = target;
    r.chunk_id = c.id;
    r.paragraph = c.paragraph;
    auto s = summarize_chunk(llm, opt.summarizer, c, target, registry, opt.sentinel);
    r.summary = s.text;
    r.relevant = s.relevant;
    if (r.relevant) {
      if (auto kw = extract_keyword(llm, opt.summarizer, r.summary, target, registry, opt.max_keyword_tokens)) {
        r.keyword = *kw;
      } else {
        r.relevant = false;
        notes[i] = "record " + r.record_id + ": empty keyword after retry; marked irrelevant";
      }
    }
    result.records[i] = std::move(r);
  });
  for (auto& n : notes) {
    if (!n.empty()) result.warnings.push_back(std::move(n));
  }
  embed_records(llm.gateway, opt.embedder, result.records, result.warnings, opt.embed_batch);
  return result;
}

}  // namespace lexcomm
