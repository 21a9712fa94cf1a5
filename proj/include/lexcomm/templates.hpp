// SPDX-License-Identifier: Apache-2.0
//
// Built-in prompt templates. The merge and judge rubric texts are kept verbatim;
// only the {{...}} placeholder lines around them are additions. Do not reflow.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lexcomm/digest.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/prompt.hpp"

namespace lexcomm::templates {

inline constexpr const char* kMergeCommentaryDe = R"prompt(Du bist ein deutscher Rechtsanwalt.
Berücksichtige den vorangestellten Gesetzestext („Normtext“) lediglich in angemessenem Umfang, um Definitionen, Systematik und Telos der Norm korrekt zu verankern; zitiere ihn nicht ausführlich und fasse ihn nicht wörtlich zusammen.

Überarbeite den folgenden Entwurf sprachlich, strukturiere ihn logisch um, nummeriere und benenne die Überschriften konsistent, sodass jeder Abschnitt sinnvoll auf den vorangehenden aufbaut. Verbinde Übergänge, vermeide Redundanz. Vermeide generische Überschriften (z.B. "Begriff", "Praxisfall"). Verzichte auf abschließende Zusammenfassungen.

Der Kommentar soll die abstrakte Struktur der Anwendung der Norm widerspiegeln, aber auch konkrete Beispiele beinhalten, wenn diese im Entwurf vorkommen. Solche Beispiele sollen sich nur auf ausgewählte Aspekte der Norm beziehen. Erfinde keine Beispiele, sondern greife nur in dem Entwurf enthaltene Beispiele auf.

Schreibe in einem sachlichen, formalen Stil. Es handelt sich um einen Kommentar für ausgebildete Rechtsanwender, nicht etwa für Studierende. Der Output darf länger sein als der Input. Verzichte auf Stichpunkte, formuliere deren Inhalt stattdessen aus.

WICHTIG: Jede Stelle ObjectId('…') entspricht einer Referenz und muss als solche im finalen Text erhalten bleiben, falls der Text übernommen wird.

Gib nur den Kommentar zurück.)prompt";

inline constexpr const char* kMergeCommentaryEn = R"prompt(You are a German attorney.

Consider the preceding legislative text ("normative text") only to the extent necessary to correctly anchor definitions, structure, and the telos of the norm; do not quote it extensively or summarize it literally.

Revise the following draft linguistically, restructure it logically, number and name the headings consistently, so that each section logically builds upon the previous one. Connect transitions clearly and avoid redundancy. Avoid generic headings (e.g., "Concept," "Practical Case"). Do not include concluding summaries.

The commentary should reflect the abstract structure of the application of the norm but should also include concrete examples if they appear in the draft. Such examples should only relate to selected aspects of the norm. Do not invent examples; only use those included in the draft.

Write in an objective, formal style. This commentary is intended for trained legal practitioners, not for students. The output may be longer than the input. Avoid bullet points; instead, formulate their content in full sentences.

IMPORTANT: Each occurrence of ObjectId('…') corresponds to a reference and must remain as such in the final text if retained.

Return only the commentary.)prompt";

inline constexpr const char* kJudgeRubricDe = R"prompt(Bewertungsrichtlinien

Bewerte den Text eines deutschen juristischen Kommentars kritisch und vergebe für jedes der folgenden Kriterien einen Wert von 1 (befriedigt kaum) bis 5 (sehr gut erfüllt):

1. Topical Relevance: Decken die Überschriften alle unbestimmten Begriffe der zugrunde liegenden Norm ab?
2. Heading-Match: Entspricht jeder Absatz inhaltlich vollständig dem Versprechen der Überschrift?
3. Citation-Faithfulness: Stützen die angegebenen Fundstellen die Aussagen tatsächlich (keine Halluzinationen)? Werden alle referenzierten Dokumente gefunden?
4. Cluster-Distinction: Deckt sich der Inhalt nicht oder nur minimal mit anderen Abschnitten innerhalb des Texts (klare thematische Abgrenzung)?
5. Logical Ordering: Passt die Position jedes Abschnitts in die Gesamtstruktur (roter Faden, nachvollziehbare Reihenfolge)?

Gib ausschließlich das Ergebnis im JSON-Format zurück – ohne weiteren Text.)prompt";

inline constexpr const char* kJudgeRubricEn = R"prompt(Evaluation Criteria

Critically evaluate the text of a German legal commentary and assign a score from 1 (barely satisfactory) to 5 (very well fulfilled) for each of the following criteria:

1. Topical Relevance: Do the headings cover all undefined terms of the underlying norm?
2. Heading-Match: Does each paragraph fully meet the content promised by its heading?
3. Citation-Faithfulness: Do the cited references genuinely support the statements (no hallucinations)? Are all referenced documents locatable?
4. Cluster-Distinction: Is the content clearly distinct with minimal or no overlap with other sections within the text (clear thematic demarcation)?
5. Logical Ordering: Does the placement of each section logically fit into the overall structure (coherent thread, comprehensible sequence)?

Return only the result in JSON format—without any additional text.)prompt";

inline constexpr const char* kJudgeFormatReminderDe =
    R"prompt(Antworte ausschließlich mit einem JSON-Objekt mit genau den fünf Schlüsseln "Topical Relevance", "Heading-Match", "Citation-Faithfulness", "Cluster-Distinction" und "Logical Ordering" und jeweils einer ganzen Zahl von 1 bis 5 als Wert.)prompt";

inline constexpr const char* kJudgeFormatReminderEn =
    R"prompt(Answer with a JSON object only, with exactly the five keys "Topical Relevance", "Heading-Match", "Citation-Faithfulness", "Cluster-Distinction" and "Logical Ordering", each mapped to a whole number from 1 to 5.)prompt";

inline constexpr const char* kSummarizeChunkDe = R"prompt(Du erhältst einen Absatz aus den Entscheidungsgründen eines Urteils sowie den Wortlaut der im Urteil zitierten Vorschriften.

Zielvorschrift: {{target}}

Vorschriften:
{{provisions}}

Absatz:
{{chunk}}

Fasse zusammen, wie der Absatz die Zielvorschrift anwendet. Konzentriere dich auf die Anwendung der Zielvorschrift. Befasst sich der Absatz nicht tatsächlich mit der Zielvorschrift, antworte ausschließlich mit IRRELEVANT.)prompt";

inline constexpr const char* kExtractKeywordDe = R"prompt(Zielvorschrift: {{target}}

Wortlaut der Vorschrift:
{{provision_text}}

Zusammenfassung:
{{summary}}

Nenne ein kurzes Schlagwort (höchstens zwölf Wörter), das den Schritt der Anwendung der Vorschrift bezeichnet, den die Zusammenfassung betrifft. Gib nur das Schlagwort zurück.)prompt";

inline constexpr const char* kGenerateHeadlineDe = R"prompt(Vorschrift: {{target}}

Schlagwörter:
{{keywords}}

Formuliere aus den Schlagwörtern eine prägnante, nicht generische Überschrift für einen Abschnitt eines Kommentars zu dieser Vorschrift. Gib nur die Überschrift in einer Zeile zurück.)prompt";

inline constexpr const char* kGenerateSectionDe = R"prompt(Vorschrift: {{target}}

Überschrift: {{headline}}

Zusammenfassungen mit Referenz:
{{summaries}}

Verfasse auf Grundlage der Zusammenfassungen den Abschnitt eines Kommentars zu dieser Überschrift. Belege jede Aussage mit der zugehörigen Referenz in der Form ObjectId('…'). Verwende ausschließlich die angegebenen Referenzen.)prompt";

/// Template ids used by the pipeline.
inline constexpr const char* kSummarize = "summarize_chunk";
inline constexpr const char* kKeyword = "extract_keyword";
inline constexpr const char* kHeadline = "generate_headline";
inline constexpr const char* kSection = "generate_section";
inline constexpr const char* kMerge = "merge_commentary";
inline constexpr const char* kJudge = "judge_rubric";
inline constexpr const char* kJudgeRetry = "judge_rubric_retry";

inline PromptTemplate merge_commentary(const std::string& language = "de") {
  const std::string body = language == "en" ? kMergeCommentaryEn : kMergeCommentaryDe;
  return {kMerge, 1, language, "{{normtext}}\n\n" + body + "\n\n{{draft}}"};
}

inline PromptTemplate judge_rubric(const std::string& language = "de") {
  const std::string body = language == "en" ? kJudgeRubricEn : kJudgeRubricDe;
  return {kJudge, 1, language, body + "\n\n{{commentary}}"};
}

/// The rubric prompt followed by a format reminder, used for the single reprompt.
inline PromptTemplate judge_rubric_retry(const std::string& language = "de") {
  auto t = judge_rubric(language);
  t.id = kJudgeRetry;
  t.body += "\n\n" + std::string(language == "en" ? kJudgeFormatReminderEn : kJudgeFormatReminderDe);
  return t;
}

inline PromptTemplate summarize_chunk() { return {kSummarize, 1, "de", kSummarizeChunkDe}; }
inline PromptTemplate extract_keyword() { return {kKeyword, 1, "de", kExtractKeywordDe}; }
inline PromptTemplate generate_headline() { return {kHeadline, 1, "de", kGenerateHeadlineDe}; }
inline PromptTemplate generate_section() { return {kSection, 1, "de", kGenerateSectionDe}; }

/// The set of templates a pipeline run uses. Bodies may be overridden from a
/// directory of `<id>.<language>.v<version>.txt` files.
class TemplateSet {
 public:
  TemplateSet() {
    for (auto t : {summarize_chunk(), extract_keyword(), generate_headline(), generate_section(), merge_commentary("de"),
                   merge_commentary("en"), judge_rubric("de"), judge_rubric("en"), judge_rubric_retry("de"),
                   judge_rubric_retry("en")}) {
      put(std::move(t));
    }
  }

  static std::string file_name(const PromptTemplate& t) {
    return t.id + "." + t.language + ".v" + std::to_string(t.version) + ".txt";
  }

  void load_overrides(const std::filesystem::path& dir) {
    for (auto& [key, t] : templates_) {
      const auto path = dir / file_name(t);
      if (std::filesystem::exists(path)) t.body = read_file(path);
    }
  }

  const PromptTemplate& get(const std::string& id, const std::string& language = "de") const {
    auto it = templates_.find(id + "." + language);
    if (it == templates_.end()) throw ConfigError("unknown template '" + id + "' (" + language + ")");
    return it->second;
  }

  std::map<std::string, std::string> digests() const {
    std::map<std::string, std::string> out;
    for (const auto& [key, t] : templates_) out[file_name(t)] = t.digest();
    return out;
  }

  const std::map<std::string, PromptTemplate>& all() const noexcept { return templates_; }

 private:
  void put(PromptTemplate t) {
    auto key = t.id + "." + t.language;
    templates_[key] = std::move(t);
  }

  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace lexcomm::templates
