// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "lexcomm/evaluate.hpp"
#include "lexcomm/io.hpp"
#include "published.hpp"
#include "support.hpp"

using namespace lexcomm;
using lexcomm::test::Harness;
using lexcomm::test::ScriptedBackend;

namespace {

const ModelId kJudgeModel{"google", "gemini-2.5-flash"};
const ModelId kGenerator{"openai", "gpt-4.1"};

std::vector<ScoreEntry> reference_scores() {
  auto human = import_human_scores(read_file(test::fixtures() / "reference_scores_human.tsv"), "human");
  auto llm = import_human_scores(read_file(test::fixtures() / "reference_scores_llm.tsv"), "llm");
  std::vector<ScoreEntry> all = human.entries;
  for (auto e : llm.entries) {
    e.score.source = Source::llm;
    e.score.judge_model = kJudgeModel;
    all.push_back(e);
  }
  return all;
}

JudgeScore human(std::array<int, 5> v) {
  JudgeScore s;
  s.values = v;
  s.source = Source::human;
  return s;
}

std::shared_ptr<ScriptedBackend> judge_replies(std::vector<std::string> replies) {
  return std::make_shared<ScriptedBackend>(0, [replies](const CompletionRequest& r, int) -> std::optional<std::string> {
    if (r.template_id != templates::kJudge && r.template_id != templates::kJudgeRetry) return std::nullopt;
    return replies.at(r.template_id == templates::kJudge ? 0 : 1);
  });
}

const std::string kValid =
    R"({"Topical Relevance": 4, "Heading-Match": 5, "Citation-Faithfulness": 3, "Cluster-Distinction": 4, "Logical Ordering": 2})";

}  // namespace

TEST(ScoreImport, ReferenceSheetsLoad) {
  const auto h = import_human_scores(read_file(test::fixtures() / "reference_scores_human.tsv"));
  ASSERT_EQ(h.entries.size(), 16u);
  EXPECT_TRUE(h.warnings.empty());
  const auto& first = h.entries.front();
  EXPECT_EQ(first.provision, (ProvisionRef{"BGB", 242}));
  EXPECT_EQ(first.model, "GPT-4.1");
  EXPECT_EQ(first.score.values, (std::array<int, 5>{3, 4, 3, 4, 3}));
}

TEST(ScoreImport, RejectsOutOfRangeAndMalformedRows) {
  EXPECT_THROW(import_human_scores("§ 242 BGB\tGPT-4.1\t0\t4\t3\t4\t3\n"), ValidationError);
  EXPECT_THROW(import_human_scores("§ 242 BGB\tGPT-4.1\t6\t4\t3\t4\t3\n"), ValidationError);
  EXPECT_THROW(import_human_scores("§ 242 BGB\tGPT-4.1\t3.5\t4\t3\t4\t3\n"), ValidationError);
  EXPECT_THROW(import_human_scores("§ 242 BGB\tGPT-4.1\t3\t4\t3\t4\n"), ValidationError);
  EXPECT_THROW(import_human_scores("Art. 8 GG\tGPT-4.1\t3\t4\t3\t4\t3\n"), ValidationError);
  try {
    import_human_scores("# c\n§ 242 BGB,GPT-4.1,3,4,3,4,3\n§ 242 BGB,GPT-4o,3,x,3,4,3\n", "sheet.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sheet.csv: row 3"), std::string::npos) << e.what();
  }
}

TEST(ScoreImport, DuplicateRowLastWinsWithWarning) {
  const auto h = import_human_scores("§ 242 BGB,GPT-4o,1,1,1,1,1\n§ 242 BGB,GPT-4o,2,2,2,2,2\n");
  ASSERT_EQ(h.entries.size(), 1u);
  EXPECT_EQ(h.entries[0].score.values[0], 2);
  EXPECT_EQ(h.warnings.size(), 1u);
}

TEST(Report, ReproducesPublishedAverageBlock) {
  const auto report = build_report(reference_scores());
  const auto published = test::published_averages();
  ASSERT_EQ(published.size(), 4u);
  EXPECT_EQ(report.models, (std::vector<std::string>{"GPT-4.1", "GPT-4.5-preview", "GPT-4o", "o3"}));
  std::size_t checked = 0;
  for (const auto& [model, row] : published) {
    for (std::size_t c = 0; c < 5; ++c) {
      for (auto s : {Source::human, Source::llm}) {
        const auto& expect = row[c][s == Source::human ? 0 : 1];
        const auto got = report.average(model, kCriteria[c], s);
        ASSERT_TRUE(got) << model;
        EXPECT_EQ(format_fixed(*got), expect.value) << model << " " << criterion_label(kCriteria[c]);
        EXPECT_EQ(report.is_bold(model, kCriteria[c], s), expect.bold) << model << " " << criterion_label(kCriteria[c]);
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 40u);
}

TEST(Report, AveragesMatchIndependentArithmetic) {
  const auto scores = reference_scores();
  const auto report = build_report(scores);
  std::map<std::tuple<std::string, int, int>, std::pair<int, int>> acc;
  for (const auto& e : scores) {
    for (int c = 0; c < 5; ++c) {
      auto& a = acc[{e.model, c, static_cast<int>(e.score.source)}];
      a.first += e.score.values[static_cast<std::size_t>(c)];
      a.second += 1;
    }
  }
  for (const auto& [key, a] : acc) {
    const auto& [model, c, s] = key;
    EXPECT_EQ(a.second, 4);
    const double expected = a.first / 4.0;  // exact in binary for quarter steps
    EXPECT_EQ(*report.average(model, kCriteria[static_cast<std::size_t>(c)], static_cast<Source>(s)), expected);
  }
  EXPECT_EQ(format_fixed(*report.average("GPT-4.1", Criterion::topical_relevance, Source::human)), "3.50");
  EXPECT_EQ(format_fixed(*report.average("GPT-4.5-preview", Criterion::heading_match, Source::human)), "5.00");
  EXPECT_EQ(format_fixed(*report.average("o3", Criterion::citation_faithfulness, Source::llm)), "3.25");
}

TEST(Report, PerProvisionCellsAndRendering) {
  const auto report = build_report(reference_scores());
  const ProvisionRef p242{"BGB", 242};
  const auto cell = report.cell(p242, "GPT-4.1", Criterion::topical_relevance);
  EXPECT_EQ(cell.human, 3);
  EXPECT_EQ(cell.llm, 5);
  const auto text = render_report_text(report);
  EXPECT_NE(text.find("GPT-4.1\t3 | 5\t4 | 5\t3 | 4\t4 | 4\t3 | 4\n"), std::string::npos);
  EXPECT_NE(text.find("o3\t3.25 | 4.25\t**5.00** | **4.75**"), std::string::npos);
  const auto j = report_to_json(report);
  EXPECT_EQ(j["averages"]["o3"]["heading_match"]["llm"]["value"], "4.75");
  EXPECT_EQ(j["averages"]["o3"]["heading_match"]["llm"]["bold"], true);
}

TEST(Report, MissingCellsAndTiesAndDuplicates) {
  const ProvisionRef a{"BGB", 242};
  const ProvisionRef b{"BGB", 280};
  std::vector<ScoreEntry> s{{a, "m1", human({4, 4, 4, 4, 4})},
                            {b, "m1", human({2, 2, 2, 2, 2})},
                            {a, "m2", human({3, 3, 3, 3, 3})},
                            {a, "m2", human({5, 5, 5, 5, 5})}};
  const auto r = build_report(s);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(*r.average("m2", Criterion::heading_match, Source::human), 5.0);
  EXPECT_EQ(*r.average("m1", Criterion::heading_match, Source::human), 3.0);
  EXPECT_FALSE(r.average("m1", Criterion::heading_match, Source::llm));
  EXPECT_FALSE(r.cell(b, "m2", Criterion::heading_match).human);
  EXPECT_TRUE(r.is_bold("m2", Criterion::heading_match, Source::human));
  EXPECT_FALSE(r.is_bold("m1", Criterion::heading_match, Source::human));
  EXPECT_NE(render_report_text(r).find("\xE2\x80\x93"), std::string::npos);

  // Equal maxima are both bold.
  const auto t = build_report({{a, "x", human({4, 1, 1, 1, 1})}, {a, "y", human({4, 2, 2, 2, 2})}});
  EXPECT_TRUE(t.is_bold("x", Criterion::topical_relevance, Source::human));
  EXPECT_TRUE(t.is_bold("y", Criterion::topical_relevance, Source::human));
}

TEST(JudgeParse, LenientEnvelopeStrictValues) {
  const auto s = parse_judge_response("```json\n" + kValid + "\n```", kJudgeModel);
  EXPECT_EQ(s.values, (std::array<int, 5>{4, 5, 3, 4, 2}));
  EXPECT_EQ(s.judge_model, kJudgeModel);
  const auto snake = parse_judge_response(
      R"(Ergebnis: {"topical_relevance":1,"heading_match":2,"citation_faithfulness":3,"cluster_distinction":4,"logical_ordering":5} Ende)",
      kJudgeModel);
  EXPECT_EQ(snake.values, (std::array<int, 5>{1, 2, 3, 4, 5}));

  auto with = [&](const std::string& from, const std::string& to) {
    auto t = kValid;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  EXPECT_THROW(parse_judge_response(with(": 4,", ": 6,"), kJudgeModel), ValidationError);
  EXPECT_THROW(parse_judge_response(with(": 4,", ": 0,"), kJudgeModel), ValidationError);
  EXPECT_THROW(parse_judge_response(with(": 4,", ": 4.5,"), kJudgeModel), ValidationError);
  EXPECT_THROW(parse_judge_response(with(": 4,", ": \"4\","), kJudgeModel), ValidationError);
  EXPECT_THROW(parse_judge_response(with(", \"Logical Ordering\": 2", ""), kJudgeModel), ValidationError);
  EXPECT_THROW(parse_judge_response(with("}", ", \"Style\": 3}"), kJudgeModel), ValidationError);
  EXPECT_THROW(parse_judge_response("keine Bewertung", kJudgeModel), ValidationError);
  EXPECT_THROW(parse_judge_response("{nicht json}", kJudgeModel), ValidationError);
}

TEST(Judge, InvalidScoreIsRetriedExactlyOnce) {
  const auto bad = R"({"Topical Relevance": 6, "Heading-Match": 5, "Citation-Faithfulness": 3, "Cluster-Distinction": 4, "Logical Ordering": 2})";
  auto twice_bad = judge_replies({bad, bad});
  Harness h(twice_bad);
  EXPECT_THROW(judge(h.llm(), kJudgeModel, kGenerator, "Kommentar"), ValidationError);
  EXPECT_EQ(twice_bad->calls(templates::kJudge), 1);
  EXPECT_EQ(twice_bad->calls(templates::kJudgeRetry), 1);

  auto recover = judge_replies({bad, "```\n" + kValid + "\n```"});
  Harness h2(recover);
  const auto s = judge(h2.llm(), kJudgeModel, kGenerator, "Kommentar");
  EXPECT_EQ(s.values[1], 5);
  EXPECT_EQ(recover->calls(templates::kJudgeRetry), 1);

  auto first_ok = judge_replies({kValid, bad});
  Harness h3(first_ok);
  judge(h3.llm(), kJudgeModel, kGenerator, "Kommentar");
  EXPECT_EQ(first_ok->calls(templates::kJudgeRetry), 0);
}

TEST(Judge, OfflineScoresAreInRangeAndDeterministic) {
  Harness a(std::make_shared<MockBackend>(1));
  Harness b(std::make_shared<MockBackend>(1));
  const auto x = judge(a.llm(), kJudgeModel, kGenerator, "Kommentar X");
  EXPECT_EQ(x.values, judge(b.llm(), kJudgeModel, kGenerator, "Kommentar X").values);
  EXPECT_NO_THROW(x.validate());
}

TEST(Judge, JudgeMustDifferFromGenerator) {
  Harness h(std::make_shared<MockBackend>(0));
  EXPECT_THROW(judge(h.llm(), kGenerator, kGenerator, "Kommentar"), ConfigError);
}
