#include <gtest/gtest.h>

#include <cmath>

#include "scitech/keywords.hpp"
#include "support.hpp"

using namespace scitech;
using testing_support::TempDir;

namespace {

PublicationRecord doc(std::string id, std::string abstract, std::string title = {}) {
  PublicationRecord p;
  p.doc_id = std::move(id);
  p.title = std::move(title);
  p.abstract = std::move(abstract);
  p.year = 2020;
  return p;
}

Topic topic(int id, std::vector<std::string> members) {
  Topic t;
  t.topic_id = id;
  t.size = members.size();
  t.member_doc_ids = std::move(members);
  return t;
}

const RankedKeyword* find_keyword(const TopicKeywordProfile& p, KeywordLabel l, const std::string& normalized) {
  for (const auto& k : p.of(l)) {
    if (k.normalized == normalized) return &k;
  }
  return nullptr;
}

}  // namespace

TEST(NerAnnotations, EmptyFile) {
  TempDir dir;
  write_file_atomic(dir / "a.jsonl", "");
  const auto r = ingest_ner_annotations(dir / "a.jsonl");
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(r.errors.empty());
}

TEST(NerAnnotations, ValidAndRejectedRows) {
  TempDir dir;
  write_file_atomic(dir / "a.jsonl",
                    "{\"doc_id\":\"d1\",\"surface\":\"REM sleep\",\"label\":\"Other\"}\n"
                    "{\"doc_id\":\"d1\",\"surface\":\"x\",\"label\":\"Thing\"}\n"
                    "{\"doc_id\":\"d9\",\"surface\":\"EEG\",\"label\":\"Method\"}\n");
  const std::unordered_set<std::string> corpus = {"d1"};
  const auto r = ingest_ner_annotations(dir / "a.jsonl", &corpus);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].surface, "REM sleep");
  EXPECT_EQ(r.records[0].label, KeywordLabel::Other);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_NE(r.errors[0].message.find("label"), std::string::npos);
  EXPECT_EQ(r.errors[1].line, 3u);
}

TEST(NerAnnotations, WriteReadRoundTrip) {
  TempDir dir;
  const std::vector<KeywordAnnotation> a = {{"d1", "deep brain stimulation", KeywordLabel::Method},
                                            {"d2", "tremor", KeywordLabel::Task}};
  write_file_atomic(dir / "a.jsonl", write_annotations_jsonl(a));
  const auto r = ingest_ner_annotations(dir / "a.jsonl");
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[1].doc_id, "d2");
  EXPECT_EQ(r.records[1].label, KeywordLabel::Task);
}

TEST(NormalizeKeyword, CaseAndWhitespace) {
  EXPECT_EQ(normalize_keyword("  REM\t Sleep "), "rem sleep");
  EXPECT_EQ(normalize_keyword("Slow-Wave  sleep"), "slow-wave sleep");
}

TEST(Rake, OnlyStopwords) {
  EXPECT_TRUE(extract_rake(doc("d", "the of and"), default_stopwords()).empty());
}

TEST(Rake, DegreeOverFrequency) {
  const std::unordered_set<std::string> stop = {"treats"};
  const auto s = rake_scores(doc("d", "deep brain stimulation treats tremor"), stop);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.at("deep brain stimulation"), 9.0);
  EXPECT_DOUBLE_EQ(s.at("tremor"), 1.0);
  const auto top = extract_rake(doc("d", "deep brain stimulation treats tremor"), stop);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].surface, "deep brain stimulation");
  EXPECT_EQ(top[0].label, KeywordLabel::Other);
}

TEST(Rake, RepetitionKeepsCandidatesAndScores) {
  const std::unordered_set<std::string> stop = {"treats"};
  const auto once = rake_scores(doc("d", "deep brain stimulation treats tremor"), stop);
  const auto twice =
      rake_scores(doc("d", "deep brain stimulation treats tremor. Deep brain stimulation treats tremor."), stop);
  EXPECT_EQ(once, twice);
}

TEST(Rake, PunctuationAndNumbersSplitPhrases) {
  const std::unordered_set<std::string> stop = {"of"};
  const auto s = rake_scores(doc("d", "sleep spindles, 40 hz oscillations of cortex", "Spindle study"), stop);
  EXPECT_TRUE(s.contains("spindle study"));
  EXPECT_TRUE(s.contains("sleep spindles"));
  EXPECT_TRUE(s.contains("hz oscillations"));
  EXPECT_TRUE(s.contains("cortex"));
}

TEST(Rake, AtMostFifteenPhrases) {
  std::string text;
  for (int i = 0; i < 30; ++i) text += "word" + std::string(1, static_cast<char>('a' + i % 26)) + std::to_string(i) + "x, ";
  EXPECT_EQ(extract_rake(doc("d", text), default_stopwords()).size(), kRakeMaxPhrases);
}

TEST(Ctfidf, FormulaValue) {
  EXPECT_NEAR(ctfidf_score(5, 5, 10), 5.0 * std::log(3.0), 1e-12);
  EXPECT_NEAR(ctfidf_score(5, 5, 10), 5.493, 1e-3);
}

TEST(Ctfidf, RankingFromAnnotations) {
  // 20 occurrences over 2 topics: A = 10.
  const std::vector<Topic> topics = {topic(0, {"a1", "a2"}), topic(1, {"b1"})};
  std::vector<KeywordAnnotation> ann;
  for (int i = 0; i < 5; ++i) ann.push_back({"a1", "Memory Consolidation", KeywordLabel::Task});
  for (int i = 0; i < 3; ++i) ann.push_back({"a2", "shared", KeywordLabel::Method});
  for (int i = 0; i < 2; ++i) ann.push_back({"a2", "memory consolidation", KeywordLabel::Other});
  for (int i = 0; i < 3; ++i) ann.push_back({"b1", "shared", KeywordLabel::Method});
  for (int i = 0; i < 7; ++i) ann.push_back({"b1", "other", KeywordLabel::Method});
  ann.push_back({"outside", "ignored", KeywordLabel::Method});
  const auto profiles = rank_ctfidf(topics, ann);
  ASSERT_EQ(profiles.size(), 2u);
  const auto* mc = find_keyword(profiles[0], KeywordLabel::Task, "memory consolidation");
  ASSERT_NE(mc, nullptr);
  EXPECT_NEAR(mc->score, 5.0 * std::log(3.0), 1e-9);
  EXPECT_EQ(mc->keyword, "Memory Consolidation");
  EXPECT_EQ(mc->occurrences, 5u);
  // Same tf in both topics, same global f: same score.
  const auto* s0 = find_keyword(profiles[0], KeywordLabel::Method, "shared");
  const auto* s1 = find_keyword(profiles[1], KeywordLabel::Method, "shared");
  ASSERT_NE(s0, nullptr);
  ASSERT_NE(s1, nullptr);
  EXPECT_EQ(s0->score, s1->score);
  // Labels are separate keys.
  EXPECT_NE(find_keyword(profiles[0], KeywordLabel::Other, "memory consolidation"), nullptr);
  EXPECT_EQ(find_keyword(profiles[1], KeywordLabel::Method, "ignored"), nullptr);
}

TEST(Ctfidf, TopicWithoutAnnotationsWarns) {
  const std::vector<Topic> topics = {topic(0, {"a"}), topic(1, {"b"})};
  const std::vector<KeywordAnnotation> ann = {{"a", "sleep", KeywordLabel::Other}};
  Warnings w;
  const auto p = rank_ctfidf(topics, ann, &w);
  EXPECT_TRUE(p[1].empty());
  EXPECT_EQ(w.size(), 1u);
}

TEST(Ctfidf, SleepTopicProfile) {
  const std::vector<Topic> topics = {topic(0, {"s1", "s2", "s3"}), topic(1, {"n1", "n2"})};
  std::vector<KeywordAnnotation> ann;
  for (const char* d : {"s1", "s2", "s3"}) {
    ann.push_back({d, "sleep", KeywordLabel::Other});
    ann.push_back({d, "memory consolidation", KeywordLabel::Task});
    ann.push_back({d, "slow-wave sleep", KeywordLabel::Method});
  }
  ann.push_back({"s1", "REM sleep", KeywordLabel::Other});
  for (const char* d : {"n1", "n2"}) ann.push_back({d, "deep brain stimulation", KeywordLabel::Method});
  const auto p = rank_ctfidf(topics, ann);
  EXPECT_EQ(p[0].of(KeywordLabel::Task).at(0).keyword, "memory consolidation");
  EXPECT_EQ(p[0].of(KeywordLabel::Method).at(0).keyword, "slow-wave sleep");
  EXPECT_EQ(p[0].of(KeywordLabel::Other).at(0).keyword, "sleep");
  EXPECT_EQ(p[0].of(KeywordLabel::Other).at(1).keyword, "REM sleep");
}

TEST(Ctfidf, ProfilesRoundTrip) {
  const std::vector<Topic> topics = {topic(4, {"a"}), topic(9, {"b"})};
  const std::vector<KeywordAnnotation> ann = {{"a", "Sleep", KeywordLabel::Other},
                                              {"a", "EEG", KeywordLabel::Method},
                                              {"b", "tremor", KeywordLabel::Task}};
  const auto p = rank_ctfidf(topics, ann);
  const auto text = write_profiles_jsonl(p);
  const auto back = read_profiles_jsonl(text);
  EXPECT_EQ(write_profiles_jsonl(back), text);
  // Listed topics without rows come back as empty profiles.
  const std::vector<int> ids = {4, 9, 11};
  const auto with_empty = read_profiles_jsonl(text, ids);
  ASSERT_EQ(with_empty.size(), 3u);
  EXPECT_EQ(with_empty[2].topic_id, 11);
  EXPECT_TRUE(with_empty[2].empty());
  EXPECT_FALSE(with_empty[1].empty());
}
