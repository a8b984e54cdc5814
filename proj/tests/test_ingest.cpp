#include <gtest/gtest.h>

#include "scitech/ingest.hpp"
#include "support.hpp"

using namespace scitech;
using testing_support::TempDir;

namespace {

PublicationRecord pub(std::string id, int year, std::int64_t citations) {
  PublicationRecord p;
  p.doc_id = std::move(id);
  p.abstract = "text";
  p.year = year;
  p.citation_count = citations;
  return p;
}

PatentRecord patent(std::string id, bool priority, std::vector<std::string> offices) {
  PatentRecord p;
  p.patent_id = std::move(id);
  p.abstract = "a device";
  p.priority_year = 2010;
  p.is_priority = priority;
  p.offices = std::move(offices);
  return p;
}

}  // namespace

TEST(ParsePublications, EmptyFile) {
  TempDir dir;
  write_file_atomic(dir / "p.jsonl", "");
  const auto r = parse_publications(dir / "p.jsonl");
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(r.errors.empty());
}

TEST(ParsePublications, WellFormedLineKeepsTextBytes) {
  TempDir dir;
  write_file_atomic(dir / "p.jsonl",
                    R"({"doc_id":"d1","title":"Slow-wave sleep  and α rhythms","abstract":"We study REM sleep.\nTwo lines.",)"
                    R"("year":2015,"citation_count":12,"countries":["US","DE"],"journal":"J. Sleep","author_keywords":["sleep"]})"
                    "\n");
  const auto r = parse_publications(dir / "p.jsonl");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.errors.empty());
  const auto& p = r.records[0];
  EXPECT_EQ(p.doc_id, "d1");
  EXPECT_EQ(p.title, "Slow-wave sleep  and \xce\xb1 rhythms");
  EXPECT_EQ(p.abstract, "We study REM sleep.\nTwo lines.");
  EXPECT_EQ(p.year, 2015);
  EXPECT_EQ(p.citation_count, 12);
  EXPECT_EQ(p.countries, (std::vector<std::string>{"US", "DE"}));
  EXPECT_EQ(p.journal, "J. Sleep");
}

TEST(ParsePublications, MissingAbstractReportsLine) {
  TempDir dir;
  write_file_atomic(dir / "p.jsonl",
                    "{\"doc_id\":\"a\",\"abstract\":\"x y\",\"year\":2000}\n"
                    "{\"doc_id\":\"b\",\"year\":2001}\n"
                    "{\"doc_id\":\"c\",\"abstract\":\"z w\",\"year\":2002}\n");
  const auto r = parse_publications(dir / "p.jsonl");
  ASSERT_EQ(r.records.size(), 2u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_NE(r.errors[0].message.find("abstract"), std::string::npos);
}

TEST(ParsePublications, MalformedJsonIsPerRow) {
  TempDir dir;
  write_file_atomic(dir / "p.jsonl", "{\"doc_id\":\"a\",\"abstract\":\"x\",\"year\":2000}\n{not json\n");
  const auto r = parse_publications(dir / "p.jsonl");
  EXPECT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 2u);
}

TEST(ParsePublications, DuplicateIdIsFatal) {
  TempDir dir;
  write_file_atomic(dir / "p.jsonl",
                    "{\"doc_id\":\"a\",\"abstract\":\"x\",\"year\":2000}\n"
                    "{\"doc_id\":\"a\",\"abstract\":\"y\",\"year\":2001}\n");
  try {
    parse_publications(dir / "p.jsonl");
    FAIL() << "duplicate accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos) << e.what();
  }
}

TEST(ParsePublications, UnreadableFileIsFatal) {
  TempDir dir;
  EXPECT_THROW(parse_publications(dir / "nope.jsonl"), Error);
}

TEST(ParsePublications, CsvMatchesJsonl) {
  TempDir dir;
  std::vector<PublicationRecord> pubs = {pub("d1", 2001, 3), pub("d2", 2002, 0)};
  pubs[0].title = "Quoted, \"title\"";
  pubs[0].abstract = "Multi\nline, abstract";
  pubs[0].countries = {"US", "FR"};
  write_file_atomic(dir / "p.csv", write_publications_csv(pubs));
  const auto r = parse_publications(dir / "p.csv", TableFormat::csv);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.records, pubs);
}

TEST(ParsePatents, EmptyFile) {
  TempDir dir;
  write_file_atomic(dir / "t.jsonl", "");
  EXPECT_TRUE(parse_patents(dir / "t.jsonl").records.empty());
}

TEST(ParsePatents, TechFieldsKept) {
  TempDir dir;
  write_file_atomic(dir / "t.jsonl",
                    R"({"patent_id":"p1","abstract":"a","priority_year":2012,"tech_fields":[4,13],"is_priority":true})"
                    "\n");
  const auto r = parse_patents(dir / "t.jsonl");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].tech_fields, (std::vector<int>{4, 13}));
  EXPECT_TRUE(r.records[0].is_priority);
}

TEST(ParsePatents, FieldCodeOutOfRange) {
  TempDir dir;
  write_file_atomic(dir / "t.jsonl",
                    R"({"patent_id":"p1","abstract":"a","priority_year":2012,"tech_fields":[99]})"
                    "\n");
  const auto r = parse_patents(dir / "t.jsonl");
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].message.find("field code out of range"), std::string::npos);
}

TEST(ParsePatents, CsvRoundTrip) {
  TempDir dir;
  auto p = patent("p1", true, {"EP", "US"});
  p.applicant_countries = {"DE"};
  p.tech_fields = {1, 35};
  p.family_id = "f1";
  std::vector<PatentRecord> pats = {p, patent("p2", false, {})};
  write_file_atomic(dir / "t.csv", write_patents_csv(pats));
  const auto r = parse_patents(dir / "t.csv", TableFormat::csv);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.records, pats);
}

TEST(FilterPriorityIp5, Examples) {
  EXPECT_TRUE(filter_priority_ip5(std::vector<PatentRecord>{}).empty());
  const std::vector<PatentRecord> one = {patent("kept", true, {"EP"})};
  EXPECT_EQ(filter_priority_ip5(one).size(), 1u);
  const std::vector<PatentRecord> dropped = {patent("br", true, {"BR"}), patent("us", false, {"US"})};
  EXPECT_TRUE(filter_priority_ip5(dropped).empty());
}

TEST(SelectTopCited, SingleRecord) {
  const std::vector<PublicationRecord> pubs = {pub("x", 2000, 1)};
  EXPECT_EQ(select_top_cited(pubs, 2000), pubs);
}

TEST(SelectTopCited, TiesBrokenByDocId) {
  const std::vector<PublicationRecord> pubs = {pub("c", 2005, 5), pub("a", 2005, 10), pub("b", 2005, 5)};
  const auto out = select_top_cited(pubs, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].doc_id, "a");
  EXPECT_EQ(out[1].doc_id, "b");
}

TEST(SelectTopCited, TwoThousandPerYear) {
  std::vector<PublicationRecord> pubs;
  Rng rng(4);
  for (int year : {2019, 2020}) {
    for (int i = 0; i < 5000; ++i) {
      pubs.push_back(pub(std::to_string(year) + "-" + std::to_string(i), year,
                         static_cast<std::int64_t>(uniform_index(rng, 1000))));
    }
  }
  const auto out = select_top_cited(pubs, 2000);
  std::map<int, std::size_t> per_year;
  for (const auto& p : out) ++per_year[p.year];
  EXPECT_EQ(per_year[2019], 2000u);
  EXPECT_EQ(per_year[2020], 2000u);
}

TEST(SelectTopCited, ZeroPerYearRejected) {
  EXPECT_THROW(select_top_cited(std::vector<PublicationRecord>{}, 0), Error);
}
