#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "scitech/analytics.hpp"

using namespace scitech;

namespace {

PatentRecord patent(std::string id, int year, std::vector<std::string> countries = {},
                    std::vector<int> fields = {}) {
  PatentRecord p;
  p.patent_id = std::move(id);
  p.abstract = "x";
  p.priority_year = year;
  p.applicant_countries = std::move(countries);
  p.tech_fields = std::move(fields);
  p.is_priority = true;
  return p;
}

Topic topic(int id, std::map<int, std::size_t> years) {
  Topic t;
  t.topic_id = id;
  t.yearly_counts = std::move(years);
  for (const auto& [y, c] : t.yearly_counts) t.size += c;
  return t;
}

double count_of(const std::vector<KeyCount>& rows, const std::string& key) {
  for (const auto& r : rows) {
    if (r.key == key) return r.count;
  }
  return -1.0;
}

}  // namespace

TEST(TopicsOverTime, FillsMissingYearsWithZero) {
  const std::vector<Topic> t = {topic(0, {{2010, 3}, {2012, 1}}), topic(1, {{2011, 2}})};
  const auto rows = topics_over_time(t);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[1], (TopicYearCount{0, 2011, 0}));
  EXPECT_EQ(rows[3], (TopicYearCount{1, 2010, 0}));
  EXPECT_EQ(rows[4], (TopicYearCount{1, 2011, 2}));
}

TEST(TopicsOverTime, RowSumsEqualTopicSizes) {
  Rng rng(5);
  std::vector<Topic> t;
  for (int i = 0; i < 6; ++i) {
    std::map<int, std::size_t> years;
    for (int k = 0; k < 20; ++k) ++years[2000 + static_cast<int>(uniform_index(rng, 20))];
    t.push_back(topic(i, years));
  }
  const auto rows = topics_over_time(t);
  for (const auto& x : t) {
    std::size_t sum = 0;
    for (const auto& r : rows) {
      if (r.topic_id == x.topic_id) sum += r.count;
    }
    EXPECT_EQ(sum, x.size);
  }
}

TEST(TopicsOverTime, NewTopicHasZerosBeforeItAppears) {
  const std::vector<Topic> t = {topic(0, {{2016, 4}, {2021, 4}}), topic(1, {{2020, 9}, {2021, 30}})};
  for (const auto& r : topics_over_time(t)) {
    if (r.topic_id == 1 && r.year < 2020) {
      EXPECT_EQ(r.count, 0u);
    }
  }
}

TEST(DistanceByYear, SingleMatch) {
  const std::vector<PatentRecord> p = {patent("p", 2015)};
  const std::vector<PatentMatch> m = {{"p", 0, 0.5, 1}};
  const auto d = distance_by_year(m, p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].year, 2015);
  EXPECT_EQ(d[0].n, 1u);
  EXPECT_DOUBLE_EQ(d[0].mean, 0.5);
  EXPECT_DOUBLE_EQ(d[0].stddev, 0.0);
  EXPECT_EQ(d[0].histogram[bin_of(0.5, 0.02)].second, 1u);
}

TEST(DistanceByYear, ConstantDistances) {
  std::vector<PatentRecord> p;
  std::vector<PatentMatch> m;
  for (int i = 0; i < 10; ++i) {
    p.push_back(patent("p" + std::to_string(i), 2001));
    m.push_back({p.back().patent_id, 0, 0.25, 1});
  }
  const auto d = distance_by_year(m, p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0].mean, 0.25, 1e-15);
  EXPECT_NEAR(d[0].stddev, 0.0, 1e-15);
  std::size_t nonzero = 0;
  for (const auto& [edge, c] : d[0].histogram) nonzero += c > 0 ? 1 : 0;
  EXPECT_EQ(nonzero, 1u);
}

TEST(DistanceByYear, HistogramMatchesIntervalTally) {
  Rng rng(11);
  std::vector<PatentRecord> p;
  std::vector<PatentMatch> m;
  std::vector<double> values;
  for (int i = 0; i < 1000; ++i) {
    values.push_back(2.0 * uniform01(rng));
    p.push_back(patent("p" + std::to_string(i), 2010));
    m.push_back({p.back().patent_id, 0, values.back(), 1});
  }
  const auto d = distance_by_year(m, p);
  const auto ref = oracle::interval_tally(values, 0.02);
  ASSERT_EQ(d[0].histogram.size(), ref.size());
  for (std::size_t b = 0; b < ref.size(); ++b) EXPECT_EQ(d[0].histogram[b].second, ref[b]) << b;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / 1000.0;
  EXPECT_NEAR(d[0].mean, mean, 1e-12);
}

TEST(DistanceByYear, ClosingEdgeInLastBin) {
  EXPECT_EQ(bin_count(0.02), 100u);
  EXPECT_EQ(bin_of(2.0, 0.02), 99u);
  EXPECT_EQ(bin_of(0.0, 0.02), 0u);
}

TEST(DistanceByYear, UnknownPatentDiagnosed) {
  const std::vector<PatentRecord> p = {patent("p", 2015)};
  const std::vector<PatentMatch> m = {{"p", 0, 0.5, 1}, {"ghost", 0, 0.1, 1}};
  std::vector<Diagnostic> diag;
  const auto d = distance_by_year(m, p, 0.02, &diag);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].n, 1u);
  ASSERT_EQ(diag.size(), 1u);
  EXPECT_EQ(diag[0].line, 2u);
  EXPECT_NE(diag[0].message.find("ghost"), std::string::npos);
}

TEST(CountBy, SingleCountry) {
  const std::vector<PatentRecord> p = {patent("p", 2015, {"US"})};
  const std::vector<PatentMatch> m = {{"p", 0, 0.5, 1}};
  const auto c = count_by(m, p, CountKey::applicant_country);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].key, "US");
  EXPECT_DOUBLE_EQ(c[0].count, 1.0);
}

TEST(CountBy, SharedCountriesSplitEvenly) {
  const std::vector<PatentRecord> p = {patent("p", 2015, {"US", "DE"})};
  const std::vector<PatentMatch> m = {{"p", 0, 0.5, 1}, {"p", 3, 0.4, 2}};
  const auto c = count_by(m, p, CountKey::applicant_country);
  EXPECT_DOUBLE_EQ(count_of(c, "US"), 0.5);
  EXPECT_DOUBLE_EQ(count_of(c, "DE"), 0.5);
  const auto whole = count_by(m, p, CountKey::applicant_country, true);
  EXPECT_DOUBLE_EQ(count_of(whole, "US"), 1.0);
  EXPECT_DOUBLE_EQ(count_of(whole, "DE"), 1.0);
}

TEST(CountBy, FractionalTotalEqualsPatentCount) {
  const char* countries[] = {"US", "DE", "JP", "CN", "KR"};
  Rng rng(3);
  std::vector<PatentRecord> p;
  std::vector<PatentMatch> m;
  for (int i = 0; i < 10; ++i) {
    std::vector<std::string> cs;
    const std::size_t k = 1 + uniform_index(rng, 3);
    for (std::size_t j = 0; j < k; ++j) cs.push_back(countries[uniform_index(rng, 5)]);
    p.push_back(patent("p" + std::to_string(i), 2000, cs));
    m.push_back({p.back().patent_id, 0, 0.1, 1});
  }
  double total = 0.0;
  for (const auto& r : count_by(m, p, CountKey::applicant_country)) total += r.count;
  EXPECT_NEAR(total, 10.0, 1e-9);
}

TEST(CountBy, MissingValuesCountAsUnknown) {
  const std::vector<PatentRecord> p = {patent("a", 2015), patent("b", 2015, {}, {4})};
  const std::vector<PatentMatch> m = {{"a", 0, 0.5, 1}, {"b", 0, 0.5, 1}};
  const auto c = count_by(m, p, CountKey::tech_field);
  EXPECT_DOUBLE_EQ(count_of(c, "unknown"), 1.0);
  EXPECT_DOUBLE_EQ(count_of(c, "4"), 1.0);
}

TEST(CountBy, ByTopicAndOrdering) {
  const std::vector<PatentRecord> p = {patent("a", 1), patent("b", 1), patent("c", 1)};
  const std::vector<PatentMatch> m = {{"a", 2, 0.1, 1}, {"b", 2, 0.1, 1}, {"c", 1, 0.1, 1}, {"c", 2, 0.1, 1}};
  const auto c = count_by(m, p, CountKey::topic);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].key, "2");
  EXPECT_DOUBLE_EQ(c[0].count, 2.5);
  EXPECT_DOUBLE_EQ(c[1].count, 0.5);
  EXPECT_THROW(parse_count_key("office"), Error);
  EXPECT_EQ(parse_count_key("tech_field"), CountKey::tech_field);
}

TEST(Relatedness, WeightFormula) {
  // 10 patents: 4 carry {1, 2}, 2 carry {1}, 4 carry {3}.
  std::vector<PatentRecord> p;
  std::vector<PatentMatch> m;
  auto add = [&](std::vector<int> fields) {
    p.push_back(patent("p" + std::to_string(p.size()), 2000, {}, std::move(fields)));
    m.push_back({p.back().patent_id, 0, 0.1, 1});
  };
  for (int i = 0; i < 4; ++i) add({1, 2});
  for (int i = 0; i < 2; ++i) add({1});
  for (int i = 0; i < 4; ++i) add({3});
  const auto net = relatedness_network(m, p);
  EXPECT_EQ(net.n, 10u);
  EXPECT_NEAR(net.weight(1, 2), 10.0 * 4.0 / (6.0 * 4.0), 1e-12);
  EXPECT_DOUBLE_EQ(net.weight(1, 3), 0.0);
  EXPECT_DOUBLE_EQ(net.weight(1, 2), net.weight(2, 1));
  ASSERT_EQ(net.edges.size(), 1u);
  EXPECT_EQ(net.edges[0].field_i, 1);
  EXPECT_EQ(net.edges[0].field_j, 2);
  EXPECT_EQ(net.edges[0].cooccurrence, 4u);
}

TEST(Relatedness, DuplicateMatchesCountOnce) {
  const std::vector<PatentRecord> p = {patent("a", 1, {}, {1, 2}), patent("b", 1, {}, {1})};
  const std::vector<PatentMatch> m = {{"a", 0, 0.1, 1}, {"a", 1, 0.2, 1}, {"b", 0, 0.1, 1}};
  const auto net = relatedness_network(m, p);
  EXPECT_EQ(net.n, 2u);
  EXPECT_EQ(net.nodes.at(1), 2u);
  EXPECT_NEAR(net.weight(1, 2), 2.0 * 1.0 / (2.0 * 1.0), 1e-12);
}

TEST(Emitters, CsvAndJsonShapes) {
  const std::vector<Topic> t = {topic(0, {{2010, 1}})};
  const auto rows = topics_over_time(t);
  EXPECT_EQ(to_csv(std::span<const TopicYearCount>(rows)), "topic_id,year,count\n0,2010,1\n");
  EXPECT_EQ(to_json(std::span<const TopicYearCount>(rows)).dump(), R"([{"topic_id":0,"year":2010,"count":1}])");

  const std::vector<PatentRecord> p = {patent("p", 2015, {"US, Inc"})};
  const std::vector<PatentMatch> m = {{"p", 0, 0.5, 1}};
  const auto c = count_by(m, p, CountKey::applicant_country);
  EXPECT_EQ(to_csv(std::span<const KeyCount>(c)), "key,count\n\"US, Inc\",1\n");

  const auto d = distance_by_year(m, p, 0.5);
  const auto j = to_json(std::span<const DistanceDistribution>(d));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["bins"].size(), 4u);
  EXPECT_EQ(j[0]["bins"][1]["count"], 1);
  const auto csv = to_csv(std::span<const DistanceDistribution>(d));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
