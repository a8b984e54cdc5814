#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "scitech/linker.hpp"

using namespace scitech;

namespace {

TopicKeywordProfile profile_with(int topic_id, std::size_t methods, std::size_t tasks, std::size_t others = 0) {
  TopicKeywordProfile p;
  p.topic_id = topic_id;
  auto fill = [&](KeywordLabel l, const std::string& prefix, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto kw = prefix + " " + std::to_string(i);
      p.ranked[l].push_back({kw, kw, static_cast<double>(n - i), 1});
    }
  };
  fill(KeywordLabel::Method, "method", methods);
  fill(KeywordLabel::Task, "task", tasks);
  fill(KeywordLabel::Other, "other", others);
  return p;
}

std::size_t count_prefix(const std::vector<std::string>& kws, const std::string& prefix) {
  return static_cast<std::size_t>(
      std::count_if(kws.begin(), kws.end(), [&](const std::string& k) { return k.rfind(prefix, 0) == 0; }));
}

}  // namespace

TEST(GenerateQueries, DefaultsGiveFiftyBalancedQueries) {
  const auto p = profile_with(3, 80, 80);
  const auto q = generate_queries(p, {});
  ASSERT_EQ(q.size(), 50u);
  for (const auto& x : q) {
    EXPECT_EQ(x.keywords.size(), 25u);
    const auto m = count_prefix(x.keywords, "method");
    EXPECT_TRUE(m == 12 || m == 13) << m;
    EXPECT_EQ(m, x.method_count);
    EXPECT_EQ(m, x.seq % 2 == 0 ? 13u : 12u);
    EXPECT_EQ(std::set<std::string>(x.keywords.begin(), x.keywords.end()).size(), 25u);
    EXPECT_EQ(x.topic_id, 3);
  }
}

TEST(GenerateQueries, PoolsAreTopHalfOfTopK) {
  const auto p = profile_with(1, 80, 80);
  for (const auto& x : generate_queries(p, {})) {
    for (const auto& k : x.keywords) {
      const int rank = std::stoi(k.substr(k.find(' ') + 1));
      EXPECT_LT(rank, 50) << k;
    }
  }
}

TEST(GenerateQueries, SameSeedSameBytes) {
  const auto p = profile_with(2, 60, 70);
  QueryParams params;
  params.seed = 99;
  EXPECT_EQ(write_queries_jsonl(generate_queries(p, params)), write_queries_jsonl(generate_queries(p, params)));
  QueryParams other = params;
  other.seed = 100;
  EXPECT_NE(write_queries_jsonl(generate_queries(p, params)), write_queries_jsonl(generate_queries(p, other)));
}

TEST(GenerateQueries, OrderWithinQueryIsShuffled) {
  const auto q = generate_queries(profile_with(2, 60, 60), {});
  std::size_t mixed = 0;
  for (const auto& x : q) {
    if (count_prefix({x.keywords.begin(), x.keywords.begin() + 12}, "method") != 12) ++mixed;
  }
  EXPECT_GT(mixed, 40u);
}

TEST(GenerateQueries, SmallPoolShrinksLength) {
  const auto p = profile_with(5, 8, 60);
  Warnings w;
  const auto q = generate_queries(p, {}, &w);
  ASSERT_EQ(q.size(), 50u);
  for (const auto& x : q) {
    EXPECT_EQ(x.keywords.size(), 16u);
    EXPECT_EQ(count_prefix(x.keywords, "method"), 8u);
  }
  EXPECT_FALSE(w.empty());
}

TEST(GenerateQueries, EmptyProfileSkipped) {
  Warnings w;
  EXPECT_TRUE(generate_queries(profile_with(1, 0, 0), {}, &w).empty());
  EXPECT_EQ(w.size(), 1u);
}

TEST(GenerateQueries, OneEmptyPoolSkipsTopic) {
  Warnings w;
  EXPECT_TRUE(generate_queries(profile_with(1, 0, 30), {}, &w).empty());
  EXPECT_FALSE(w.empty());
}

TEST(GenerateQueries, OtherOnlyProfile) {
  Warnings w;
  const auto q = generate_queries(profile_with(1, 0, 0, 40), {}, &w);
  ASSERT_EQ(q.size(), 50u);
  for (const auto& x : q) {
    EXPECT_EQ(x.keywords.size(), 25u);
    EXPECT_EQ(count_prefix(x.keywords, "other"), 25u);
  }
}

TEST(GenerateQueries, RoundTrip) {
  const auto q = generate_queries(profile_with(7, 30, 30), {});
  const auto text = write_queries_jsonl(q);
  const auto back = read_queries_jsonl(text);
  ASSERT_EQ(back.size(), q.size());
  EXPECT_EQ(back[4].keywords, q[4].keywords);
  EXPECT_EQ(write_queries_jsonl(back), text);
}

// --- index -----------------------------------------------------------------

TEST(AnnIndex, SingleItem) {
  const std::vector<DocVector> v = {{"only", {0.6f, 0.8f}, true}};
  const auto idx = build_index(v, 5, 4, 1);
  const DocVector q{"q", {1.0f, 0.0f}, true};
  const auto r = search(idx, q, 10);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].first, "only");
  EXPECT_NEAR(r[0].second, 0.4, 1e-6);
}

TEST(AnnIndex, EmptyIndex) {
  const auto idx = build_index(std::vector<DocVector>{}, 3, 4, 1);
  EXPECT_EQ(idx.size(), 0u);
}

TEST(AnnIndex, IndexedVectorFoundFirst) {
  const auto v = oracle::random_unit_vectors(500, 16, 3);
  const auto idx = build_index(v, 10, 16, 2);
  for (std::size_t i = 0; i < 500; i += 50) {
    const auto r = search(idx, v[i], 5);
    ASSERT_FALSE(r.empty());
    EXPECT_EQ(r[0].first, v[i].doc_id);
    EXPECT_NEAR(r[0].second, 0.0, 1e-6);
  }
}

TEST(AnnIndex, OrthogonalQuery) {
  Rng rng(4);
  std::vector<DocVector> v;
  for (int i = 0; i < 50; ++i) {
    auto x = oracle::random_unit(rng, 3);
    x.push_back(0.0f);
    v.push_back({"p" + std::to_string(i), x, true});
  }
  const auto idx = build_index(v, 4, 8, 1);
  const auto r = search(idx, DocVector{"q", {0, 0, 0, 1}, true}, 20, 50);
  ASSERT_EQ(r.size(), 20u);
  for (const auto& [id, d] : r) EXPECT_NEAR(d, 1.0, 1e-6);
}

TEST(AnnIndex, KAboveSizeWarnsAndReturnsAll) {
  const auto v = oracle::random_unit_vectors(7, 4, 8);
  const auto idx = build_index(v, 3, 2, 1);
  Warnings w;
  const auto r = search(idx, v[0], 100, 0, &w);
  EXPECT_EQ(r.size(), 7u);
  EXPECT_EQ(w.size(), 1u);
}

TEST(AnnIndex, ExactModeMatchesBruteForce) {
  const auto v = oracle::random_unit_vectors(800, 12, 10);
  const auto idx = build_index(v, 8, 16, 5);
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto q = oracle::random_unit(rng, 12);
    const auto r = search(idx, DocVector{"q", q, true}, 30, v.size());
    const auto ref = oracle::brute_knn(v, q, 30);
    ASSERT_EQ(r.size(), ref.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_EQ(r[i].first, ref[i].first);
      EXPECT_NEAR(r[i].second, ref[i].second, 1e-6);
    }
  }
}

TEST(AnnIndex, TiesBrokenById) {
  std::vector<DocVector> v;
  for (const char* id : {"c", "a", "b"}) v.push_back({id, {1.0f, 0.0f}, true});
  const auto idx = build_index(v, 2, 1, 1);
  const auto r = search(idx, DocVector{"q", {0.0f, 1.0f}, true}, 3, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].first, "a");
  EXPECT_EQ(r[1].first, "b");
  EXPECT_EQ(r[2].first, "c");
}

TEST(AnnIndex, DuplicateVectorsStillIndexed) {
  std::vector<DocVector> v;
  for (int i = 0; i < 40; ++i) v.push_back({"d" + std::to_string(i), {0.0f, 1.0f, 0.0f}, true});
  const auto idx = build_index(v, 3, 4, 1);
  const auto r = search(idx, v[0], 40, 40);
  EXPECT_EQ(r.size(), 40u);
}

TEST(AnnIndex, SerializeRoundTrip) {
  const auto v = oracle::random_unit_vectors(300, 8, 12);
  const auto idx = build_index(v, 6, 8, 3);
  const auto bytes = idx.serialize();
  const auto back = AnnIndex::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const DocVector q{"q", oracle::random_unit(rng, 8), true};
    EXPECT_EQ(search(idx, q, 10), search(back, q, 10));
  }
  EXPECT_THROW(AnnIndex::deserialize(bytes.substr(0, bytes.size() - 3)), Error);
}

TEST(AnnIndex, RejectsNonUnitVectors) {
  const std::vector<DocVector> v = {{"a", {1.0f, 1.0f}, false}};
  EXPECT_THROW(build_index(v), Error);
}

TEST(AnnIndex, SameSeedSameIndex) {
  const auto v = oracle::random_unit_vectors(200, 6, 1);
  EXPECT_EQ(build_index(v, 5, 8, 9).serialize(), build_index(v, 5, 8, 9).serialize());
  EXPECT_EQ(AnnIndex::build(v, 5, 8, 9, 1).serialize(), AnnIndex::build(v, 5, 8, 9, 4).serialize());
}

// --- matches ---------------------------------------------------------------

TEST(AggregateMatches, MinDistanceAndHitCount) {
  const std::vector<QueryResult> results = {{{"p1", 0.30}, {"p2", 0.5}}, {{"p1", 0.20}}};
  const auto m = aggregate_matches(results, 4);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (PatentMatch{"p1", 4, 0.20, 2}));
  EXPECT_EQ(m[1], (PatentMatch{"p2", 4, 0.5, 1}));
}

TEST(AggregateMatches, DisjointResults) {
  std::vector<QueryResult> results(2);
  for (int q = 0; q < 2; ++q) {
    for (int i = 0; i < 100; ++i) results[q].emplace_back("q" + std::to_string(q) + "-" + std::to_string(i), 0.1 * i);
  }
  const auto m = aggregate_matches(results, 0);
  EXPECT_EQ(m.size(), 200u);
  EXPECT_TRUE(std::all_of(m.begin(), m.end(), [](const PatentMatch& x) { return x.hit_count == 1; }));
}

TEST(AggregateMatches, OverlapBounds) {
  Rng rng(3);
  std::vector<QueryResult> results(50);
  for (auto& r : results) {
    std::set<int> ids;
    while (ids.size() < 100) ids.insert(static_cast<int>(uniform_index(rng, 400)));
    for (int id : ids) r.emplace_back("p" + std::to_string(id), uniform01(rng));
  }
  const auto m = aggregate_matches(results, 0);
  EXPECT_GE(m.size(), 100u);
  EXPECT_LE(m.size(), 5000u);
  std::size_t hits = 0;
  for (const auto& x : m) hits += x.hit_count;
  EXPECT_EQ(hits, 5000u);
  EXPECT_TRUE(std::is_sorted(m.begin(), m.end(), [](const PatentMatch& a, const PatentMatch& b) {
    return a.distance < b.distance;
  }));
}

TEST(AggregateMatches, RoundTrip) {
  const std::vector<PatentMatch> m = {{"p1", 2, 0.125, 3}, {"p2", 2, 0.1 + 0.2, 1}};
  EXPECT_EQ(read_matches_jsonl(write_matches_jsonl(m)), m);
}
