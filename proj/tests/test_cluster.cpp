#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scitech/cluster.hpp"
#include "scitech/config.hpp"

using namespace scitech;

namespace {

Topic topic_with(int id, std::vector<float> centroid) {
  Topic t;
  t.topic_id = id;
  normalize<float>(centroid);
  t.centroid = std::move(centroid);
  t.size = 1;
  return t;
}

PublicationRecord doc(std::string id, int year) {
  PublicationRecord p;
  p.doc_id = std::move(id);
  p.abstract = "x";
  p.year = year;
  return p;
}

}  // namespace

TEST(Hdbscan, FewerPointsThanMinClusterSizeIsAllNoise) {
  const auto b = oracle::gaussian_blobs({30}, 2, 10.0, 1);
  Warnings w;
  const auto a = hdbscan_fit(b.points, 50, 50, &w);
  EXPECT_EQ(a.n_clusters, 0u);
  EXPECT_TRUE(std::all_of(a.labels.begin(), a.labels.end(), [](int l) { return l == -1; }));
  EXPECT_EQ(w.size(), 1u);
}

TEST(Hdbscan, TwoSeparatedBlobs) {
  const auto b = oracle::gaussian_blobs({60, 60}, 5, 20.0, 2);
  const auto a = hdbscan_fit(b.points, 50, 50);
  EXPECT_EQ(a.n_clusters, 2u);
  EXPECT_DOUBLE_EQ(oracle::adjusted_rand_index(a.labels, b.truth), 1.0);
  EXPECT_EQ(a.stabilities.size(), 2u);
}

TEST(Hdbscan, MatchesReferenceOnSmallBlobs) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto b = oracle::gaussian_blobs({40, 25, 30}, 3, 6.0, 100 + seed);
    const auto a = hdbscan_fit(b.points, 10, 5);
    const auto ref = oracle::hdbscan_reference(b.points, 10, 5);
    EXPECT_EQ(a.n_clusters, ref.n_clusters) << "seed " << seed;
    EXPECT_DOUBLE_EQ(oracle::adjusted_rand_index(a.labels, ref.labels), 1.0) << "seed " << seed;
  }
}

TEST(Hdbscan, DefaultMinimumSizeIsFifty) {
  PipelineConfig c;
  EXPECT_EQ(c.cluster.min_cluster_size, 50u);
}

TEST(Hdbscan, LabelsOrderedBySmallestMember) {
  const auto b = oracle::gaussian_blobs({30, 30}, 2, 30.0, 5);
  Matrix swapped(60, 2);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t k = 0; k < 2; ++k) swapped(i, k) = b.points((i + 30) % 60, k);
  }
  const auto a = hdbscan_fit(swapped, 10, 5);
  ASSERT_EQ(a.n_clusters, 2u);
  EXPECT_EQ(a.labels[0], 0);
  EXPECT_EQ(a.labels[59], 1);
}

TEST(ExtractTopics, NoiseExcluded) {
  ClusterAssignment a;
  a.labels = {0, 0, -1, 1, 1};
  a.n_clusters = 2;
  std::vector<PublicationRecord> docs;
  std::vector<DocVector> vecs;
  for (int i = 0; i < 5; ++i) {
    docs.push_back(doc("d" + std::to_string(i), 2010));
    vecs.push_back({docs.back().doc_id, {1.0f, static_cast<float>(i)}, true});
    normalize<float>(vecs.back().vector);
  }
  const auto set = extract_topics(a, docs, vecs);
  ASSERT_EQ(set.topics.size(), 2u);
  EXPECT_EQ(set.topics[0].size, 2u);
  EXPECT_EQ(set.topics[1].size, 2u);
  for (const auto& t : set.topics) {
    EXPECT_EQ(std::count(t.member_doc_ids.begin(), t.member_doc_ids.end(), "d2"), 0);
    EXPECT_EQ(t.yearly_counts, (std::map<int, std::size_t>{{2010, 2}}));
  }
  EXPECT_FALSE(set.catch_all.has_value());
}

TEST(ExtractTopics, CentroidInOriginalSpace) {
  ClusterAssignment a;
  a.labels = {0, 0};
  std::vector<PublicationRecord> docs = {doc("a", 2001), doc("b", 2002)};
  std::vector<DocVector> vecs = {{"a", {1, 0, 0}, true}, {"b", {0, 1, 0}, true}};
  const auto set = extract_topics(a, docs, vecs);
  ASSERT_EQ(set.topics.size(), 1u);
  const float h = static_cast<float>(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(set.topics[0].centroid[0], h, 1e-7);
  EXPECT_NEAR(set.topics[0].centroid[1], h, 1e-7);
  EXPECT_NEAR(set.topics[0].centroid[2], 0.0, 1e-7);
}

TEST(ExtractTopics, CatchAllNeedsBothConditions) {
  // Topic 0: 10 diffuse members; topics 1 and 2: 2 tight members each.
  ClusterAssignment a;
  std::vector<PublicationRecord> docs;
  std::vector<DocVector> vecs;
  Rng rng(1);
  auto add = [&](int label, std::vector<float> v) {
    a.labels.push_back(label);
    docs.push_back(doc("d" + std::to_string(docs.size()), 2000));
    normalize<float>(v);
    vecs.push_back({docs.back().doc_id, std::move(v), true});
  };
  for (int i = 0; i < 10; ++i) add(0, oracle::random_unit(rng, 4));
  add(1, {1, 0, 0, 0.01f});
  add(1, {1, 0, 0, -0.01f});
  add(2, {0, 1, 0.01f, 0});
  add(2, {0, 1, -0.01f, 0});
  Warnings w;
  const auto set = extract_topics(a, docs, vecs, {}, &w);
  ASSERT_TRUE(set.catch_all.has_value());
  EXPECT_EQ(set.catch_all->topic_id, 0);
  EXPECT_EQ(set.topics.size(), 2u);
  EXPECT_FALSE(w.empty());
  // Raising the size ratio keeps it as a regular topic.
  const auto kept = extract_topics(a, docs, vecs, {6.0, 0.5});
  EXPECT_FALSE(kept.catch_all.has_value());
  EXPECT_EQ(kept.topics.size(), 3u);
}

TEST(Dendrogram, TwoTopics) {
  const std::vector<Topic> t = {topic_with(0, {1, 0}), topic_with(1, {0.6f, 0.8f})};
  const auto d = agglomerate_topics(t);
  ASSERT_EQ(d.merges.size(), 1u);
  EXPECT_NEAR(d.merges[0].height, 0.4, 1e-7);
  EXPECT_EQ(d.merges[0].new_node, 2u);
}

TEST(Dendrogram, FewerThanTwoTopicsIsEmpty) {
  EXPECT_TRUE(agglomerate_topics(std::vector<Topic>{topic_with(0, {1, 0})}).merges.empty());
}

TEST(Dendrogram, AverageLinkageHandExample) {
  Matrix d(3, 3);
  d(0, 1) = d(1, 0) = 0.1;
  d(0, 2) = d(2, 0) = 0.5;
  d(1, 2) = d(2, 1) = 0.6;
  const auto r = average_linkage(d);
  ASSERT_EQ(r.merges.size(), 2u);
  EXPECT_EQ(r.merges[0], (Merge{0, 1, 0.1, 3}));
  EXPECT_EQ(r.merges[1].node_a, 2u);
  EXPECT_EQ(r.merges[1].node_b, 3u);
  EXPECT_NEAR(r.merges[1].height, 0.55, 1e-12);
}

TEST(Dendrogram, MatchesReferenceOnRandomCentroids) {
  Rng rng(77);
  std::vector<Topic> topics;
  for (int i = 0; i < 50; ++i) topics.push_back(topic_with(i, oracle::random_unit(rng, 16)));
  const auto d = agglomerate_topics(topics);
  const auto ref = oracle::average_linkage_reference(centroid_distances(topics));
  ASSERT_EQ(d.merges.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_EQ(d.merges[i].node_a, ref[i].a);
    EXPECT_EQ(d.merges[i].node_b, ref[i].b);
    EXPECT_NEAR(d.merges[i].height, ref[i].height, 1e-12);
  }
}

TEST(Serialization, TopicsAndDendrogramRoundTrip) {
  TopicSet set;
  auto t = topic_with(3, {1, 2, 2});
  t.member_doc_ids = {"a", "b"};
  t.size = 2;
  t.yearly_counts = {{2001, 1}, {2003, 1}};
  t.dispersion = 0.25;
  set.topics.push_back(t);
  auto c = topic_with(0, {0, 0, 1});
  c.member_doc_ids = {"z"};
  set.catch_all = c;
  const auto text = write_topics_jsonl(set);
  const auto back = read_topics_jsonl(text);
  ASSERT_EQ(back.topics.size(), 1u);
  EXPECT_EQ(back.topics[0].member_doc_ids, t.member_doc_ids);
  EXPECT_EQ(back.topics[0].centroid, t.centroid);
  EXPECT_EQ(back.topics[0].yearly_counts, t.yearly_counts);
  ASSERT_TRUE(back.catch_all.has_value());
  EXPECT_EQ(back.catch_all->topic_id, 0);
  EXPECT_EQ(write_topics_jsonl(back), text);

  Dendrogram d;
  d.merges = {{0, 1, 0.125, 3}, {2, 3, 0.5, 4}};
  EXPECT_EQ(dendrogram_from_json(nlohmann::json::parse(to_json(d).dump())).merges, d.merges);
}
