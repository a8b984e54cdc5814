#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "scitech/common.hpp"
#include "scitech/embed.hpp"
#include "scitech/keywords.hpp"

namespace scitech {

// ---------------------------------------------------------------------------
// Query generation

struct SearchQuery {
  int topic_id = 0;
  std::size_t seq = 0;
  std::vector<std::string> keywords;
  std::size_t method_count = 0;  // keywords drawn from the Method pool
  DocVector vector;

  bool operator==(const SearchQuery& o) const {
    return topic_id == o.topic_id && seq == o.seq && keywords == o.keywords;
  }
};

struct QueryParams {
  std::size_t top_k = 100;
  std::size_t queries_per_topic = 50;
  std::size_t query_length = 25;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::vector<std::string> top_keywords(const std::vector<RankedKeyword>& ranked, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && out.size() < n; ++i) out.push_back(ranked[i].keyword);
  return out;
}

/// Draws up to `count` pool entries without replacement, skipping any already
/// in `taken`.
inline std::vector<std::string> sample_distinct(std::vector<std::string> pool, std::size_t count,
                                                std::unordered_set<std::string>& taken, Rng& rng) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < pool.size() && out.size() < count; ++i) {
    const auto j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    if (taken.insert(normalize_keyword(pool[i])).second) out.push_back(pool[i]);
  }
  return out;
}

}  // namespace detail

/// Keyword queries for one topic.
///
/// Pools are the top ceil(top_k/2) Method and Task keywords. Query `seq`
/// takes ceil(L/2) keywords from one pool and floor(L/2) from the other, the
/// larger share going to Method on even seq and Task on odd seq; the combined
/// list is shuffled. Each query has its own RNG stream from (seed, topic, seq).
/// A pool smaller than its quota shrinks L to 2 x min(pool sizes). When
/// neither Method nor Task keywords exist the Other ranking is used alone.
inline std::vector<SearchQuery> generate_queries(const TopicKeywordProfile& profile, const QueryParams& params,
                                                 Warnings* warnings = nullptr) {
  if (params.top_k == 0 || params.queries_per_topic == 0 || params.query_length == 0) {
    throw Error("generate_queries: top_k, queries_per_topic and query_length must be positive");
  }
  const std::string topic = "topic " + std::to_string(profile.topic_id);
  const std::size_t per_pool = (params.top_k + 1) / 2;
  auto methods = detail::top_keywords(profile.of(KeywordLabel::Method), per_pool);
  auto tasks = detail::top_keywords(profile.of(KeywordLabel::Task), per_pool);
  std::vector<SearchQuery> out;

  if (methods.empty() && tasks.empty()) {
    auto others = detail::top_keywords(profile.of(KeywordLabel::Other), params.top_k);
    if (others.empty()) {
      warn(warnings, topic + ": no keywords; topic skipped");
      return out;
    }
    std::size_t length = params.query_length;
    if (others.size() < length) {
      warn(warnings, topic + ": only " + std::to_string(others.size()) + " Other keywords; query length " +
                         std::to_string(length) + " shrunk");
      length = others.size();
    }
    warn(warnings, topic + ": no Method/Task keywords; queries drawn from Other keywords without even mixing");
    for (std::size_t seq = 0; seq < params.queries_per_topic; ++seq) {
      Rng rng(derive_seed(params.seed, static_cast<std::int64_t>(profile.topic_id), seq));
      std::unordered_set<std::string> taken;
      SearchQuery q;
      q.topic_id = profile.topic_id;
      q.seq = seq;
      q.keywords = detail::sample_distinct(others, length, taken, rng);
      out.push_back(std::move(q));
    }
    return out;
  }

  std::size_t length = params.query_length;
  const std::size_t big = (length + 1) / 2;
  if (methods.size() < big || tasks.size() < big) {
    const std::size_t shrunk = 2 * std::min(methods.size(), tasks.size());
    if (shrunk < length) {
      warn(warnings, topic + ": keyword pools (Method " + std::to_string(methods.size()) + ", Task " +
                         std::to_string(tasks.size()) + ") below quota; query length " + std::to_string(length) +
                         " shrunk to " + std::to_string(shrunk));
      length = shrunk;
    }
  }
  if (length == 0) {
    warn(warnings, topic + ": an empty Method or Task pool leaves no room for balanced queries; topic skipped");
    return out;
  }
  for (std::size_t seq = 0; seq < params.queries_per_topic; ++seq) {
    Rng rng(derive_seed(params.seed, static_cast<std::int64_t>(profile.topic_id), seq));
    const std::size_t method_quota = seq % 2 == 0 ? (length + 1) / 2 : length / 2;
    const std::size_t task_quota = length - method_quota;
    std::unordered_set<std::string> taken;
    SearchQuery q;
    q.topic_id = profile.topic_id;
    q.seq = seq;
    q.keywords = detail::sample_distinct(methods, method_quota, taken, rng);
    q.method_count = q.keywords.size();
    auto task_part = detail::sample_distinct(tasks, task_quota, taken, rng);
    if (task_part.size() < task_quota) {
      warn(warnings, topic + " query " + std::to_string(seq) + ": Task pool overlaps Method keywords; " +
                         std::to_string(task_quota - task_part.size()) + " fewer keywords");
    }
    q.keywords.insert(q.keywords.end(), task_part.begin(), task_part.end());
    shuffle(q.keywords, rng);
    out.push_back(std::move(q));
  }
  return out;
}

/// Embeds each query's keyword phrases as one bag of tokens. Queries with no
/// in-vocabulary token are dropped with a warning.
inline std::vector<SearchQuery> embed_queries(std::vector<SearchQuery> queries, const WordEmbeddings& emb,
                                              const TfidfModel& tfidf, Warnings* warnings = nullptr) {
  std::vector<SearchQuery> out;
  out.reserve(queries.size());
  for (auto& q : queries) {
    TokenList tokens;
    for (const auto& k : q.keywords) {
      auto t = tokenize(k);
      tokens.insert(tokens.end(), t.begin(), t.end());
    }
    const std::string id = std::to_string(q.topic_id) + ":" + std::to_string(q.seq);
    try {
      q.vector = embed_tokens(tokens, emb, tfidf, id);
      out.push_back(std::move(q));
    } catch (const UnembeddableDocument&) {
      warn(warnings, "query " + id + " has no in-vocabulary token; dropped");
    }
  }
  return out;
}

inline std::string write_queries_jsonl(std::span<const SearchQuery> queries) {
  std::string out;
  for (const auto& q : queries) {
    nlohmann::ordered_json j = {{"topic_id", q.topic_id},
                                {"seq", q.seq},
                                {"method_count", q.method_count},
                                {"keywords", q.keywords}};
    out += j.dump() + '\n';
  }
  return out;
}

inline std::vector<SearchQuery> read_queries_jsonl(std::string_view text) {
  std::vector<SearchQuery> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    SearchQuery q;
    q.topic_id = j.at("topic_id").get<int>();
    q.seq = j.at("seq").get<std::size_t>();
    q.method_count = j.at("method_count").get<std::size_t>();
    q.keywords = j.at("keywords").get<std::vector<std::string>>();
    out.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Approximate nearest-neighbor index

/// Forest of random-hyperplane trees over unit vectors (cosine distance).
///
/// Each split picks two distinct items and separates by the perpendicular
/// bisector of the pair; items on the plane go to a coin-flipped side.
class AnnIndex {
 public:
  struct Node {
    // Split nodes: unit normal and offset, margin(x) = normal . x - offset;
    // children[0] receives margin > 0. A zero normal marks a random split.
    std::vector<float> normal;
    float offset = 0.0f;
    std::uint32_t children[2] = {0, 0};
    // Leaf nodes.
    std::vector<std::uint32_t> items;
    bool leaf = false;
  };
  struct Tree {
    std::vector<Node> nodes;  // node 0 is the root
  };

  AnnIndex() = default;

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t n_trees() const { return trees_.size(); }
  std::size_t leaf_capacity() const { return leaf_capacity_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::span<const float> item(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  static AnnIndex build(std::span<const DocVector> vectors, std::size_t n_trees, std::size_t leaf_capacity,
                        std::uint64_t seed, std::size_t threads = default_threads()) {
    if (n_trees == 0 || leaf_capacity == 0) throw Error("build_index: n_trees and leaf_capacity must be positive");
    AnnIndex index;
    index.leaf_capacity_ = leaf_capacity;
    index.dim_ = vectors.empty() ? 0 : vectors.front().vector.size();
    for (const auto& v : vectors) {
      if (v.vector.size() != index.dim_) throw Error("build_index: mixed vector dimensions");
      const double norm = l2_norm<float>(v.vector);
      if (std::abs(norm - 1.0) > 1e-3) throw Error("build_index: vector '" + v.doc_id + "' is not unit length");
      index.ids_.push_back(v.doc_id);
      index.values_.insert(index.values_.end(), v.vector.begin(), v.vector.end());
    }
    index.trees_.resize(n_trees);
    parallel_for(n_trees, threads, [&](std::size_t t) {
      Rng rng(derive_seed(seed, 0x7EE, t));
      std::vector<std::uint32_t> all(index.size());
      std::iota(all.begin(), all.end(), 0u);
      index.build_tree(index.trees_[t], std::move(all), rng);
    });
    return index;
  }

  /// Shared-priority-queue traversal over all trees until `budget` distinct
  /// candidates are collected, then exact re-ranking. Ties by ascending id.
  std::vector<std::pair<std::string, double>> search(std::span<const float> query, std::size_t k,
                                                     std::size_t budget, Warnings* warnings = nullptr) const {
    if (query.size() != dim_) throw Error("search: query dimension does not match index");
    if (k > size()) {
      warn(warnings, "search: k=" + std::to_string(k) + " exceeds index size " + std::to_string(size()));
      k = size();
    }
    if (k == 0) return {};
    budget = std::max(budget, k);
    using Entry = std::tuple<double, std::uint32_t, std::uint32_t>;  // priority, tree, node
    std::priority_queue<Entry> queue;
    for (std::uint32_t t = 0; t < trees_.size(); ++t) queue.emplace(std::numeric_limits<double>::infinity(), t, 0u);
    std::vector<bool> seen(size(), false);
    std::vector<std::uint32_t> candidates;
    while (!queue.empty() && candidates.size() < budget) {
      const auto [priority, t, n] = queue.top();
      queue.pop();
      const Node& node = trees_[t].nodes[n];
      if (node.leaf) {
        for (auto item : node.items) {
          if (!seen[item]) {
            seen[item] = true;
            candidates.push_back(item);
          }
        }
        continue;
      }
      const double m = margin(node, query);
      queue.emplace(std::min(priority, m), t, node.children[0]);
      queue.emplace(std::min(priority, -m), t, node.children[1]);
    }
    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(candidates.size());
    for (auto c : candidates) scored.emplace_back(cosine_distance<float, float>(item(c), query), c);
    auto cmp = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return ids_[a.second] < ids_[b.second];
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), cmp);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.emplace_back(ids_[scored[i].second], scored[i].first);
    return out;
  }

  // Binary layout (little-endian):
  //   "AIDX" | u32 version (=1) | u32 dim | u32 n_trees | u32 leaf_capacity |
  //   u64 item count | items: [u16 id length | id bytes | dim x f32] |
  //   per tree: u32 node count | nodes: u8 kind (0 split, 1 leaf) then
  //     split: dim x f32 normal | f32 offset | u32 child0 | u32 child1
  //     leaf:  u32 n | n x u32 item index
  std::string serialize() const {
    ByteWriter w;
    w.bytes("AIDX");
    w.le<std::uint32_t>(kVersion);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(dim_));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(trees_.size()));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(leaf_capacity_));
    w.le<std::uint64_t>(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      w.le<std::uint16_t>(static_cast<std::uint16_t>(ids_[i].size()));
      w.bytes(ids_[i]);
      for (float x : item(i)) w.le<float>(x);
    }
    for (const auto& tree : trees_) {
      w.le<std::uint32_t>(static_cast<std::uint32_t>(tree.nodes.size()));
      for (const auto& node : tree.nodes) {
        w.le<std::uint8_t>(node.leaf ? 1 : 0);
        if (node.leaf) {
          w.le<std::uint32_t>(static_cast<std::uint32_t>(node.items.size()));
          for (auto it : node.items) w.le<std::uint32_t>(it);
        } else {
          for (float x : node.normal) w.le<float>(x);
          w.le<float>(node.offset);
          w.le<std::uint32_t>(node.children[0]);
          w.le<std::uint32_t>(node.children[1]);
        }
      }
    }
    return w.take();
  }

  static AnnIndex deserialize(std::string_view bytes, const std::string& context = "index file") {
    ByteReader r(bytes, context);
    if (bytes.size() < 4 || r.bytes(4) != "AIDX") throw Error(context + ": magic mismatch at byte offset 0");
    const auto version = r.le<std::uint32_t>();
    if (version != kVersion) throw Error(context + ": unsupported version " + std::to_string(version));
    AnnIndex index;
    index.dim_ = r.le<std::uint32_t>();
    const auto n_trees = r.le<std::uint32_t>();
    index.leaf_capacity_ = r.le<std::uint32_t>();
    const auto count = r.le<std::uint64_t>();
    if (count > bytes.size()) throw Error(context + ": item count exceeds file size");
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto len = r.le<std::uint16_t>();
      index.ids_.emplace_back(r.bytes(len));
      for (std::size_t d = 0; d < index.dim_; ++d) index.values_.push_back(r.le<float>());
    }
    index.trees_.resize(n_trees);
    for (auto& tree : index.trees_) {
      const auto n_nodes = r.le<std::uint32_t>();
      if (n_nodes == 0 || n_nodes > bytes.size()) throw Error(context + ": bad node count");
      tree.nodes.resize(n_nodes);
      for (auto& node : tree.nodes) {
        const auto kind = r.le<std::uint8_t>();
        if (kind == 1) {
          node.leaf = true;
          const auto n = r.le<std::uint32_t>();
          for (std::uint32_t i = 0; i < n; ++i) {
            const auto it = r.le<std::uint32_t>();
            if (it >= count) throw Error(context + ": leaf item out of range");
            node.items.push_back(it);
          }
        } else if (kind == 0) {
          node.normal.resize(index.dim_);
          for (auto& x : node.normal) x = r.le<float>();
          node.offset = r.le<float>();
          node.children[0] = r.le<std::uint32_t>();
          node.children[1] = r.le<std::uint32_t>();
          if (node.children[0] >= n_nodes || node.children[1] >= n_nodes) {
            throw Error(context + ": child index out of range");
          }
        } else {
          throw Error(context + ": unknown node kind at byte offset " + std::to_string(r.offset() - 1));
        }
      }
    }
    if (!r.at_end()) throw Error(context + ": trailing bytes at byte offset " + std::to_string(r.offset()));
    return index;
  }

 private:
  static constexpr std::uint32_t kVersion = 1;

  double margin(const Node& node, std::span<const float> x) const {
    return dot<float, float>(node.normal, x) - static_cast<double>(node.offset);
  }

  std::uint32_t build_tree(Tree& tree, std::vector<std::uint32_t> items, Rng& rng) {
    const auto id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (items.size() <= leaf_capacity_) {
      tree.nodes[id].leaf = true;
      tree.nodes[id].items = std::move(items);
      return id;
    }
    std::vector<float> normal(dim_, 0.0f);
    float offset = 0.0f;
    std::vector<std::uint32_t> side[2];
    for (int attempt = 0; attempt < 5; ++attempt) {
      const auto i = items[uniform_index(rng, items.size())];
      auto j = items[uniform_index(rng, items.size() - 1)];
      if (j == i) j = items.back();
      std::vector<double> n(dim_);
      for (std::size_t d = 0; d < dim_; ++d) n[d] = static_cast<double>(item(i)[d]) - item(j)[d];
      if (!normalize<double>(n)) continue;
      double off = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) off += n[d] * (static_cast<double>(item(i)[d]) + item(j)[d]) / 2.0;
      normal.assign(n.begin(), n.end());
      offset = static_cast<float>(off);
      side[0].clear();
      side[1].clear();
      Node probe;
      probe.normal = normal;
      probe.offset = offset;
      for (auto it : items) {
        const double m = margin(probe, item(it));
        const int s = m > 0 ? 0 : m < 0 ? 1 : static_cast<int>(rng() & 1u);
        side[s].push_back(it);
      }
      if (!side[0].empty() && !side[1].empty()) break;
    }
    if (side[0].empty() || side[1].empty()) {
      // Degenerate (e.g. duplicate vectors): split by coin flips, searched on both sides.
      std::fill(normal.begin(), normal.end(), 0.0f);
      offset = 0.0f;
      side[0].clear();
      side[1].clear();
      for (auto it : items) side[rng() & 1u].push_back(it);
      if (side[0].empty() || side[1].empty()) {
        side[0].assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(items.size() / 2));
        side[1].assign(items.begin() + static_cast<std::ptrdiff_t>(items.size() / 2), items.end());
      }
    }
    items.clear();
    items.shrink_to_fit();
    const auto left = build_tree(tree, std::move(side[0]), rng);
    const auto right = build_tree(tree, std::move(side[1]), rng);
    Node& node = tree.nodes[id];
    node.normal = std::move(normal);
    node.offset = offset;
    node.children[0] = left;
    node.children[1] = right;
    return id;
  }

  std::size_t dim_ = 0;
  std::size_t leaf_capacity_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::vector<Tree> trees_;
};

inline AnnIndex build_index(std::span<const DocVector> vectors, std::size_t n_trees = 50,
                            std::size_t leaf_capacity = 32, std::uint64_t seed = 1) {
  return AnnIndex::build(vectors, n_trees, leaf_capacity, seed);
}

/// Top-k patents for a query. search_budget 0 means n_trees x k.
inline std::vector<std::pair<std::string, double>> search(const AnnIndex& index, const DocVector& query,
                                                          std::size_t k, std::size_t search_budget = 0,
                                                          Warnings* warnings = nullptr) {
  if (search_budget == 0) search_budget = index.n_trees() * k;
  return index.search(query.vector, k, search_budget, warnings);
}

// ---------------------------------------------------------------------------
// Matches

struct PatentMatch {
  std::string patent_id;
  int topic_id = 0;
  double distance = 0.0;
  std::size_t hit_count = 0;

  bool operator==(const PatentMatch&) const = default;
};

using QueryResult = std::vector<std::pair<std::string, double>>;

/// One match per retrieved patent: minimum distance over the topic's queries
/// and the number of queries that retrieved it; ascending by distance, then id.
inline std::vector<PatentMatch> aggregate_matches(std::span<const QueryResult> results, int topic_id) {
  std::unordered_map<std::string, PatentMatch> by_id;
  for (const auto& r : results) {
    std::unordered_set<std::string> in_query;
    for (const auto& [id, d] : r) {
      if (!in_query.insert(id).second) continue;
      auto [it, fresh] = by_id.try_emplace(id, PatentMatch{id, topic_id, d, 0});
      it->second.distance = std::min(it->second.distance, d);
      ++it->second.hit_count;
    }
  }
  std::vector<PatentMatch> out;
  out.reserve(by_id.size());
  for (auto& [id, m] : by_id) out.push_back(std::move(m));
  std::sort(out.begin(), out.end(), [](const PatentMatch& a, const PatentMatch& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.patent_id < b.patent_id;
  });
  return out;
}

inline std::string write_matches_jsonl(std::span<const PatentMatch> matches) {
  std::string out;
  for (const auto& m : matches) {
    nlohmann::ordered_json j = {
        {"topic_id", m.topic_id}, {"patent_id", m.patent_id}, {"distance", m.distance}, {"hit_count", m.hit_count}};
    out += j.dump() + '\n';
  }
  return out;
}

inline std::vector<PatentMatch> read_matches_jsonl(std::string_view text) {
  std::vector<PatentMatch> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("patent_id").get<std::string>(), j.at("topic_id").get<int>(), j.at("distance").get<double>(),
                   j.at("hit_count").get<std::size_t>()});
  }
  return out;
}

}  // namespace scitech
