#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "scitech/common.hpp"
#include "scitech/embed.hpp"
#include "scitech/ingest.hpp"

namespace scitech {

struct ClusterAssignment {
  std::vector<int> labels;  // -1 is noise
  std::size_t n_clusters = 0;
  std::map<int, double> stabilities;
  std::size_t min_cluster_size = 0;
  std::size_t min_samples = 0;
};

namespace hdbscan {

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double weight = 0.0;
};

/// Distance from each point to its min_samples-th nearest other point.
inline std::vector<double> core_distances(const Matrix& x, std::size_t min_samples) {
  const std::size_t n = x.rows;
  std::vector<double> core(n, 0.0);
  if (n < 2) return core;
  const std::size_t k = std::clamp<std::size_t>(min_samples, 1, n - 1);
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d[m++] = std::sqrt(squared_euclidean(x.row(i), x.row(j)));
    }
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    core[i] = d[k - 1];
  }
  return core;
}

/// Prim's algorithm on the implicit complete graph of mutual reachability
/// distances max(core(a), core(b), |a - b|).
inline std::vector<Edge> mutual_reachability_mst(const Matrix& x, const std::vector<double>& core) {
  const std::size_t n = x.rows;
  std::vector<Edge> mst;
  if (n < 2) return mst;
  mst.reserve(n - 1);
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> from(n, 0);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t added = 1; added < n; ++added) {
    std::size_t next = n;
    double next_w = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double d = std::max({core[current], core[j], std::sqrt(squared_euclidean(x.row(current), x.row(j)))});
      if (d < best[j]) {
        best[j] = d;
        from[j] = static_cast<std::uint32_t>(current);
      }
      if (best[j] < next_w || (best[j] == next_w && j < next)) {
        next_w = best[j];
        next = j;
      }
    }
    in_tree[next] = true;
    mst.push_back({from[next], static_cast<std::uint32_t>(next), next_w});
    current = next;
  }
  return mst;
}

/// Single-linkage hierarchy in which all merges at one distance level form a
/// single multiway node. Leaves 0..n-1 are points.
struct LinkageTree {
  struct Node {
    double height = 0.0;
    std::size_t size = 1;
    std::vector<std::uint32_t> children;
  };
  std::vector<Node> nodes;
  std::uint32_t root = 0;

  void collect_points(std::uint32_t node, std::vector<std::uint32_t>& out) const {
    std::vector<std::uint32_t> stack = {node};
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      if (nodes[v].children.empty()) out.push_back(v);
      for (auto c : nodes[v].children) stack.push_back(c);
    }
  }
};

inline LinkageTree build_linkage_tree(std::size_t n, std::vector<Edge> mst) {
  LinkageTree tree;
  tree.nodes.resize(n);
  if (n == 0) return tree;
  std::sort(mst.begin(), mst.end(), [](const Edge& x, const Edge& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    return std::minmax(x.a, x.b) < std::minmax(y.a, y.b);
  });
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  std::vector<std::uint32_t> top(n);
  std::iota(top.begin(), top.end(), 0u);

  std::size_t i = 0;
  while (i < mst.size()) {
    std::size_t j = i;
    while (j < mst.size() && mst[j].weight == mst[i].weight) ++j;
    std::vector<std::uint32_t> old_roots;
    for (std::size_t e = i; e < j; ++e) {
      old_roots.push_back(find(mst[e].a));
      old_roots.push_back(find(mst[e].b));
    }
    std::sort(old_roots.begin(), old_roots.end());
    old_roots.erase(std::unique(old_roots.begin(), old_roots.end()), old_roots.end());
    std::vector<std::pair<std::uint32_t, std::uint32_t>> old_tops;  // old root, its node
    for (auto r : old_roots) old_tops.emplace_back(r, top[r]);
    for (std::size_t e = i; e < j; ++e) {
      const auto ra = find(mst[e].a);
      const auto rb = find(mst[e].b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::map<std::uint32_t, std::vector<std::uint32_t>> grouped;
    for (auto [r, node] : old_tops) grouped[find(r)].push_back(node);
    for (auto& [new_root, children] : grouped) {
      LinkageTree::Node node;
      node.height = mst[i].weight;
      node.size = 0;
      std::sort(children.begin(), children.end());
      for (auto c : children) node.size += tree.nodes[c].size;
      node.children = std::move(children);
      top[new_root] = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.push_back(std::move(node));
    }
    i = j;
  }
  tree.root = top[find(0)];
  return tree;
}

struct CondensedCluster {
  int parent = -1;
  double lambda_birth = 0.0;
  double stability = 0.0;
  std::uint32_t birth_node = 0;
  std::size_t size = 0;
  std::vector<std::size_t> children;
};

/// Lambda (inverse distance) of a merge height. Zero heights (duplicate points)
/// map to a large finite value so stabilities stay finite.
inline double lambda_of(double height, double max_height) {
  const double floor = std::max(max_height * 1e-12, std::numeric_limits<double>::min());
  return 1.0 / std::max(height, floor);
}

/// Condenses the linkage tree: at each level, child components with at least
/// min_cluster_size points continue (one child) or become new clusters (two or
/// more); smaller components fall out as noise of the current cluster.
inline std::vector<CondensedCluster> condense(const LinkageTree& tree, std::size_t min_cluster_size) {
  double max_height = 0.0;
  for (const auto& nd : tree.nodes) max_height = std::max(max_height, nd.height);
  std::vector<CondensedCluster> clusters;
  clusters.push_back({-1, 0.0, 0.0, tree.root, tree.nodes[tree.root].size, {}});
  std::vector<std::pair<std::size_t, std::uint32_t>> work = {{0, tree.root}};
  while (!work.empty()) {
    auto [c, node] = work.back();
    work.pop_back();
    while (true) {
      const auto& nd = tree.nodes[node];
      const double birth = clusters[c].lambda_birth;
      if (nd.children.empty()) {
        clusters[c].stability += (lambda_of(0.0, max_height) - birth) * 1.0;
        break;
      }
      const double lambda = lambda_of(nd.height, max_height);
      std::vector<std::uint32_t> big;
      for (auto ch : nd.children) {
        if (tree.nodes[ch].size >= min_cluster_size) big.push_back(ch);
      }
      if (big.size() >= 2) {
        clusters[c].stability += (lambda - birth) * static_cast<double>(nd.size);
        for (auto ch : big) {
          const std::size_t id = clusters.size();
          clusters.push_back({static_cast<int>(c), lambda, 0.0, ch, tree.nodes[ch].size, {}});
          clusters[c].children.push_back(id);
          work.emplace_back(id, ch);
        }
        break;
      }
      if (big.size() == 1) {
        const double leaving = static_cast<double>(nd.size - tree.nodes[big[0]].size);
        clusters[c].stability += (lambda - birth) * leaving;
        node = big[0];
        continue;
      }
      clusters[c].stability += (lambda - birth) * static_cast<double>(nd.size);
      break;
    }
  }
  return clusters;
}

/// Excess-of-mass selection over non-root clusters. On equal totals the parent
/// is preferred.
inline std::vector<std::size_t> select_eom(const std::vector<CondensedCluster>& clusters) {
  const std::size_t m = clusters.size();
  std::vector<double> best(m, 0.0);
  std::vector<bool> selected(m, false);
  for (std::size_t c = m; c-- > 1;) {
    double child_sum = 0.0;
    for (auto ch : clusters[c].children) child_sum += best[ch];
    if (clusters[c].children.empty() || clusters[c].stability >= child_sum) {
      selected[c] = true;
      best[c] = clusters[c].stability;
    } else {
      best[c] = child_sum;
    }
  }
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack(clusters[0].children.rbegin(), clusters[0].children.rend());
  while (!stack.empty()) {
    const auto c = stack.back();
    stack.pop_back();
    if (selected[c]) {
      out.push_back(c);
      continue;
    }
    for (auto it = clusters[c].children.rbegin(); it != clusters[c].children.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

}  // namespace hdbscan

/// HDBSCAN over rows of `points` with Euclidean distance.
///
/// Core distance is the distance to the min_samples-th nearest other point,
/// the hierarchy is the exact MST of mutual reachability distances, clusters
/// are selected by excess of mass. Every point that belongs to a selected
/// cluster at its birth carries that cluster's label; everything else is -1.
inline ClusterAssignment hdbscan_fit(const Matrix& points, std::size_t min_cluster_size,
                                     std::size_t min_samples, Warnings* warnings = nullptr) {
  const std::size_t n = points.rows;
  if (min_cluster_size < 2) {
    warn(warnings, "hdbscan: min_cluster_size raised to 2");
    min_cluster_size = 2;
  }
  if (min_samples == 0) throw Error("hdbscan: min_samples must be positive");
  ClusterAssignment out;
  out.labels.assign(n, -1);
  out.min_cluster_size = min_cluster_size;
  out.min_samples = min_samples;
  if (n < min_cluster_size) {
    warn(warnings, "hdbscan: " + std::to_string(n) + " points < min_cluster_size " +
                       std::to_string(min_cluster_size) + "; all points are noise");
    return out;
  }
  const auto core = hdbscan::core_distances(points, min_samples);
  const auto mst = hdbscan::mutual_reachability_mst(points, core);
  const auto tree = hdbscan::build_linkage_tree(n, mst);
  const auto clusters = hdbscan::condense(tree, min_cluster_size);
  const auto chosen = hdbscan::select_eom(clusters);

  std::vector<std::pair<std::uint32_t, std::size_t>> ordered;  // smallest member, cluster
  std::vector<std::vector<std::uint32_t>> members(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    tree.collect_points(clusters[chosen[i]].birth_node, members[i]);
    ordered.emplace_back(*std::min_element(members[i].begin(), members[i].end()), i);
  }
  std::sort(ordered.begin(), ordered.end());
  for (std::size_t label = 0; label < ordered.size(); ++label) {
    const auto i = ordered[label].second;
    for (auto p : members[i]) out.labels[p] = static_cast<int>(label);
    out.stabilities[static_cast<int>(label)] = clusters[chosen[i]].stability;
  }
  out.n_clusters = ordered.size();
  return out;
}

// ---------------------------------------------------------------------------
// Topics

struct Topic {
  int topic_id = 0;
  std::vector<std::string> member_doc_ids;
  std::vector<float> centroid;  // unit length, full embedding space
  std::size_t size = 0;
  std::map<int, std::size_t> yearly_counts;
  double dispersion = 0.0;  // mean member-to-centroid cosine distance
};

struct CatchAllRule {
  double size_ratio = 3.0;         // largest > ratio x second largest
  double dispersion_excess = 0.5;  // and dispersion > (1 + excess) x median
};

struct TopicSet {
  std::vector<Topic> topics;
  std::optional<Topic> catch_all;
};

/// One topic per cluster label, with centroids averaged in the original
/// embedding space. The largest cluster is set aside as catch-all when it is
/// both oversized and unusually diffuse (see CatchAllRule).
inline TopicSet extract_topics(const ClusterAssignment& assignment, std::span<const PublicationRecord> docs,
                               std::span<const DocVector> full_vectors, const CatchAllRule& rule = {},
                               Warnings* warnings = nullptr) {
  if (assignment.labels.size() != docs.size() || docs.size() != full_vectors.size()) {
    throw Error("extract_topics: assignment, documents and vectors are not aligned");
  }
  std::map<int, Topic> by_label;
  const std::size_t dim = full_vectors.empty() ? 0 : full_vectors.front().vector.size();
  std::map<int, std::vector<double>> sums;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const int label = assignment.labels[i];
    if (label < 0) continue;
    auto& t = by_label[label];
    t.topic_id = label;
    t.member_doc_ids.push_back(docs[i].doc_id);
    ++t.yearly_counts[docs[i].year];
    auto& s = sums[label];
    s.resize(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) s[d] += full_vectors[i].vector[d];
  }
  for (auto& [label, t] : by_label) {
    t.size = t.member_doc_ids.size();
    auto& s = sums[label];
    if (!normalize<double>(s)) {
      warn(warnings, "topic " + std::to_string(label) + " has a zero centroid");
    }
    t.centroid.assign(s.begin(), s.end());
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const int label = assignment.labels[i];
    if (label < 0) continue;
    auto& t = by_label[label];
    t.dispersion += cosine_distance<float, float>(full_vectors[i].view(), t.centroid);
  }
  for (auto& [label, t] : by_label) t.dispersion /= static_cast<double>(t.size);

  TopicSet out;
  for (auto& [label, t] : by_label) out.topics.push_back(std::move(t));
  if (out.topics.size() >= 2) {
    std::vector<std::size_t> order(out.topics.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.topics[a].size > out.topics[b].size; });
    std::vector<double> disp;
    for (const auto& t : out.topics) disp.push_back(t.dispersion);
    std::sort(disp.begin(), disp.end());
    const std::size_t m = disp.size();
    const double median = m % 2 ? disp[m / 2] : (disp[m / 2 - 1] + disp[m / 2]) / 2.0;
    const auto& largest = out.topics[order[0]];
    const auto& second = out.topics[order[1]];
    if (static_cast<double>(largest.size) > rule.size_ratio * static_cast<double>(second.size) &&
        largest.dispersion > (1.0 + rule.dispersion_excess) * median) {
      warn(warnings, "topic " + std::to_string(largest.topic_id) + " (size " + std::to_string(largest.size) +
                         ") excluded as catch-all cluster");
      out.catch_all = largest;
      out.topics.erase(out.topics.begin() + static_cast<std::ptrdiff_t>(order[0]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dendrogram

struct Merge {
  std::size_t node_a = 0;
  std::size_t node_b = 0;
  double height = 0.0;
  std::size_t new_node = 0;

  bool operator==(const Merge&) const = default;
};

/// Leaves are 0..T-1; the i-th merge creates node T + i.
struct Dendrogram {
  std::vector<Merge> merges;
};

/// Average-linkage agglomeration of a symmetric distance matrix, updating
/// cluster distances with the Lance-Williams rule. Among equal minimum
/// distances the lexicographically smallest (node_a, node_b) pair merges first.
inline Dendrogram average_linkage(const Matrix& distances) {
  const std::size_t T = distances.rows;
  Dendrogram out;
  if (T < 2) return out;
  std::vector<std::size_t> sizes(T, 1);
  // Distances between active clusters, indexed by slot; slot_node maps slot to node id.
  Matrix d = distances;
  std::vector<std::size_t> slot_node(T);
  std::iota(slot_node.begin(), slot_node.end(), 0);
  std::vector<bool> alive(T, true);
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t step = 0; step + 1 < T; ++step) {
    std::size_t bi = T, bj = T;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> best_nodes{T * 2, T * 2};
    for (std::size_t i = 0; i < T; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < T; ++j) {
        if (!alive[j]) continue;
        const std::pair<std::size_t, std::size_t> nodes = std::minmax(slot_node[i], slot_node[j]);
        if (d(i, j) < best || (d(i, j) == best && nodes < best_nodes)) {
          best = d(i, j);
          bi = i;
          bj = j;
          best_nodes = nodes;
        }
      }
    }
    if (best < last - 1e-9) {
      throw std::logic_error("average_linkage: non-monotone merge height (bug)");
    }
    last = std::max(last, best);
    const std::size_t new_node = T + step;
    out.merges.push_back({best_nodes.first, best_nodes.second, best, new_node});
    const double si = static_cast<double>(sizes[bi]);
    const double sj = static_cast<double>(sizes[bj]);
    for (std::size_t k = 0; k < T; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double v = (si * d(bi, k) + sj * d(bj, k)) / (si + sj);
      d(bi, k) = v;
      d(k, bi) = v;
    }
    sizes[bi] += sizes[bj];
    alive[bj] = false;
    slot_node[bi] = new_node;
  }
  return out;
}

inline Matrix centroid_distances(std::span<const Topic> topics) {
  Matrix d(topics.size(), topics.size());
  for (std::size_t i = 0; i < topics.size(); ++i) {
    for (std::size_t j = i + 1; j < topics.size(); ++j) {
      d(i, j) = d(j, i) = cosine_distance<float, float>(topics[i].centroid, topics[j].centroid);
    }
  }
  return d;
}

/// Average-linkage dendrogram over topic centroids under cosine distance. Leaf
/// i is topics[i].
inline Dendrogram agglomerate_topics(std::span<const Topic> topics) {
  if (topics.size() < 2) return {};
  return average_linkage(centroid_distances(topics));
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string write_assignment_jsonl(const ClusterAssignment& a, std::span<const std::string> doc_ids) {
  if (doc_ids.size() != a.labels.size()) throw Error("write_assignment: ids and labels are not aligned");
  std::string out;
  nlohmann::ordered_json header = {{"n_clusters", a.n_clusters},
                                   {"min_cluster_size", a.min_cluster_size},
                                   {"min_samples", a.min_samples}};
  auto stab = nlohmann::ordered_json::object();
  for (const auto& [label, s] : a.stabilities) stab[std::to_string(label)] = s;
  header["stabilities"] = std::move(stab);
  out += header.dump() + '\n';
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    nlohmann::ordered_json row = {{"doc_id", doc_ids[i]}, {"label", a.labels[i]}};
    out += row.dump() + '\n';
  }
  return out;
}

inline nlohmann::ordered_json to_json(const Topic& t, bool with_members = true) {
  auto years = nlohmann::ordered_json::object();
  for (const auto& [y, c] : t.yearly_counts) years[std::to_string(y)] = c;
  nlohmann::ordered_json j = {{"topic_id", t.topic_id}, {"size", t.size}, {"dispersion", t.dispersion},
                              {"yearly_counts", std::move(years)}};
  if (with_members) {
    j["member_doc_ids"] = t.member_doc_ids;
    j["centroid"] = t.centroid;
  }
  return j;
}

inline Topic topic_from_json(const nlohmann::json& j) {
  Topic t;
  t.topic_id = j.at("topic_id").get<int>();
  t.size = j.at("size").get<std::size_t>();
  t.dispersion = j.at("dispersion").get<double>();
  for (const auto& [y, c] : j.at("yearly_counts").items()) t.yearly_counts[std::stoi(y)] = c.get<std::size_t>();
  t.member_doc_ids = j.at("member_doc_ids").get<std::vector<std::string>>();
  t.centroid = j.at("centroid").get<std::vector<float>>();
  return t;
}

/// One topic per line; a catch-all topic, when present, is written last with
/// "catch_all": true.
inline std::string write_topics_jsonl(const TopicSet& set) {
  std::string out;
  for (const auto& t : set.topics) out += to_json(t).dump() + '\n';
  if (set.catch_all) {
    auto j = to_json(*set.catch_all);
    j["catch_all"] = true;
    out += j.dump() + '\n';
  }
  return out;
}

inline TopicSet read_topics_jsonl(std::string_view text) {
  TopicSet set;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.value("catch_all", false)) {
      set.catch_all = topic_from_json(j);
    } else {
      set.topics.push_back(topic_from_json(j));
    }
  }
  return set;
}

inline nlohmann::ordered_json to_json(const Dendrogram& d) {
  auto merges = nlohmann::ordered_json::array();
  for (const auto& m : d.merges) {
    merges.push_back({{"node_a", m.node_a}, {"node_b", m.node_b}, {"height", m.height}, {"new_node", m.new_node}});
  }
  return merges;
}

inline Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram d;
  for (const auto& m : j) {
    d.merges.push_back({m.at("node_a").get<std::size_t>(), m.at("node_b").get<std::size_t>(),
                        m.at("height").get<double>(), m.at("new_node").get<std::size_t>()});
  }
  return d;
}

}  // namespace scitech
