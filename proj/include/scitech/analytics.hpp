#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "scitech/cluster.hpp"
#include "scitech/ingest.hpp"
#include "scitech/linker.hpp"

namespace scitech {

// ---------------------------------------------------------------------------
// Topics over time

struct TopicYearCount {
  int topic_id = 0;
  int year = 0;
  std::size_t count = 0;

  bool operator==(const TopicYearCount&) const = default;
};

/// Per-topic yearly counts over the common year range of all topics, with
/// zero rows for years a topic has no members.
inline std::vector<TopicYearCount> topics_over_time(std::span<const Topic> topics) {
  std::vector<TopicYearCount> out;
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::min();
  for (const auto& t : topics) {
    for (const auto& [year, c] : t.yearly_counts) {
      if (c == 0) continue;
      lo = std::min(lo, year);
      hi = std::max(hi, year);
    }
  }
  if (lo > hi) return out;
  for (const auto& t : topics) {
    for (int y = lo; y <= hi; ++y) {
      auto it = t.yearly_counts.find(y);
      out.push_back({t.topic_id, y, it == t.yearly_counts.end() ? 0 : it->second});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance distributions

struct DistanceDistribution {
  int year = 0;
  double bin_width = 0.02;
  std::vector<std::pair<double, std::size_t>> histogram;  // (lower edge, count)
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

inline constexpr double kMaxCosineDistance = 2.0;

inline std::size_t bin_count(double bin_width) {
  return static_cast<std::size_t>(std::ceil(kMaxCosineDistance / bin_width - 1e-9));
}

/// Bin index for distance d; the closing edge 2.0 falls in the last bin.
inline std::size_t bin_of(double d, double bin_width) {
  const auto bins = bin_count(bin_width);
  const auto raw = static_cast<std::size_t>(std::floor(std::max(0.0, d) / bin_width));
  return std::min(raw, bins - 1);
}

/// Groups matches by the matched patent's priority year. Matches whose patent
/// id is unknown are skipped with a diagnostic.
inline std::vector<DistanceDistribution> distance_by_year(std::span<const PatentMatch> matches,
                                                          std::span<const PatentRecord> patents,
                                                          double bin_width = 0.02,
                                                          std::vector<Diagnostic>* diagnostics = nullptr) {
  if (!(bin_width > 0.0) || bin_width > kMaxCosineDistance) {
    throw Error("distance_by_year: bin_width must be in (0, 2]");
  }
  std::unordered_map<std::string, int> year_of;
  for (const auto& p : patents) year_of.emplace(p.patent_id, p.priority_year);
  std::map<int, std::vector<double>> by_year;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    auto it = year_of.find(matches[i].patent_id);
    if (it == year_of.end()) {
      if (diagnostics != nullptr) {
        diagnostics->push_back({i + 1, "unknown patent_id '" + matches[i].patent_id + "'; match skipped"});
      }
      continue;
    }
    by_year[it->second].push_back(matches[i].distance);
  }
  const auto bins = bin_count(bin_width);
  std::vector<DistanceDistribution> out;
  for (const auto& [year, ds] : by_year) {
    DistanceDistribution dist;
    dist.year = year;
    dist.bin_width = bin_width;
    dist.n = ds.size();
    dist.histogram.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) dist.histogram[b] = {static_cast<double>(b) * bin_width, 0};
    double sum = 0.0;
    for (double d : ds) {
      ++dist.histogram[bin_of(d, bin_width)].second;
      sum += d;
    }
    dist.mean = sum / static_cast<double>(ds.size());
    double ss = 0.0;
    for (double d : ds) ss += (d - dist.mean) * (d - dist.mean);
    dist.stddev = std::sqrt(ss / static_cast<double>(ds.size()));
    out.push_back(std::move(dist));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Counts

enum class CountKey { applicant_country, tech_field, topic };

inline CountKey parse_count_key(std::string_view s) {
  if (s == "applicant_country") return CountKey::applicant_country;
  if (s == "tech_field") return CountKey::tech_field;
  if (s == "topic") return CountKey::topic;
  throw Error("unknown count key '" + std::string(s) + "'");
}

inline std::string to_string(CountKey k) {
  switch (k) {
    case CountKey::applicant_country: return "applicant_country";
    case CountKey::tech_field: return "tech_field";
    case CountKey::topic: return "topic";
  }
  return "";
}

inline constexpr const char* kUnknownKey = "unknown";

struct KeyCount {
  std::string key;
  double count = 0.0;
};

/// Counts matched patents (each patent once, however many topics matched it)
/// by key value. A patent with m distinct values adds 1/m to each under
/// fractional counting, 1 to each under whole counting. Patents with no value
/// count under "unknown". Sorted by descending count, then key.
///
/// Fractional shares are accumulated as integer tallies per denominator m and
/// summed once at the end, so the result does not depend on input order.
inline std::vector<KeyCount> count_by(std::span<const PatentMatch> matches, std::span<const PatentRecord> patents,
                                      CountKey key, bool whole_counting = false) {
  std::unordered_map<std::string, const PatentRecord*> by_id;
  for (const auto& p : patents) by_id.emplace(p.patent_id, &p);
  std::map<std::string, std::set<std::string>> values;  // patent -> key values
  for (const auto& m : matches) {
    auto& v = values[m.patent_id];
    if (key == CountKey::topic) {
      v.insert(std::to_string(m.topic_id));
      continue;
    }
    auto it = by_id.find(m.patent_id);
    if (it == by_id.end()) continue;
    if (key == CountKey::applicant_country) {
      for (const auto& c : it->second->applicant_countries) v.insert(c);
    } else {
      for (int f : it->second->tech_fields) v.insert(std::to_string(f));
    }
  }
  std::map<std::string, std::map<std::size_t, std::uint64_t>> tallies;
  for (auto& [patent, v] : values) {
    if (v.empty()) v.insert(kUnknownKey);
    const std::size_t m = whole_counting ? 1 : v.size();
    for (const auto& value : v) ++tallies[value][m];
  }
  std::vector<KeyCount> out;
  for (const auto& [value, per_m] : tallies) {
    long double total = 0.0L;
    for (const auto& [m, c] : per_m) total += static_cast<long double>(c) / static_cast<long double>(m);
    out.push_back({value, static_cast<double>(total)});
  }
  std::sort(out.begin(), out.end(), [](const KeyCount& a, const KeyCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.key < b.key;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Technology-field relatedness

struct RelatednessEdge {
  int field_i = 0;
  int field_j = 0;  // field_i < field_j
  std::size_t cooccurrence = 0;
  double weight = 0.0;
};

struct RelatednessNetwork {
  std::map<int, std::size_t> nodes;                    // field -> C_i
  std::map<std::pair<int, int>, std::size_t> cooccurrence;  // (i < j) -> C_ij
  std::vector<RelatednessEdge> edges;
  std::size_t n = 0;  // matched patents with at least one field

  double weight(int i, int j) const {
    if (i == j) return 0.0;
    auto it = cooccurrence.find(std::minmax(i, j));
    if (it == cooccurrence.end()) return 0.0;
    return static_cast<double>(n) * static_cast<double>(it->second) /
           (static_cast<double>(nodes.at(i)) * static_cast<double>(nodes.at(j)));
  }
};

/// Association strength a_ij = N C_ij / (C_i C_j) over the distinct matched
/// patents; edges with a_ij >= min_weight are kept.
inline RelatednessNetwork relatedness_network(std::span<const PatentMatch> matches,
                                              std::span<const PatentRecord> patents, double min_weight = 1.0) {
  if (!(min_weight > 0.0)) throw Error("relatedness_network: min_weight must be positive");
  std::unordered_map<std::string, const PatentRecord*> by_id;
  for (const auto& p : patents) by_id.emplace(p.patent_id, &p);
  std::set<std::string> matched;
  for (const auto& m : matches) matched.insert(m.patent_id);
  RelatednessNetwork net;
  for (const auto& id : matched) {
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    const std::set<int> fields(it->second->tech_fields.begin(), it->second->tech_fields.end());
    if (fields.empty()) continue;
    ++net.n;
    for (int f : fields) ++net.nodes[f];
    for (auto a = fields.begin(); a != fields.end(); ++a) {
      for (auto b = std::next(a); b != fields.end(); ++b) ++net.cooccurrence[{*a, *b}];
    }
  }
  for (const auto& [pair, c] : net.cooccurrence) {
    const double w = net.weight(pair.first, pair.second);
    if (w >= min_weight) net.edges.push_back({pair.first, pair.second, c, w});
  }
  return net;
}

// ---------------------------------------------------------------------------
// Emitters

namespace detail {

inline std::string format_real(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(std::span<const TopicYearCount> rows) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rows) out.push_back({{"topic_id", r.topic_id}, {"year", r.year}, {"count", r.count}});
  return out;
}

inline std::string to_csv(std::span<const TopicYearCount> rows) {
  std::string out = "topic_id,year,count\n";
  for (const auto& r : rows) {
    out += std::to_string(r.topic_id) + ',' + std::to_string(r.year) + ',' + std::to_string(r.count) + '\n';
  }
  return out;
}

inline nlohmann::ordered_json to_json(std::span<const DistanceDistribution> dists) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& d : dists) {
    auto bins = nlohmann::ordered_json::array();
    for (const auto& [edge, c] : d.histogram) {
      bins.push_back({{"lower", edge}, {"upper", edge + d.bin_width}, {"count", c}});
    }
    out.push_back({{"year", d.year},
                   {"n", d.n},
                   {"mean", d.mean},
                   {"stddev", d.stddev},
                   {"bin_width", d.bin_width},
                   {"bins", std::move(bins)}});
  }
  return out;
}

inline std::string to_csv(std::span<const DistanceDistribution> dists) {
  std::string out = "year,bin_lower,bin_upper,count,n,mean,stddev\n";
  for (const auto& d : dists) {
    for (const auto& [edge, c] : d.histogram) {
      out += std::to_string(d.year) + ',' + detail::format_real(edge) + ',' +
             detail::format_real(edge + d.bin_width) + ',' + std::to_string(c) + ',' + std::to_string(d.n) + ',' +
             detail::format_real(d.mean) + ',' + detail::format_real(d.stddev) + '\n';
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(std::span<const KeyCount> rows) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rows) out.push_back({{"key", r.key}, {"count", r.count}});
  return out;
}

inline std::string to_csv(std::span<const KeyCount> rows) {
  std::string out = "key,count\n";
  for (const auto& r : rows) out += detail::csv_cell(r.key) + ',' + detail::format_real(r.count) + '\n';
  return out;
}

inline nlohmann::ordered_json to_json(const RelatednessNetwork& net) {
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& [f, c] : net.nodes) nodes.push_back({{"field", f}, {"count", c}});
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : net.edges) {
    edges.push_back({{"source", e.field_i}, {"target", e.field_j}, {"cooccurrence", e.cooccurrence}, {"weight", e.weight}});
  }
  return {{"n", net.n}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

inline std::string to_csv(const RelatednessNetwork& net) {
  std::string out = "source,target,cooccurrence,weight\n";
  for (const auto& e : net.edges) {
    out += std::to_string(e.field_i) + ',' + std::to_string(e.field_j) + ',' + std::to_string(e.cooccurrence) + ',' +
           detail::format_real(e.weight) + '\n';
  }
  return out;
}

}  // namespace scitech
