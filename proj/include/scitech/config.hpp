#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "scitech/cluster.hpp"
#include "scitech/common.hpp"
#include "scitech/embed.hpp"
#include "scitech/ingest.hpp"
#include "scitech/reduce.hpp"

namespace scitech {

struct InputConfig {
  std::string publications;
  std::string publications_format = "jsonl";
  std::string patents;
  std::string patents_format = "jsonl";
  std::string publication_vectors;  // optional external document vectors
  std::string annotations;          // optional NER annotations; RAKE otherwise
  std::string stopwords;            // optional, one word per line
};

struct IngestConfig {
  std::size_t per_year_top_cited = 2000;
  bool priority_ip5_only = true;
};

struct EmbedConfig {
  std::size_t min_count = 5;
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double initial_lr = 0.025;
  double subsample = 0.0;
  std::size_t threads = 1;
  double max_missing_fraction = 0.05;
};

struct ReduceConfig {
  std::string method = "neighbor_embedding";
  std::size_t k_neighbors = 15;
  std::size_t dim_out = 5;
  std::size_t n_epochs = 200;
  double min_dist = 0.1;
};

struct ClusterConfig {
  std::size_t min_cluster_size = 50;
  std::size_t min_samples = 50;
  double catch_all_size_ratio = 3.0;
  double catch_all_dispersion_excess = 0.5;
};

struct QueryConfig {
  std::size_t top_k_keywords = 100;
  std::size_t queries_per_topic = 50;
  std::size_t query_length = 25;
};

struct IndexConfig {
  std::size_t n_trees = 50;
  std::size_t leaf_capacity = 32;
};

struct SearchConfig {
  std::size_t results_per_query = 100;
  std::size_t search_budget = 0;  // 0 means n_trees x results_per_query
  std::size_t threads = 0;        // 0 means hardware concurrency
};

struct AnalyticsConfig {
  double bin_width = 0.02;
  double min_weight = 1.0;
  bool whole_counting = false;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  InputConfig inputs;
  IngestConfig ingest;
  EmbedConfig embed;
  ReduceConfig reduce;
  ClusterConfig cluster;
  QueryConfig queries;
  IndexConfig index;
  SearchConfig search;
  AnalyticsConfig analytics;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(InputConfig, publications, publications_format, patents,
                                                patents_format, publication_vectors, annotations, stopwords)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IngestConfig, per_year_top_cited, priority_ip5_only)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EmbedConfig, min_count, dim, window, negatives, epochs, initial_lr,
                                                subsample, threads, max_missing_fraction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReduceConfig, method, k_neighbors, dim_out, n_epochs, min_dist)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ClusterConfig, min_cluster_size, min_samples, catch_all_size_ratio,
                                                catch_all_dispersion_excess)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(QueryConfig, top_k_keywords, queries_per_topic, query_length)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IndexConfig, n_trees, leaf_capacity)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SearchConfig, results_per_query, search_budget, threads)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AnalyticsConfig, bin_width, min_weight, whole_counting)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, seed, inputs, ingest, embed, reduce, cluster, queries,
                                                index, search, analytics)

namespace detail {

/// Rejects keys the config types do not know, so typos fail loudly instead of
/// silently falling back to defaults.
inline void check_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& where) {
  if (!given.is_object()) throw Error("config: " + where + " must be an object");
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw Error("config: unknown key '" + where + key + "'");
    if (known.at(key).is_object()) check_keys(value, known.at(key), where + key + ".");
  }
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw Error("config: " + message);
}

}  // namespace detail

inline void validate(const PipelineConfig& c) {
  using detail::require;
  parse_table_format(c.inputs.publications_format);
  parse_table_format(c.inputs.patents_format);
  require(c.ingest.per_year_top_cited >= 1, "ingest.per_year_top_cited must be >= 1");
  require(c.embed.min_count >= 1, "embed.min_count must be >= 1");
  require(c.embed.dim >= 2 && c.embed.dim <= 4096, "embed.dim must be in [2, 4096]");
  require(c.embed.window >= 1, "embed.window must be >= 1");
  require(c.embed.negatives >= 1, "embed.negatives must be >= 1");
  require(c.embed.epochs >= 1, "embed.epochs must be >= 1");
  require(c.embed.initial_lr > 0.0 && c.embed.initial_lr <= 1.0, "embed.initial_lr must be in (0, 1]");
  require(c.embed.subsample >= 0.0, "embed.subsample must be >= 0");
  require(c.embed.threads >= 1, "embed.threads must be >= 1");
  require(c.embed.max_missing_fraction >= 0.0 && c.embed.max_missing_fraction <= 1.0,
          "embed.max_missing_fraction must be in [0, 1]");
  require(c.reduce.method == "pca" || c.reduce.method == "neighbor_embedding",
          "reduce.method must be 'pca' or 'neighbor_embedding'");
  require(c.reduce.k_neighbors >= 2, "reduce.k_neighbors must be >= 2");
  require(c.reduce.dim_out >= 1, "reduce.dim_out must be >= 1");
  require(c.reduce.n_epochs >= 1, "reduce.n_epochs must be >= 1");
  require(c.reduce.min_dist >= 0.0 && c.reduce.min_dist < 1.0, "reduce.min_dist must be in [0, 1)");
  require(c.cluster.min_cluster_size >= 2, "cluster.min_cluster_size must be >= 2");
  require(c.cluster.min_samples >= 1, "cluster.min_samples must be >= 1");
  require(c.cluster.catch_all_size_ratio >= 1.0, "cluster.catch_all_size_ratio must be >= 1");
  require(c.cluster.catch_all_dispersion_excess >= 0.0, "cluster.catch_all_dispersion_excess must be >= 0");
  require(c.queries.top_k_keywords >= 1, "queries.top_k_keywords must be >= 1");
  require(c.queries.queries_per_topic >= 1, "queries.queries_per_topic must be >= 1");
  require(c.queries.query_length >= 1, "queries.query_length must be >= 1");
  require(c.index.n_trees >= 1, "index.n_trees must be >= 1");
  require(c.index.leaf_capacity >= 1, "index.leaf_capacity must be >= 1");
  require(c.search.results_per_query >= 1, "search.results_per_query must be >= 1");
  require(c.analytics.bin_width > 0.0 && c.analytics.bin_width <= 2.0, "analytics.bin_width must be in (0, 2]");
  require(c.analytics.min_weight > 0.0, "analytics.min_weight must be > 0");
}

/// Parses a config document. Relative input paths resolve against base_dir.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  detail::check_keys(j, nlohmann::json(PipelineConfig{}), "");
  PipelineConfig c;
  try {
    c = j.get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative() && !base_dir.empty()) {
      p = (base_dir / p).lexically_normal().string();
    }
  };
  resolve(c.inputs.publications);
  resolve(c.inputs.patents);
  resolve(c.inputs.publication_vectors);
  resolve(c.inputs.annotations);
  resolve(c.inputs.stopwords);
  validate(c);
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), std::filesystem::absolute(path).parent_path());
}

inline nlohmann::ordered_json to_ordered_json(const PipelineConfig& c) {
  return nlohmann::ordered_json(nlohmann::json(c));
}

inline SgnsParams sgns_params(const PipelineConfig& c) {
  SgnsParams p;
  p.dim = c.embed.dim;
  p.window = c.embed.window;
  p.negatives = c.embed.negatives;
  p.epochs = c.embed.epochs;
  p.initial_lr = c.embed.initial_lr;
  p.subsample = c.embed.subsample;
  p.threads = c.embed.threads;
  p.seed = derive_seed(c.seed, 0xE3BEDu);
  return p;
}

inline NeighborEmbeddingParams neighbor_embedding_params(const PipelineConfig& c) {
  NeighborEmbeddingParams p;
  p.dim_out = c.reduce.dim_out;
  p.n_epochs = c.reduce.n_epochs;
  p.min_dist = c.reduce.min_dist;
  p.seed = derive_seed(c.seed, 0x4ED0Cu);
  return p;
}

inline CatchAllRule catch_all_rule(const PipelineConfig& c) {
  return {c.cluster.catch_all_size_ratio, c.cluster.catch_all_dispersion_excess};
}

}  // namespace scitech
