#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scitech/analytics.hpp"
#include "scitech/cluster.hpp"
#include "scitech/config.hpp"
#include "scitech/embed.hpp"
#include "scitech/ingest.hpp"
#include "scitech/keywords.hpp"
#include "scitech/linker.hpp"
#include "scitech/reduce.hpp"
#include "scitech/textproc.hpp"
#include "scitech/vecfile.hpp"

namespace scitech {

namespace fs = std::filesystem;

enum class Stage { ingest, embed, reduce, cluster, keywords, queries, index, search, analytics };

inline constexpr std::array<Stage, 9> kStages = {Stage::ingest,   Stage::embed,   Stage::reduce,
                                                 Stage::cluster,  Stage::keywords, Stage::queries,
                                                 Stage::index,    Stage::search,  Stage::analytics};

inline std::string to_string(Stage s) {
  static const char* names[] = {"ingest",  "embed", "reduce", "cluster",  "keywords",
                                "queries", "index", "search", "analytics"};
  return names[static_cast<int>(s)];
}

inline std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : kStages) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

/// A file inside the run directory produced by one stage.
struct Artifact {
  Stage producer;
  const char* path;  // relative to the run directory
  const char* name;  // human-readable, used in error messages
};

namespace artifacts {
inline constexpr Artifact publications{Stage::ingest, "corpus/publications.jsonl", "publication corpus"};
inline constexpr Artifact patents{Stage::ingest, "corpus/patents.jsonl", "patent corpus"};
inline constexpr Artifact word_vectors{Stage::embed, "embed/word_vectors.svec", "word vectors"};
inline constexpr Artifact tfidf{Stage::embed, "embed/tfidf.jsonl", "tf-idf model"};
inline constexpr Artifact publication_vectors{Stage::embed, "embed/publications.svec", "publication vectors"};
inline constexpr Artifact patent_vectors{Stage::embed, "embed/patents.svec", "patent vectors"};
inline constexpr Artifact reduced{Stage::reduce, "reduce/reduced.svec", "reduced vectors"};
inline constexpr Artifact reduce_params{Stage::reduce, "reduce/params.json", "reduction parameters"};
inline constexpr Artifact assignment{Stage::cluster, "cluster/assignment.jsonl", "cluster assignment"};
inline constexpr Artifact topics{Stage::cluster, "cluster/topics.jsonl", "topics"};
inline constexpr Artifact dendrogram{Stage::cluster, "cluster/dendrogram.json", "dendrogram"};
inline constexpr Artifact annotations{Stage::keywords, "keywords/annotations.jsonl", "keyword annotations"};
inline constexpr Artifact profiles{Stage::keywords, "keywords/profiles.jsonl", "keyword profiles"};
inline constexpr Artifact queries{Stage::queries, "queries/queries.jsonl", "search queries"};
inline constexpr Artifact query_vectors{Stage::queries, "queries/query_vectors.svec", "query vectors"};
inline constexpr Artifact index{Stage::index, "index/patents.aidx", "patent index"};
inline constexpr Artifact matches{Stage::search, "search/matches.jsonl", "patent matches"};
inline constexpr Artifact search_report{Stage::search, "search/report.json", "search report"};
}  // namespace artifacts

inline std::vector<Artifact> stage_inputs(Stage s) {
  using namespace artifacts;
  switch (s) {
    case Stage::ingest: return {};
    case Stage::embed: return {publications, patents};
    case Stage::reduce: return {publication_vectors};
    case Stage::cluster: return {reduced, publication_vectors, publications};
    case Stage::keywords: return {topics, publications};
    case Stage::queries: return {profiles, topics, word_vectors, tfidf};
    case Stage::index: return {patent_vectors};
    case Stage::search: return {queries, query_vectors, index};
    case Stage::analytics: return {matches, patents, topics};
  }
  return {};
}

/// Digest of the configuration values a stage depends on.
inline std::string stage_config_digest(Stage s, const PipelineConfig& c) {
  nlohmann::ordered_json j;
  switch (s) {
    case Stage::ingest:
      j = {{"publications", c.inputs.publications},
           {"publications_format", c.inputs.publications_format},
           {"patents", c.inputs.patents},
           {"patents_format", c.inputs.patents_format},
           {"ingest", nlohmann::json(c.ingest)}};
      break;
    case Stage::embed:
      j = {{"seed", c.seed}, {"publication_vectors", c.inputs.publication_vectors}, {"embed", nlohmann::json(c.embed)}};
      break;
    case Stage::reduce: j = {{"seed", c.seed}, {"reduce", nlohmann::json(c.reduce)}}; break;
    case Stage::cluster: j = {{"cluster", nlohmann::json(c.cluster)}}; break;
    case Stage::keywords: j = {{"annotations", c.inputs.annotations}, {"stopwords", c.inputs.stopwords}}; break;
    case Stage::queries: j = {{"seed", c.seed}, {"queries", nlohmann::json(c.queries)}}; break;
    case Stage::index: j = {{"seed", c.seed}, {"index", nlohmann::json(c.index)}}; break;
    case Stage::search:
      j = {{"results_per_query", c.search.results_per_query}, {"search_budget", c.search.search_budget}};
      break;
    case Stage::analytics: j = {{"analytics", nlohmann::json(c.analytics)}}; break;
  }
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Manifest

struct StageRecord {
  std::string config_digest;
  std::string started_at;
  std::string completed_at;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::vector<std::string> warnings;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

struct RunManifest {
  std::string run_id;
  std::string created_at;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<Stage, StageRecord> stages;

  const StageRecord* find(Stage s) const {
    auto it = stages.find(s);
    return it == stages.end() ? nullptr : &it->second;
  }
};

inline constexpr const char* kManifestFile = "manifest.json";

inline std::string encode_manifest(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["run_id"] = m.run_id;
  j["created_at"] = m.created_at;
  j["config"] = m.config;
  auto stages = nlohmann::ordered_json::array();
  for (auto s : kStages) {
    const auto* r = m.find(s);
    if (r == nullptr) continue;
    stages.push_back({{"stage", to_string(s)},
                      {"config_digest", r->config_digest},
                      {"started_at", r->started_at},
                      {"completed_at", r->completed_at},
                      {"inputs", r->inputs},
                      {"outputs", r->outputs},
                      {"warnings", r->warnings},
                      {"summary", r->summary}});
  }
  j["stages"] = std::move(stages);
  return j.dump(2) + '\n';
}

inline RunManifest decode_manifest(std::string_view text) {
  const auto j = nlohmann::ordered_json::parse(text);
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.config = j.at("config");
  for (const auto& e : j.at("stages")) {
    auto stage = parse_stage(e.at("stage").get<std::string>());
    if (!stage) throw Error("manifest: unknown stage '" + e.at("stage").get<std::string>() + "'");
    StageRecord r;
    r.config_digest = e.at("config_digest").get<std::string>();
    r.started_at = e.at("started_at").get<std::string>();
    r.completed_at = e.at("completed_at").get<std::string>();
    r.inputs = e.at("inputs").get<std::map<std::string, std::string>>();
    r.outputs = e.at("outputs").get<std::map<std::string, std::string>>();
    r.warnings = e.at("warnings").get<std::vector<std::string>>();
    r.summary = e.at("summary");
    m.stages[*stage] = std::move(r);
  }
  return m;
}

inline std::optional<RunManifest> load_manifest(const fs::path& run_dir) {
  const auto path = run_dir / kManifestFile;
  if (!fs::exists(path)) return std::nullopt;
  return decode_manifest(read_file(path));
}

inline void save_manifest(const fs::path& run_dir, const RunManifest& m) {
  write_file_atomic(run_dir / kManifestFile, encode_manifest(m));
}

// ---------------------------------------------------------------------------
// Run-directory locking. Writers hold an exclusive advisory lock on
// <run_dir>/.lock; the in-process mutex covers threads of one process.

class RunDirLock {
 public:
  explicit RunDirLock(const fs::path& run_dir) : guard_(mutex()) {
    fs::create_directories(run_dir);
    const auto path = (run_dir / ".lock").string();
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Error("cannot open lock file: " + path);
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error("cannot lock run directory: " + run_dir.string());
    }
  }
  ~RunDirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  RunDirLock(const RunDirLock&) = delete;
  RunDirLock& operator=(const RunDirLock&) = delete;

 private:
  static std::recursive_mutex& mutex() {
    static std::recursive_mutex m;
    return m;
  }
  std::unique_lock<std::recursive_mutex> guard_;
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Lineage checks

namespace detail {

inline const Artifact* artifact_by_path(const std::string& path) {
  static const Artifact all[] = {
      artifacts::publications, artifacts::patents,       artifacts::word_vectors,   artifacts::tfidf,
      artifacts::publication_vectors, artifacts::patent_vectors, artifacts::reduced, artifacts::reduce_params,
      artifacts::assignment,   artifacts::topics,        artifacts::dendrogram,     artifacts::annotations,
      artifacts::profiles,     artifacts::queries,       artifacts::query_vectors,  artifacts::index,
      artifacts::matches,      artifacts::search_report};
  for (const auto& a : all) {
    if (path == a.path) return &a;
  }
  return nullptr;
}

inline std::string rerun_hint(Stage s) { return "run stage '" + to_string(s) + "'"; }

}  // namespace detail

/// Throws unless stage s has a record whose configuration matches `config`,
/// whose outputs are intact and whose recorded inputs still match their
/// producers (recursively).
inline void verify_stage(const RunManifest& m, Stage s, const PipelineConfig& config, const fs::path& run_dir,
                         std::set<Stage>& verified) {
  if (verified.contains(s)) return;
  const auto* r = m.find(s);
  if (r == nullptr) throw Error("missing stage: '" + to_string(s) + "' has not run (" + detail::rerun_hint(s) + ")");
  if (r->config_digest != stage_config_digest(s, config)) {
    throw Error("config changed for stage '" + to_string(s) + "' since it ran; rerun stage '" + to_string(s) + "'");
  }
  for (const auto& [path, digest] : r->outputs) {
    const auto* a = detail::artifact_by_path(path);
    const std::string name = a != nullptr ? a->name : path;
    if (!fs::exists(run_dir / path)) {
      throw Error("missing artifact: " + name + " (" + detail::rerun_hint(s) + ")");
    }
    if (file_digest(run_dir / path) != digest) {
      throw Error("stale artifact: " + name + " was modified after stage '" + to_string(s) + "' ran; rerun stage '" +
                  to_string(s) + "'");
    }
  }
  for (const auto& [path, digest] : r->inputs) {
    if (const auto* a = detail::artifact_by_path(path)) {
      const auto* producer = m.find(a->producer);
      auto it = producer == nullptr ? r->inputs.end() : producer->outputs.find(path);
      if (producer == nullptr || it == producer->outputs.end() || it->second != digest) {
        throw Error("stale artifact: " + std::string(a->name) + " changed after stage '" + to_string(s) +
                    "' ran; rerun stage '" + to_string(s) + "'");
      }
      verify_stage(m, a->producer, config, run_dir, verified);
    } else if (!fs::exists(path) || file_digest(path) != digest) {
      throw Error("stale artifact: input file " + path + " changed after stage '" + to_string(s) +
                  "' ran; rerun stage '" + to_string(s) + "'");
    }
  }
  verified.insert(s);
}

inline bool stage_up_to_date(const RunManifest& m, Stage s, const PipelineConfig& config, const fs::path& run_dir) {
  try {
    std::set<Stage> verified;
    verify_stage(m, s, config, run_dir, verified);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Stage execution

struct StageReport {
  Stage stage = Stage::ingest;
  bool skipped = false;  // already up to date
  std::map<std::string, std::string> outputs;
  std::vector<std::string> warnings;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

/// Inputs and outputs of one running stage.
class StageContext {
 public:
  StageContext(const fs::path& run_dir, const RunManifest& manifest, const PipelineConfig& config)
      : run_dir_(run_dir), manifest_(manifest), config_(config) {}

  const PipelineConfig& config() const { return config_; }
  const fs::path& run_dir() const { return run_dir_; }
  Warnings& warnings() { return warnings_; }

  /// Reads an upstream artifact, checking it against the producer's manifest
  /// entry and recording it as an input of this stage.
  std::string read(const Artifact& a) {
    const auto* producer = manifest_.find(a.producer);
    const auto path = run_dir_ / a.path;
    if (producer == nullptr || !fs::exists(path)) {
      throw Error(std::string("missing artifact: ") + a.name + " (" + detail::rerun_hint(a.producer) + ")");
    }
    auto it = producer->outputs.find(a.path);
    if (it == producer->outputs.end()) {
      throw Error(std::string("missing artifact: ") + a.name + " (" + detail::rerun_hint(a.producer) + ")");
    }
    auto bytes = read_file(path);
    const auto digest = sha256_hex(bytes);
    if (digest != it->second) {
      throw Error(std::string("stale artifact: ") + a.name + " was modified after stage '" + to_string(a.producer) +
                  "' ran; rerun stage '" + to_string(a.producer) + "'");
    }
    inputs_[a.path] = digest;
    return bytes;
  }

  /// Reads a file outside the run directory (configured input).
  std::string read_external(const std::string& path, const char* what) {
    if (path.empty()) throw Error(std::string("config: ") + what + " is not set");
    auto bytes = read_file(path);
    inputs_[fs::absolute(path).lexically_normal().string()] = sha256_hex(bytes);
    return bytes;
  }

  void write(const std::string& rel_path, std::string bytes) { outputs_[rel_path] = std::move(bytes); }
  void write(const Artifact& a, std::string bytes) { write(a.path, std::move(bytes)); }

  nlohmann::ordered_json& summary() { return summary_; }
  const std::map<std::string, std::string>& inputs() const { return inputs_; }
  const std::map<std::string, std::string>& outputs() const { return outputs_; }

 private:
  fs::path run_dir_;
  const RunManifest& manifest_;
  const PipelineConfig& config_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  Warnings warnings_;
  nlohmann::ordered_json summary_ = nlohmann::ordered_json::object();
};

namespace detail {

template <typename Fn>
void for_each_line(std::string_view text, Fn fn) {
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty()) fn(line);
  }
}

inline std::vector<PublicationRecord> publications_from_jsonl(std::string_view text) {
  std::vector<PublicationRecord> out;
  for_each_line(text, [&](std::string_view line) {
    out.push_back(publication_from_json(nlohmann::ordered_json::parse(line)));
  });
  return out;
}

inline std::vector<PatentRecord> patents_from_jsonl(std::string_view text) {
  std::vector<PatentRecord> out;
  for_each_line(text, [&](std::string_view line) { out.push_back(patent_from_json(nlohmann::ordered_json::parse(line))); });
  return out;
}

inline std::string publication_text(const PublicationRecord& p) { return p.title + " " + p.abstract; }

inline std::vector<DocVector> read_doc_vectors(std::string_view bytes, const std::string& context) {
  return from_vector_set(decode_vectors(bytes, context));
}

inline std::unordered_set<std::string> load_stopwords(StageContext& ctx) {
  const auto& path = ctx.config().inputs.stopwords;
  if (path.empty()) return default_stopwords();
  std::unordered_set<std::string> out;
  std::istringstream in(ctx.read_external(path, "inputs.stopwords"));
  std::string line;
  while (std::getline(in, line)) {
    line = normalize_keyword(line);
    if (!line.empty()) out.insert(line);
  }
  return out;
}

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + '\n'; }

// -- stage bodies -----------------------------------------------------------

inline void run_ingest(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  if (c.inputs.publications.empty()) throw Error("config: inputs.publications is not set");
  if (c.inputs.patents.empty()) throw Error("config: inputs.patents is not set");
  ctx.read_external(c.inputs.publications, "inputs.publications");
  ctx.read_external(c.inputs.patents, "inputs.patents");
  auto pubs = parse_publications(c.inputs.publications, parse_table_format(c.inputs.publications_format));
  for (const auto& d : pubs.errors) w.push_back("publications line " + std::to_string(d.line) + ": " + d.message);
  auto pats = parse_patents(c.inputs.patents, parse_table_format(c.inputs.patents_format));
  for (const auto& d : pats.errors) w.push_back("patents line " + std::to_string(d.line) + ": " + d.message);
  auto selected = select_top_cited(pubs.records, c.ingest.per_year_top_cited);
  auto kept = c.ingest.priority_ip5_only ? filter_priority_ip5(pats.records) : pats.records;
  ctx.write(artifacts::publications, write_publications_jsonl(selected));
  ctx.write(artifacts::patents, write_patents_jsonl(kept));
  ctx.summary() = {{"publications_parsed", pubs.records.size()},
                   {"publication_errors", pubs.errors.size()},
                   {"publications_selected", selected.size()},
                   {"patents_parsed", pats.records.size()},
                   {"patent_errors", pats.errors.size()},
                   {"patents_kept", kept.size()}};
}

inline void run_embed(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  const auto pubs = publications_from_jsonl(ctx.read(artifacts::publications));
  const auto pats = patents_from_jsonl(ctx.read(artifacts::patents));
  std::vector<TokenList> docs;
  docs.reserve(pubs.size() + pats.size());
  for (const auto& p : pubs) docs.push_back(tokenize(publication_text(p)));
  for (const auto& p : pats) docs.push_back(tokenize(p.abstract));
  auto vocab = build_vocabulary(docs, c.embed.min_count);
  const auto tfidf = fit_tfidf(docs, vocab);
  const auto emb = train_sgns(docs, tfidf.vocabulary, sgns_params(c));

  std::vector<DocVector> pub_vectors;
  std::size_t pub_unembeddable = 0;
  if (!c.inputs.publication_vectors.empty()) {
    const auto set = decode_vectors(ctx.read_external(c.inputs.publication_vectors, "inputs.publication_vectors"),
                                    c.inputs.publication_vectors);
    std::vector<std::string> ids;
    for (const auto& p : pubs) ids.push_back(p.doc_id);
    auto bound = bind_external(set, ids, c.embed.max_missing_fraction, &w);
    pub_vectors = std::move(bound.vectors);
    pub_unembeddable = bound.missing.size();
  } else {
    for (std::size_t i = 0; i < pubs.size(); ++i) {
      try {
        pub_vectors.push_back(embed_tokens(docs[i], emb, tfidf, pubs[i].doc_id));
      } catch (const UnembeddableDocument& e) {
        w.push_back(std::string(e.what()) + "; publication skipped");
        ++pub_unembeddable;
      }
    }
  }
  std::vector<DocVector> pat_vectors;
  std::size_t pat_unembeddable = 0;
  for (std::size_t i = 0; i < pats.size(); ++i) {
    try {
      pat_vectors.push_back(embed_tokens(docs[pubs.size() + i], emb, tfidf, pats[i].patent_id));
    } catch (const UnembeddableDocument& e) {
      w.push_back(std::string(e.what()) + "; patent skipped");
      ++pat_unembeddable;
    }
  }
  ctx.write(artifacts::word_vectors, encode_vectors(word_vectors_to_set(emb)));
  ctx.write(artifacts::tfidf, encode_tfidf_sidecar(tfidf));
  ctx.write(artifacts::publication_vectors, encode_vectors(to_vector_set(pub_vectors)));
  ctx.write(artifacts::patent_vectors, encode_vectors(to_vector_set(pat_vectors)));
  ctx.summary() = {{"vocabulary", tfidf.vocabulary.size()},
                   {"publication_vectors", pub_vectors.size()},
                   {"publications_unembeddable", pub_unembeddable},
                   {"patent_vectors", pat_vectors.size()},
                   {"patents_unembeddable", pat_unembeddable},
                   {"source", c.inputs.publication_vectors.empty() ? "sgns" : "external"}};
}

inline void run_reduce(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  const auto vectors = read_doc_vectors(ctx.read(artifacts::publication_vectors), "publication vectors");
  ReducedVectors reduced;
  if (c.reduce.method == "pca") {
    reduced = reduce_pca(to_matrix(vectors), c.reduce.dim_out, &w);
  } else {
    const auto graph = knn_graph(vectors, c.reduce.k_neighbors, &w);
    reduced = reduce_neighbor_embedding(graph, neighbor_embedding_params(c));
  }
  VectorSet set;
  set.dim = reduced.dim_out;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto row = reduced.vectors.row(i);
    std::vector<float> v(row.begin(), row.end());
    set.add(vectors[i].doc_id, v);
  }
  nlohmann::ordered_json params = {{"method", to_string(reduced.provenance)},
                                   {"dim_out", reduced.dim_out},
                                   {"n", vectors.size()},
                                   {"params", reduced.params}};
  ctx.write(artifacts::reduced, encode_vectors(set));
  ctx.write(artifacts::reduce_params, json_text(params));
  ctx.summary() = {{"method", to_string(reduced.provenance)}, {"n", vectors.size()}, {"dim_out", reduced.dim_out}};
}

inline void run_cluster(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  const auto reduced = decode_vectors(ctx.read(artifacts::reduced), "reduced vectors");
  const auto full = decode_vectors(ctx.read(artifacts::publication_vectors), "publication vectors");
  const auto pubs = publications_from_jsonl(ctx.read(artifacts::publications));
  std::unordered_map<std::string, std::size_t> pub_index;
  for (std::size_t i = 0; i < pubs.size(); ++i) pub_index.emplace(pubs[i].doc_id, i);

  Matrix points(reduced.ids.size(), reduced.dim);
  std::vector<PublicationRecord> docs;
  std::vector<DocVector> full_vectors;
  for (std::size_t i = 0; i < reduced.ids.size(); ++i) {
    const auto& id = reduced.ids[i];
    auto pi = pub_index.find(id);
    auto fi = full.find(id);
    if (pi == pub_index.end() || fi == nullptr) throw Error("cluster: reduced vector '" + id + "' has no publication or vector");
    const auto row = reduced.row(i);
    for (std::size_t d = 0; d < reduced.dim; ++d) points(i, d) = row[d];
    docs.push_back(pubs[pi->second]);
    full_vectors.push_back({id, std::vector<float>(fi, fi + full.dim), true});
  }
  const auto assignment = hdbscan_fit(points, c.cluster.min_cluster_size, c.cluster.min_samples, &w);
  const auto topic_set = extract_topics(assignment, docs, full_vectors, catch_all_rule(c), &w);
  const auto dendro = agglomerate_topics(topic_set.topics);
  ctx.write(artifacts::assignment, write_assignment_jsonl(assignment, reduced.ids));
  ctx.write(artifacts::topics, write_topics_jsonl(topic_set));
  ctx.write(artifacts::dendrogram, json_text(to_json(dendro)));
  const auto noise = static_cast<std::size_t>(std::count(assignment.labels.begin(), assignment.labels.end(), -1));
  ctx.summary() = {{"points", points.rows},
                   {"clusters", assignment.n_clusters},
                   {"noise", noise},
                   {"topics", topic_set.topics.size()},
                   {"catch_all", topic_set.catch_all ? nlohmann::ordered_json(topic_set.catch_all->topic_id)
                                                     : nlohmann::ordered_json(nullptr)}};
}

inline void run_keywords(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  const auto topic_set = read_topics_jsonl(ctx.read(artifacts::topics));
  const auto pubs = publications_from_jsonl(ctx.read(artifacts::publications));
  std::vector<KeywordAnnotation> annotations;
  std::string source;
  if (!c.inputs.annotations.empty()) {
    source = "annotations";
    ctx.read_external(c.inputs.annotations, "inputs.annotations");
    std::unordered_set<std::string> ids;
    for (const auto& p : pubs) ids.insert(p.doc_id);
    auto parsed = ingest_ner_annotations(c.inputs.annotations, &ids);
    for (const auto& d : parsed.errors) w.push_back("annotations line " + std::to_string(d.line) + ": " + d.message);
    annotations = std::move(parsed.records);
  } else {
    source = "rake";
    const auto stopwords = load_stopwords(ctx);
    for (const auto& p : pubs) {
      auto extracted = extract_rake(p, stopwords);
      annotations.insert(annotations.end(), extracted.begin(), extracted.end());
    }
  }
  const auto profiles = rank_ctfidf(topic_set.topics, annotations, &w);
  ctx.write(artifacts::annotations, write_annotations_jsonl(annotations));
  ctx.write(artifacts::profiles, write_profiles_jsonl(profiles));
  ctx.summary() = {{"source", source}, {"annotations", annotations.size()}, {"profiles", profiles.size()}};
}

struct LinkerModels {
  WordEmbeddings embeddings;
  TfidfModel tfidf;
};

inline LinkerModels load_linker_models(std::string_view word_vectors, std::string_view tfidf) {
  LinkerModels m;
  m.tfidf = decode_tfidf_sidecar(tfidf);
  m.embeddings = word_vectors_from_set(decode_vectors(word_vectors, "word vectors"), m.tfidf.vocabulary);
  return m;
}

inline QueryParams query_params(const PipelineConfig& c, std::uint64_t seed) {
  return {c.queries.top_k_keywords, c.queries.queries_per_topic, c.queries.query_length, derive_seed(seed, 0x9E7u)};
}

inline std::string query_id(const SearchQuery& q) {
  return std::to_string(q.topic_id) + ":" + std::to_string(q.seq);
}

/// Generates and embeds queries for the listed topics. Per-topic counts of
/// emitted queries are recorded in `per_topic`.
inline std::vector<SearchQuery> build_queries(std::span<const TopicKeywordProfile> profiles,
                                              std::span<const int> topic_ids, const LinkerModels& models,
                                              const QueryParams& params, Warnings* w,
                                              nlohmann::ordered_json* per_topic) {
  std::map<int, const TopicKeywordProfile*> by_id;
  for (const auto& p : profiles) by_id.emplace(p.topic_id, &p);
  std::vector<SearchQuery> out;
  for (int id : topic_ids) {
    std::vector<SearchQuery> qs;
    auto it = by_id.find(id);
    if (it == by_id.end() || it->second->empty()) {
      warn(w, "topic " + std::to_string(id) + ": empty keyword profile; topic skipped");
    } else {
      qs = embed_queries(generate_queries(*it->second, params, w), models.embeddings, models.tfidf, w);
    }
    if (per_topic != nullptr) per_topic->push_back({{"topic_id", id}, {"queries", qs.size()}});
    out.insert(out.end(), std::make_move_iterator(qs.begin()), std::make_move_iterator(qs.end()));
  }
  return out;
}

inline void run_queries(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  const auto profiles_text = ctx.read(artifacts::profiles);
  const auto topic_set = read_topics_jsonl(ctx.read(artifacts::topics));
  const auto models = load_linker_models(ctx.read(artifacts::word_vectors), ctx.read(artifacts::tfidf));
  std::vector<int> ids;
  for (const auto& t : topic_set.topics) ids.push_back(t.topic_id);
  const auto profiles = read_profiles_jsonl(profiles_text, ids);
  auto per_topic = nlohmann::ordered_json::array();
  const auto queries = build_queries(profiles, ids, models, query_params(c, c.seed), &w, &per_topic);
  VectorSet set;
  set.dim = models.embeddings.dim;
  for (const auto& q : queries) set.add(query_id(q), q.vector.vector);
  ctx.write(artifacts::queries, write_queries_jsonl(queries));
  ctx.write(artifacts::query_vectors, encode_vectors(set));
  ctx.summary() = {{"queries", queries.size()}, {"per_topic", std::move(per_topic)}};
}

inline void run_index(StageContext& ctx) {
  const auto& c = ctx.config();
  const auto vectors = read_doc_vectors(ctx.read(artifacts::patent_vectors), "patent vectors");
  const auto idx = AnnIndex::build(vectors, c.index.n_trees, c.index.leaf_capacity, derive_seed(c.seed, 0x1D8u));
  ctx.write(artifacts::index, idx.serialize());
  ctx.summary() = {{"items", idx.size()}, {"dim", idx.dim()}, {"n_trees", idx.n_trees()}};
}

inline std::size_t search_threads(const PipelineConfig& c) {
  return c.search.threads == 0 ? default_threads() : c.search.threads;
}

/// Runs every query against the index and aggregates matches per topic, in
/// the order topics first appear among the queries.
inline std::vector<PatentMatch> execute_queries(const AnnIndex& idx, std::span<const SearchQuery> queries,
                                                std::size_t k, std::size_t budget, std::size_t threads,
                                                Warnings* w, nlohmann::ordered_json* per_topic,
                                                const std::function<void(std::size_t)>& progress = {}) {
  std::vector<QueryResult> results(queries.size());
  std::vector<Warnings> local(queries.size());
  std::atomic<std::size_t> done{0};
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    results[i] = search(idx, queries[i].vector, k, budget, &local[i]);  // budget 0: n_trees x k
    const auto n = ++done;
    if (progress) progress(n);
  });
  for (auto& l : local) {
    for (auto& m : l) warn(w, std::move(m));
  }
  std::vector<PatentMatch> out;
  std::vector<int> order;
  std::map<int, std::vector<QueryResult>> by_topic;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!by_topic.contains(queries[i].topic_id)) order.push_back(queries[i].topic_id);
    by_topic[queries[i].topic_id].push_back(std::move(results[i]));
  }
  for (int id : order) {
    auto matches = aggregate_matches(by_topic[id], id);
    if (per_topic != nullptr) {
      per_topic->push_back({{"topic_id", id}, {"queries", by_topic[id].size()}, {"matches", matches.size()}});
    }
    out.insert(out.end(), matches.begin(), matches.end());
  }
  return out;
}

inline void run_search(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  auto queries = read_queries_jsonl(ctx.read(artifacts::queries));
  const auto qvecs = decode_vectors(ctx.read(artifacts::query_vectors), "query vectors");
  const auto idx = AnnIndex::deserialize(ctx.read(artifacts::index), "patent index");
  for (auto& q : queries) {
    const float* v = qvecs.find(query_id(q));
    if (v == nullptr) throw Error("search: query " + query_id(q) + " has no vector");
    q.vector = {query_id(q), std::vector<float>(v, v + qvecs.dim), true};
  }
  auto per_topic = nlohmann::ordered_json::array();
  const auto matches = execute_queries(idx, queries, c.search.results_per_query, c.search.search_budget,
                                       search_threads(c), &w, &per_topic);
  nlohmann::ordered_json report = {{"queries", queries.size()}, {"matches", matches.size()}, {"per_topic", per_topic}};
  ctx.write(artifacts::matches, write_matches_jsonl(matches));
  ctx.write(artifacts::search_report, json_text(report));
  ctx.summary() = {{"queries", queries.size()}, {"matches", matches.size()}};
}

struct AnalyticsTables {
  std::vector<TopicYearCount> topics_over_time;
  std::vector<DistanceDistribution> distance_by_year;
  std::vector<KeyCount> by_country;
  std::vector<KeyCount> by_field;
  std::vector<KeyCount> by_topic;
  RelatednessNetwork relatedness;
};

inline AnalyticsTables compute_analytics(std::span<const Topic> topics, std::span<const PatentMatch> matches,
                                         std::span<const PatentRecord> patents, const AnalyticsConfig& c,
                                         std::vector<Diagnostic>* diagnostics) {
  AnalyticsTables t;
  t.topics_over_time = topics_over_time(topics);
  t.distance_by_year = distance_by_year(matches, patents, c.bin_width, diagnostics);
  t.by_country = count_by(matches, patents, CountKey::applicant_country, c.whole_counting);
  t.by_field = count_by(matches, patents, CountKey::tech_field, c.whole_counting);
  t.by_topic = count_by(matches, patents, CountKey::topic, c.whole_counting);
  t.relatedness = relatedness_network(matches, patents, c.min_weight);
  return t;
}

inline void run_analytics(StageContext& ctx) {
  const auto& c = ctx.config();
  auto& w = ctx.warnings();
  const auto matches = read_matches_jsonl(ctx.read(artifacts::matches));
  const auto patents = patents_from_jsonl(ctx.read(artifacts::patents));
  const auto topic_set = read_topics_jsonl(ctx.read(artifacts::topics));
  std::vector<Diagnostic> diagnostics;
  const auto t = compute_analytics(topic_set.topics, matches, patents, c.analytics, &diagnostics);
  for (const auto& d : diagnostics) w.push_back("matches line " + std::to_string(d.line) + ": " + d.message);
  ctx.write("analytics/topics_over_time.csv", to_csv(std::span<const TopicYearCount>(t.topics_over_time)));
  ctx.write("analytics/topics_over_time.json", json_text(to_json(std::span<const TopicYearCount>(t.topics_over_time))));
  ctx.write("analytics/distance_by_year.csv", to_csv(std::span<const DistanceDistribution>(t.distance_by_year)));
  ctx.write("analytics/distance_by_year.json",
            json_text(to_json(std::span<const DistanceDistribution>(t.distance_by_year))));
  ctx.write("analytics/by_country.csv", to_csv(std::span<const KeyCount>(t.by_country)));
  ctx.write("analytics/by_country.json", json_text(to_json(std::span<const KeyCount>(t.by_country))));
  ctx.write("analytics/by_field.csv", to_csv(std::span<const KeyCount>(t.by_field)));
  ctx.write("analytics/by_field.json", json_text(to_json(std::span<const KeyCount>(t.by_field))));
  ctx.write("analytics/by_topic.csv", to_csv(std::span<const KeyCount>(t.by_topic)));
  ctx.write("analytics/by_topic.json", json_text(to_json(std::span<const KeyCount>(t.by_topic))));
  ctx.write("analytics/relatedness.csv", to_csv(t.relatedness));
  ctx.write("analytics/relatedness.json", json_text(to_json(t.relatedness)));
  ctx.summary() = {{"matches", matches.size()},
                   {"years", t.distance_by_year.size()},
                   {"relatedness_edges", t.relatedness.edges.size()}};
}

inline std::string new_run_id(const fs::path& run_dir) {
  return sha256_hex(iso_now() + "|" + fs::absolute(run_dir).string()).substr(0, 16);
}

}  // namespace detail

/// Runs one stage: verifies upstream lineage, computes outputs, writes them
/// atomically and records the stage in the manifest.
inline StageReport run_stage(Stage stage, const PipelineConfig& config, const fs::path& run_dir) {
  validate(config);
  RunDirLock lock(run_dir);
  auto manifest = load_manifest(run_dir).value_or(RunManifest{});
  if (manifest.run_id.empty()) {
    manifest.run_id = detail::new_run_id(run_dir);
    manifest.created_at = iso_now();
  }
  for (const auto& a : stage_inputs(stage)) {
    if (manifest.find(a.producer) == nullptr || !fs::exists(run_dir / a.path)) {
      throw Error(std::string("missing artifact: ") + a.name + " (" + detail::rerun_hint(a.producer) + ")");
    }
  }
  std::set<Stage> verified;
  for (const auto& a : stage_inputs(stage)) verify_stage(manifest, a.producer, config, run_dir, verified);

  StageRecord record;
  record.started_at = iso_now();
  StageContext ctx(run_dir, manifest, config);
  switch (stage) {
    case Stage::ingest: detail::run_ingest(ctx); break;
    case Stage::embed: detail::run_embed(ctx); break;
    case Stage::reduce: detail::run_reduce(ctx); break;
    case Stage::cluster: detail::run_cluster(ctx); break;
    case Stage::keywords: detail::run_keywords(ctx); break;
    case Stage::queries: detail::run_queries(ctx); break;
    case Stage::index: detail::run_index(ctx); break;
    case Stage::search: detail::run_search(ctx); break;
    case Stage::analytics: detail::run_analytics(ctx); break;
  }
  StageReport report;
  report.stage = stage;
  for (const auto& [path, bytes] : ctx.outputs()) {
    write_file_atomic(run_dir / path, bytes);
    record.outputs[path] = sha256_hex(bytes);
  }
  record.inputs = ctx.inputs();
  record.config_digest = stage_config_digest(stage, config);
  record.warnings = ctx.warnings();
  record.summary = ctx.summary();
  record.completed_at = iso_now();
  manifest.config = to_ordered_json(config);
  manifest.stages[stage] = record;
  save_manifest(run_dir, manifest);
  report.outputs = record.outputs;
  report.warnings = record.warnings;
  report.summary = record.summary;
  return report;
}

/// Runs every stage in order, skipping stages already up to date unless
/// `force` is set.
inline std::vector<StageReport> run_pipeline(const PipelineConfig& config, const fs::path& run_dir, bool force = false,
                                             const std::function<void(const StageReport&)>& on_stage = {}) {
  std::vector<StageReport> out;
  for (auto s : kStages) {
    StageReport r;
    const auto manifest = load_manifest(run_dir);
    if (!force && manifest && stage_up_to_date(*manifest, s, config, run_dir)) {
      r.stage = s;
      r.skipped = true;
      r.outputs = manifest->find(s)->outputs;
    } else {
      r = run_stage(s, config, run_dir);
    }
    if (on_stage) on_stage(r);
    out.push_back(std::move(r));
  }
  return out;
}

/// Reconstructs the configuration a run was last executed with.
inline PipelineConfig manifest_config(const RunManifest& m) {
  return parse_config(nlohmann::json(m.config).dump());
}

}  // namespace scitech
