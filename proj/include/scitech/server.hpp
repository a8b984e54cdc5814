#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "scitech/pipeline.hpp"
#include "scitech/selection.hpp"

namespace scitech {

/// Request-level failure mapped to an HTTP status.
class ApiError : public Error {
 public:
  ApiError(int status, std::string message) : Error(std::move(message)), status(status) {}
  int status;
};

struct SearchJob {
  enum class State { queued, running, completed, failed };

  std::string job_id;
  std::vector<int> topic_ids;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  State state = State::queued;
  std::size_t queries_total = 0;
  std::size_t queries_done = 0;
  std::size_t matches = 0;
  std::string error;
  std::string created_at;
  std::string finished_at;
  nlohmann::ordered_json per_topic = nlohmann::ordered_json::array();
};

inline std::string to_string(SearchJob::State s) {
  switch (s) {
    case SearchJob::State::queued: return "queued";
    case SearchJob::State::running: return "running";
    case SearchJob::State::completed: return "completed";
    case SearchJob::State::failed: return "failed";
  }
  return "";
}

/// Read model of a run directory plus the search-job queue. Immutable
/// artifacts are loaded once; selection and job state are guarded.
class RunService {
 public:
  explicit RunService(fs::path run_dir) : run_dir_(std::move(run_dir)) {
    auto manifest = load_manifest(run_dir_);
    if (!manifest) throw Error("missing artifact: run manifest in " + run_dir_.string() + " (run stage 'ingest')");
    manifest_ = std::move(*manifest);
    config_ = manifest_config(manifest_);
    std::set<Stage> verified;
    verify_stage(manifest_, Stage::cluster, config_, run_dir_, verified);
    verify_stage(manifest_, Stage::keywords, config_, run_dir_, verified);
    topic_set_ = read_topics_jsonl(read_file(run_dir_ / artifacts::topics.path));
    std::vector<int> ids;
    for (const auto& t : topic_set_.topics) {
      ids.push_back(t.topic_id);
      topic_index_[t.topic_id] = topics_json_.size();
      topics_json_.push_back(&t);
    }
    profiles_ = read_profiles_jsonl(read_file(run_dir_ / artifacts::profiles.path), ids);
    for (const auto& p : profiles_) profile_index_[p.topic_id] = &p;
    dendrogram_ = dendrogram_from_json(nlohmann::json::parse(read_file(run_dir_ / artifacts::dendrogram.path)));
    selection_ = std::make_unique<SelectionStore>(run_dir_, std::set<int>(ids.begin(), ids.end()), &warnings_);
    load_patents();
    load_jobs();
    worker_ = std::jthread([this](std::stop_token st) { work(st); });
  }

  ~RunService() {
    worker_.request_stop();
    cv_.notify_all();
  }

  const PipelineConfig& config() const { return config_; }
  const TopicSet& topics() const { return topic_set_; }
  const Dendrogram& dendrogram() const { return dendrogram_; }
  SelectionStore& selection() { return *selection_; }
  const Warnings& warnings() const { return warnings_; }

  const Topic* topic(int id) const {
    auto it = topic_index_.find(id);
    return it == topic_index_.end() ? nullptr : topics_json_[it->second];
  }

  const TopicKeywordProfile* profile(int id) const {
    auto it = profile_index_.find(id);
    return it == profile_index_.end() ? nullptr : it->second;
  }

  const PatentRecord* patent(const std::string& id) const {
    auto it = patent_index_.find(id);
    return it == patent_index_.end() ? nullptr : &patents_[it->second];
  }
  const std::vector<PatentRecord>& patents() const { return patents_; }

  std::string submit(std::vector<int> topic_ids, std::size_t k, std::uint64_t seed) {
    std::lock_guard lock(mutex_);
    auto job = std::make_shared<SearchJob>();
    job->job_id = std::to_string(++last_job_);
    job->topic_ids = std::move(topic_ids);
    job->k = k;
    job->seed = seed;
    job->created_at = iso_now();
    jobs_[job->job_id] = job;
    queue_.push_back(job);
    cv_.notify_all();
    return job->job_id;
  }

  std::optional<SearchJob> job(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return *it->second;
  }

  /// Blocks until the job leaves the queued/running states or the timeout
  /// expires. Returns the final state snapshot.
  std::optional<SearchJob> wait(const std::string& id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    auto job = it->second;
    done_cv_.wait_for(lock, timeout, [&] {
      return job->state == SearchJob::State::completed || job->state == SearchJob::State::failed;
    });
    return *job;
  }

  /// Current matches for a topic: the most recent completed job covering the
  /// topic, otherwise the search stage output. `source` names which.
  std::vector<PatentMatch> matches_for(int topic_id, std::string* source = nullptr) const {
    std::lock_guard lock(mutex_);
    auto it = job_matches_.find(topic_id);
    if (it != job_matches_.end()) {
      if (source != nullptr) *source = "job:" + it->second.first;
      return it->second.second;
    }
    auto st = stage_matches_.find(topic_id);
    if (st != stage_matches_.end()) {
      if (source != nullptr) *source = "search";
      return st->second;
    }
    if (source != nullptr) *source = "none";
    return {};
  }

  std::vector<PatentMatch> all_matches() const {
    std::vector<PatentMatch> out;
    for (const auto& t : topic_set_.topics) {
      auto m = matches_for(t.topic_id);
      out.insert(out.end(), m.begin(), m.end());
    }
    return out;
  }

 private:
  void load_patents() {
    const auto path = run_dir_ / artifacts::patents.path;
    if (fs::exists(path)) patents_ = detail::patents_from_jsonl(read_file(path));
    for (std::size_t i = 0; i < patents_.size(); ++i) patent_index_[patents_[i].patent_id] = i;
    if (stage_up_to_date(manifest_, Stage::search, config_, run_dir_)) {
      for (auto& m : read_matches_jsonl(read_file(run_dir_ / artifacts::matches.path))) {
        stage_matches_[m.topic_id].push_back(std::move(m));
      }
    }
  }

  fs::path job_dir(const std::string& id) const { return run_dir_ / "jobs" / id; }

  void load_jobs() {
    const auto dir = run_dir_ / "jobs";
    if (!fs::exists(dir)) return;
    std::vector<std::pair<std::size_t, fs::path>> found;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (!e.is_directory() || name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
      found.emplace_back(std::stoul(name), e.path());
    }
    std::sort(found.begin(), found.end());
    for (const auto& [n, path] : found) {
      last_job_ = std::max(last_job_, n);
      if (!fs::exists(path / "report.json") || !fs::exists(path / "matches.jsonl")) continue;
      const auto r = nlohmann::json::parse(read_file(path / "report.json"));
      auto job = std::make_shared<SearchJob>();
      job->job_id = std::to_string(n);
      job->topic_ids = r.at("topic_ids").get<std::vector<int>>();
      job->k = r.at("k").get<std::size_t>();
      job->seed = r.at("seed").get<std::uint64_t>();
      job->state = SearchJob::State::completed;
      job->queries_total = job->queries_done = r.at("queries").get<std::size_t>();
      job->matches = r.at("matches").get<std::size_t>();
      job->created_at = r.value("created_at", "");
      job->finished_at = r.value("finished_at", "");
      job->per_topic = r.at("per_topic");
      jobs_[job->job_id] = job;
      record_job_matches(job->job_id, job->topic_ids, read_matches_jsonl(read_file(path / "matches.jsonl")));
    }
  }

  // Caller holds mutex_ or is single-threaded construction.
  void record_job_matches(const std::string& job_id, const std::vector<int>& topic_ids,
                          const std::vector<PatentMatch>& matches) {
    std::map<int, std::vector<PatentMatch>> by_topic;
    for (int id : topic_ids) by_topic[id];
    for (const auto& m : matches) by_topic[m.topic_id].push_back(m);
    for (auto& [id, list] : by_topic) job_matches_[id] = {job_id, std::move(list)};
  }

  void work(std::stop_token st) {
    while (!st.stop_requested()) {
      std::shared_ptr<SearchJob> job;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return st.stop_requested() || !queue_.empty(); });
        if (st.stop_requested()) return;
        job = queue_.front();
        queue_.pop_front();
        job->state = SearchJob::State::running;
      }
      try {
        run_job(*job);
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex_);
        job->state = SearchJob::State::failed;
        job->error = e.what();
        job->finished_at = iso_now();
      }
      done_cv_.notify_all();
    }
  }

  void run_job(SearchJob& job) {
    Warnings w;
    if (!models_) {
      std::set<Stage> verified;
      verify_stage(manifest_, Stage::embed, config_, run_dir_, verified);
      verify_stage(manifest_, Stage::index, config_, run_dir_, verified);
      models_ = detail::load_linker_models(read_file(run_dir_ / artifacts::word_vectors.path),
                                           read_file(run_dir_ / artifacts::tfidf.path));
      index_ = AnnIndex::deserialize(read_file(run_dir_ / artifacts::index.path), "patent index");
    }
    auto queries = detail::build_queries(profiles_, job.topic_ids, *models_, detail::query_params(config_, job.seed),
                                         &w, nullptr);
    {
      std::lock_guard lock(mutex_);
      job.queries_total = queries.size();
    }
    auto per_topic = nlohmann::ordered_json::array();
    auto matches = detail::execute_queries(*index_, queries, job.k, config_.search.search_budget,
                                           detail::search_threads(config_), &w, &per_topic, [&](std::size_t done) {
                                             std::lock_guard lock(mutex_);
                                             job.queries_done = std::max(job.queries_done, done);
                                           });
    // Topics whose queries were all skipped still appear, with zero counts.
    std::set<int> reported;
    for (const auto& e : per_topic) reported.insert(e.at("topic_id").get<int>());
    for (int id : job.topic_ids) {
      if (!reported.contains(id)) per_topic.push_back({{"topic_id", id}, {"queries", 0}, {"matches", 0}});
    }
    const auto finished = iso_now();
    nlohmann::ordered_json report = {{"job_id", job.job_id},       {"topic_ids", job.topic_ids},
                                     {"k", job.k},                 {"seed", job.seed},
                                     {"queries", queries.size()},  {"matches", matches.size()},
                                     {"per_topic", per_topic},     {"warnings", w},
                                     {"created_at", job.created_at}, {"finished_at", finished}};
    {
      RunDirLock lock(run_dir_);
      write_file_atomic(job_dir(job.job_id) / "matches.jsonl", write_matches_jsonl(matches));
      write_file_atomic(job_dir(job.job_id) / "report.json", report.dump(2) + '\n');
    }
    std::lock_guard lock(mutex_);
    record_job_matches(job.job_id, job.topic_ids, matches);
    job.queries_done = queries.size();
    job.matches = matches.size();
    job.per_topic = std::move(per_topic);
    job.finished_at = finished;
    job.state = SearchJob::State::completed;
  }

  fs::path run_dir_;
  RunManifest manifest_;
  PipelineConfig config_;
  TopicSet topic_set_;
  std::vector<const Topic*> topics_json_;
  std::map<int, std::size_t> topic_index_;
  std::vector<TopicKeywordProfile> profiles_;
  std::map<int, const TopicKeywordProfile*> profile_index_;
  Dendrogram dendrogram_;
  std::unique_ptr<SelectionStore> selection_;
  std::vector<PatentRecord> patents_;
  std::unordered_map<std::string, std::size_t> patent_index_;
  std::map<int, std::vector<PatentMatch>> stage_matches_;
  Warnings warnings_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  mutable std::condition_variable done_cv_;
  std::deque<std::shared_ptr<SearchJob>> queue_;
  std::map<std::string, std::shared_ptr<SearchJob>> jobs_;
  std::map<int, std::pair<std::string, std::vector<PatentMatch>>> job_matches_;
  std::size_t last_job_ = 0;
  std::optional<detail::LinkerModels> models_;
  std::optional<AnnIndex> index_;
  std::jthread worker_;  // last member: joins before the state above is destroyed
};

namespace api {

inline nlohmann::ordered_json error_body(int status, const std::string& message) {
  return {{"error", {{"status", status}, {"message", message}}}};
}

inline nlohmann::ordered_json selection_json(const TopicSelection& s) {
  return {{"selected", s.selected},
          {"note", s.note},
          {"updated_at", s.updated_at.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.updated_at)}};
}

inline nlohmann::ordered_json yearly_json(const Topic& t) {
  auto years = nlohmann::ordered_json::object();
  for (const auto& [y, c] : t.yearly_counts) years[std::to_string(y)] = c;
  return years;
}

inline nlohmann::ordered_json keywords_json(const TopicKeywordProfile* p, std::size_t limit) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (auto label : kAllLabels) {
    auto list = nlohmann::ordered_json::array();
    if (p != nullptr) {
      const auto& ranked = p->of(label);
      for (std::size_t r = 0; r < ranked.size() && r < limit; ++r) {
        list.push_back({{"keyword", ranked[r].keyword},
                        {"score", ranked[r].score},
                        {"occurrences", ranked[r].occurrences},
                        {"rank", r + 1}});
      }
    }
    out[to_string(label)] = std::move(list);
  }
  return out;
}

inline nlohmann::ordered_json topic_summary(RunService& svc, const Topic& t) {
  return {{"topic_id", t.topic_id},
          {"size", t.size},
          {"yearly_counts", yearly_json(t)},
          {"dispersion", t.dispersion},
          {"keywords", keywords_json(svc.profile(t.topic_id), 10)},
          {"selection", selection_json(svc.selection().get(t.topic_id))}};
}

inline nlohmann::ordered_json job_json(const SearchJob& j) {
  nlohmann::ordered_json out = {
      {"job_id", j.job_id},
      {"state", to_string(j.state)},
      {"topic_ids", j.topic_ids},
      {"k", j.k},
      {"seed", j.seed},
      {"progress", {{"done", j.queries_done}, {"total", j.queries_total}}},
      {"counts", {{"topics", j.topic_ids.size()}, {"queries", j.queries_done}, {"matches", j.matches}}},
      {"per_topic", j.per_topic},
      {"created_at", j.created_at},
      {"finished_at", j.finished_at.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(j.finished_at)}};
  if (!j.error.empty()) out["error"] = j.error;
  return out;
}

inline int parse_topic_id(const std::string& s) {
  std::size_t used = 0;
  int id = 0;
  try {
    id = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ApiError(400, "topic id must be an integer: '" + s + "'");
  }
  if (used != s.size()) throw ApiError(400, "topic id must be an integer: '" + s + "'");
  return id;
}

inline const Topic& require_topic(RunService& svc, int id) {
  const auto* t = svc.topic(id);
  if (t == nullptr) throw ApiError(404, "unknown topic " + std::to_string(id));
  return *t;
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ApiError(400, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ApiError(400, std::string("malformed JSON body: ") + e.what());
  }
}

template <typename T>
T query_number(const httplib::Request& req, const char* name, T fallback, T lo, T hi) {
  if (!req.has_param(name)) return fallback;
  const auto raw = req.get_param_value(name);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(raw, &used);
  } catch (const std::exception&) {
    throw ApiError(400, std::string("query parameter ") + name + " must be a number");
  }
  if (used != raw.size() || !std::isfinite(v)) {
    throw ApiError(400, std::string("query parameter ") + name + " must be a number");
  }
  if constexpr (std::is_integral_v<T>) {
    if (v != std::floor(v)) throw ApiError(400, std::string("query parameter ") + name + " must be an integer");
  }
  if (v < static_cast<double>(lo) || v > static_cast<double>(hi)) {
    throw ApiError(400, std::string("query parameter ") + name + " out of range");
  }
  return static_cast<T>(v);
}

}  // namespace api

/// HTTP front end over a RunService. Routes live under /api/v1; an optional
/// static directory is mounted at /.
class ApiServer {
 public:
  explicit ApiServer(const fs::path& run_dir, const fs::path& static_dir = {})
      : service_(std::make_unique<RunService>(run_dir)) {
    // httplib defaults to SO_REUSEPORT, which lets a second server share a
    // port already in use. Plain SO_REUSEADDR keeps restarts quick.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
    if (!static_dir.empty() && !server_.set_mount_point("/", static_dir.string())) {
      throw Error("static directory not found: " + static_dir.string());
    }
  }

  RunService& service() { return *service_; }

  /// Binds the port (0 picks a free one) and returns the bound port. A port in
  /// use is fatal.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw Error("cannot bind " + host);
    } else {
      if (!server_.bind_to_port(host, port)) {
        throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
      }
      port_ = port;
    }
    return port_;
  }

  void listen() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  int port() const { return port_; }

 private:
  using Body = std::function<nlohmann::ordered_json(const httplib::Request&, httplib::Response&)>;

  /// Wraps a handler: JSON response, ApiError/Error mapped to status codes.
  httplib::Server::Handler json(Body body) {
    return [body = std::move(body)](const httplib::Request& req, httplib::Response& res) {
      nlohmann::ordered_json out;
      try {
        out = body(req, res);
        if (res.status == -1) res.status = 200;
      } catch (const ApiError& e) {
        res.status = e.status;
        out = api::error_body(e.status, e.what());
      } catch (const std::exception& e) {
        res.status = 500;
        out = api::error_body(500, e.what());
      }
      res.set_content(out.dump(), "application/json");
    };
  }

  void routes() {
    auto& svc = *service_;
    const std::string p = "/api/v1";

    server_.Get(p + "/topics", json([&svc](const httplib::Request&, httplib::Response&) {
                  auto out = nlohmann::ordered_json::array();
                  for (const auto& t : svc.topics().topics) out.push_back(api::topic_summary(svc, t));
                  return out;
                }));

    server_.Get(p + R"(/topics/([^/]+))", json([&svc](const httplib::Request& req, httplib::Response&) {
                  const auto& t = api::require_topic(svc, api::parse_topic_id(req.matches[1]));
                  auto out = api::topic_summary(svc, t);
                  out["keywords"] = api::keywords_json(svc.profile(t.topic_id), std::numeric_limits<std::size_t>::max());
                  return out;
                }));

    server_.Patch(p + R"(/topics/([^/]+)/selection)", json([&svc](const httplib::Request& req, httplib::Response&) {
                    const int id = api::parse_topic_id(req.matches[1]);
                    api::require_topic(svc, id);
                    const auto body = api::parse_body(req);
                    std::optional<bool> selected;
                    std::optional<std::string> note;
                    for (const auto& [key, value] : body.items()) {
                      if (key == "selected") {
                        if (!value.is_boolean()) throw ApiError(400, "'selected' must be a boolean");
                        selected = value.get<bool>();
                      } else if (key == "note") {
                        if (!value.is_string()) throw ApiError(400, "'note' must be a string");
                        note = value.get<std::string>();
                      } else {
                        throw ApiError(400, "unknown field '" + key + "'");
                      }
                    }
                    if (!selected && !note) throw ApiError(400, "body must set 'selected' or 'note'");
                    const auto s = svc.selection().update(id, selected, note);
                    nlohmann::ordered_json out = {{"topic_id", id}};
                    out["selection"] = api::selection_json(s);
                    return out;
                  }));

    server_.Get(p + "/dendrogram", json([&svc](const httplib::Request&, httplib::Response&) {
                  auto leaves = nlohmann::ordered_json::array();
                  for (const auto& t : svc.topics().topics) leaves.push_back(t.topic_id);
                  return nlohmann::ordered_json{{"leaves", leaves}, {"merges", to_json(svc.dendrogram())}};
                }));

    server_.Post(p + "/search/run", json([&svc](const httplib::Request& req, httplib::Response& res) {
                   const auto body = api::parse_body(req);
                   std::vector<int> ids;
                   std::size_t k = svc.config().search.results_per_query;
                   std::uint64_t seed = svc.config().seed;
                   for (const auto& [key, value] : body.items()) {
                     if (key == "topic_ids") {
                       if (!value.is_array()) throw ApiError(400, "'topic_ids' must be an array of integers");
                       for (const auto& v : value) {
                         if (!v.is_number_integer()) throw ApiError(400, "'topic_ids' must be an array of integers");
                         ids.push_back(v.get<int>());
                       }
                     } else if (key == "k") {
                       if (!value.is_number_integer() || value.get<long long>() < 1 || value.get<long long>() > 100000) {
                         throw ApiError(400, "'k' must be an integer in [1, 100000]");
                       }
                       k = value.get<std::size_t>();
                     } else if (key == "seed") {
                       if (!value.is_number_integer() || value.get<long long>() < 0) {
                         throw ApiError(400, "'seed' must be a non-negative integer");
                       }
                       seed = value.get<std::uint64_t>();
                     } else {
                       throw ApiError(400, "unknown field '" + key + "'");
                     }
                   }
                   if (!body.contains("topic_ids")) ids = svc.selection().selected();
                   if (ids.empty()) throw ApiError(400, "no topics selected");
                   std::set<int> seen;
                   for (int id : ids) {
                     api::require_topic(svc, id);
                     if (!seen.insert(id).second) throw ApiError(400, "duplicate topic id " + std::to_string(id));
                   }
                   res.status = 202;
                   return nlohmann::ordered_json{{"job_id", svc.submit(ids, k, seed)}};
                 }));

    server_.Get(p + R"(/jobs/([^/]+))", json([&svc](const httplib::Request& req, httplib::Response&) {
                  auto j = svc.job(req.matches[1]);
                  if (!j) throw ApiError(404, "unknown job " + std::string(req.matches[1]));
                  return api::job_json(*j);
                }));

    server_.Get(p + R"(/topics/([^/]+)/patents)", json([&svc](const httplib::Request& req, httplib::Response&) {
                  const int id = api::parse_topic_id(req.matches[1]);
                  api::require_topic(svc, id);
                  const double max_distance = api::query_number<double>(req, "max_distance", 2.0, 0.0, 2.0);
                  const auto limit = api::query_number<std::size_t>(req, "limit", 100, 0, 100000);
                  const auto offset = api::query_number<std::size_t>(req, "offset", 0, 0, 1000000000);
                  std::string source;
                  const auto all = svc.matches_for(id, &source);
                  std::vector<const PatentMatch*> kept;
                  for (const auto& m : all) {
                    if (m.distance <= max_distance) kept.push_back(&m);
                  }
                  auto rows = nlohmann::ordered_json::array();
                  for (std::size_t i = offset; i < kept.size() && i < offset + limit; ++i) {
                    const auto& m = *kept[i];
                    nlohmann::ordered_json row = {
                        {"patent_id", m.patent_id}, {"distance", m.distance}, {"hit_count", m.hit_count}};
                    if (const auto* p = svc.patent(m.patent_id)) {
                      row["priority_year"] = p->priority_year;
                      row["applicant_countries"] = p->applicant_countries;
                      row["tech_fields"] = p->tech_fields;
                    }
                    rows.push_back(std::move(row));
                  }
                  return nlohmann::ordered_json{{"topic_id", id},     {"source", source}, {"total", kept.size()},
                                                {"offset", offset},   {"limit", limit},   {"matches", rows}};
                }));

    server_.Get(p + R"(/analytics/([^/]+))", json([&svc](const httplib::Request& req, httplib::Response&) {
                  const std::string kind = req.matches[1];
                  const auto& c = svc.config().analytics;
                  if (kind == "by-year") return to_json(std::span<const TopicYearCount>(topics_over_time(svc.topics().topics)));
                  const auto matches = svc.all_matches();
                  if (kind == "by-country") {
                    return to_json(std::span<const KeyCount>(
                        count_by(matches, svc.patents(), CountKey::applicant_country, c.whole_counting)));
                  }
                  if (kind == "by-field") {
                    return to_json(std::span<const KeyCount>(
                        count_by(matches, svc.patents(), CountKey::tech_field, c.whole_counting)));
                  }
                  if (kind == "relatedness") return to_json(relatedness_network(matches, svc.patents(), c.min_weight));
                  if (kind == "distance-by-year") {
                    return to_json(std::span<const DistanceDistribution>(
                        distance_by_year(matches, svc.patents(), c.bin_width)));
                  }
                  throw ApiError(404, "unknown analytics table '" + kind + "'");
                }));

    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      res.set_content(api::error_body(res.status, res.status == 404 ? "not found" : "request failed").dump(),
                      "application/json");
    });
  }

  std::unique_ptr<RunService> service_;
  httplib::Server server_;
  int port_ = -1;
};

}  // namespace scitech
