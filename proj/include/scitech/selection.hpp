#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "scitech/common.hpp"

namespace scitech {

struct TopicSelection {
  bool selected = false;
  std::string note;
  std::string updated_at;  // empty until first update

  bool operator==(const TopicSelection&) const = default;
};

/// Expert topic selection for one run, persisted to <run_dir>/selection.json.
/// Updates are serialized and every accepted update carries a strictly later
/// updated_at than the previous one.
class SelectionStore {
 public:
  static constexpr const char* kFile = "selection.json";

  SelectionStore(std::filesystem::path run_dir, std::set<int> topic_ids, Warnings* warnings = nullptr)
      : path_(std::move(run_dir) / kFile), topic_ids_(std::move(topic_ids)) {
    if (!std::filesystem::exists(path_)) return;
    const auto j = nlohmann::json::parse(read_file(path_));
    for (const auto& [key, v] : j.at("topics").items()) {
      const int id = std::stoi(key);
      if (!topic_ids_.contains(id)) {
        warn(warnings, "selection: topic " + key + " is not in this run; entry dropped");
        continue;
      }
      TopicSelection s{v.at("selected").get<bool>(), v.value("note", ""), v.value("updated_at", "")};
      state_[id] = s;
    }
    last_ms_ = j.value("last_update_ms", std::int64_t{0});
  }

  bool has_topic(int id) const { return topic_ids_.contains(id); }

  TopicSelection get(int id) const {
    std::lock_guard lock(mutex_);
    auto it = state_.find(id);
    return it == state_.end() ? TopicSelection{} : it->second;
  }

  std::vector<int> selected() const {
    std::lock_guard lock(mutex_);
    std::vector<int> out;
    for (const auto& [id, s] : state_) {
      if (s.selected) out.push_back(id);
    }
    return out;
  }

  TopicSelection update(int id, std::optional<bool> selected, std::optional<std::string> note) {
    if (!has_topic(id)) throw Error("unknown topic " + std::to_string(id));
    std::lock_guard lock(mutex_);
    auto next = state_[id];
    if (selected) next.selected = *selected;
    if (note) next.note = *note;
    const auto now_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
    const std::int64_t ms = std::max<std::int64_t>(now_ms, last_ms_ + 1);
    next.updated_at = iso_timestamp(std::chrono::system_clock::time_point(std::chrono::milliseconds(ms)));
    auto previous = state_;
    state_[id] = next;
    const auto previous_ms = last_ms_;
    last_ms_ = ms;
    try {
      persist();
    } catch (...) {
      state_ = std::move(previous);
      last_ms_ = previous_ms;
      throw;
    }
    return next;
  }

 private:
  void persist() const {
    nlohmann::ordered_json topics = nlohmann::ordered_json::object();
    for (const auto& [id, s] : state_) {
      topics[std::to_string(id)] = {{"selected", s.selected}, {"note", s.note}, {"updated_at", s.updated_at}};
    }
    nlohmann::ordered_json j = {{"last_update_ms", last_ms_}, {"topics", std::move(topics)}};
    write_file_atomic(path_, j.dump(2) + '\n');
  }

  std::filesystem::path path_;
  std::set<int> topic_ids_;
  mutable std::mutex mutex_;
  std::map<int, TopicSelection> state_;
  std::int64_t last_ms_ = 0;
};

}  // namespace scitech
