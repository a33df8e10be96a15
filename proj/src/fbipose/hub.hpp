#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbipose/dataio.hpp"

namespace fbipose {

struct AnnotatorStats {
  std::string annotator_id;
  long tasks_completed = 0;
  long gold_seen = 0;
  long gold_correct_bones = 0;
  long gold_total_clear_bones = 0;
  std::int64_t total_duration_ms = 0;

  // Null when no clear gold bone has been seen.
  std::optional<double> accuracy() const;
  std::optional<double> mean_duration_ms() const;
  nlohmann::json to_json() const;
  friend bool operator==(const AnnotatorStats&, const AnnotatorStats&) = default;
};

struct GoldFeedback {
  int bone = 0;
  FbiStatus correct = FbiStatus::kUncertain;
};

struct SubmitResponse {
  bool accepted = false;
  bool is_gold = false;
  std::vector<GoldFeedback> feedback;  // gold conflicts on clear bones only
  nlohmann::json to_json() const;
};

// Bones whose gold status is Forward/Backward and where `labels` disagrees.
std::vector<int> gold_conflicts(const FbiMatrix& labels, const FbiMatrix& gold);
int clear_bone_count(const FbiMatrix& gold);

// Stats per annotator recomputed from an annotation log. Gold tasks are
// looked up in `tasks` to count their clear bones.
std::map<std::string, AnnotatorStats> stats_from_records(const std::vector<AnnotationRecord>& records,
                                                         const std::vector<TaskDefinition>& tasks);

// Task dispensing, label intake and annotator monitoring over a fixed task
// stream. Every annotator walks the whole stream in order. Submissions are
// appended to a fbi-annotation/v1 JSONL log (when a path is given); opening
// a hub on an existing log replays it. All public members are thread-safe.
class AnnotationHub {
 public:
  AnnotationHub(std::vector<TaskDefinition> stream, const std::string& log_path = {});
  ~AnnotationHub();
  AnnotationHub(const AnnotationHub&) = delete;
  AnnotationHub& operator=(const AnnotationHub&) = delete;

  // Next task for this annotator (registering it on first use), or nullopt
  // once the stream is exhausted.
  std::optional<TaskDefinition> next_task(const std::string& annotator_id);

  // kNotFound for an unknown task, kConflict for a task not served to this
  // annotator or already submitted, kInvalidArgument for malformed labels.
  SubmitResponse submit_labels(const std::string& annotator_id, const std::string& task_id,
                               const std::vector<int>& labels, std::int64_t duration_ms);

  // kNotFound for an annotator that never requested a task.
  AnnotatorStats annotator_stats(const std::string& annotator_id) const;

  // Records ordered by (created_at, task_id), optionally for one annotator.
  std::vector<AnnotationRecord> export_annotations(const std::optional<std::string>& annotator = {}) const;

  std::size_t stream_size() const noexcept { return stream_.size(); }
  const std::vector<TaskDefinition>& stream() const noexcept { return stream_; }

 private:
  struct Session {
    std::size_t cursor = 0;
    std::set<std::string> served;
    std::set<std::string> submitted;
  };

  void apply(const AnnotationRecord& record);
  void append_to_log(const AnnotationRecord& record);

  std::vector<TaskDefinition> stream_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, AnnotatorStats> stats_;
  std::vector<AnnotationRecord> records_;
  std::string log_path_;
  std::ofstream log_;
  mutable std::mutex mutex_;
};

// HTTP/JSON front end of an AnnotationHub:
//   GET  /api/tasks/next?annotator=ID
//   POST /api/tasks/{task_id}/labels   {annotator, labels[14], duration_ms}
//   GET  /api/annotators/{id}/stats
//   GET  /api/export[?annotator=ID]
//   GET  /api/topology
// plus static files from `ui_dir` when set.
class HubServer {
 public:
  explicit HubServer(AnnotationHub& hub, std::string ui_dir = {});
  ~HubServer();
  HubServer(const HubServer&) = delete;
  HubServer& operator=(const HubServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fbipose
