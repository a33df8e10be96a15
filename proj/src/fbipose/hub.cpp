#include "fbipose/hub.hpp"

#include <algorithm>
#include <filesystem>

#include "fbipose/error.hpp"

namespace fbipose {

std::optional<double> AnnotatorStats::accuracy() const {
  if (gold_total_clear_bones == 0) return std::nullopt;
  return static_cast<double>(gold_correct_bones) / static_cast<double>(gold_total_clear_bones);
}

std::optional<double> AnnotatorStats::mean_duration_ms() const {
  if (tasks_completed == 0) return std::nullopt;
  return static_cast<double>(total_duration_ms) / static_cast<double>(tasks_completed);
}

nlohmann::json AnnotatorStats::to_json() const {
  const auto acc = accuracy();
  const auto dur = mean_duration_ms();
  return {{"annotator_id", annotator_id},
          {"tasks_completed", tasks_completed},
          {"gold_seen", gold_seen},
          {"gold_correct_bones", gold_correct_bones},
          {"gold_total_clear_bones", gold_total_clear_bones},
          {"accuracy", acc ? nlohmann::json(*acc) : nlohmann::json(nullptr)},
          {"mean_duration_ms", dur ? nlohmann::json(*dur) : nlohmann::json(nullptr)}};
}

nlohmann::json SubmitResponse::to_json() const {
  nlohmann::json fb = nullptr;
  if (is_gold) {
    fb = nlohmann::json::array();
    for (const auto& f : feedback) fb.push_back({{"bone", f.bone}, {"correct", static_cast<int>(f.correct)}});
  }
  return {{"accepted", accepted}, {"feedback", fb}};
}

std::vector<int> gold_conflicts(const FbiMatrix& labels, const FbiMatrix& gold) {
  std::vector<int> out;
  for (int b = 0; b < kNumFbiBones; ++b) {
    const auto i = static_cast<std::size_t>(b);
    if (gold[i] != FbiStatus::kUncertain && labels[i] != gold[i]) out.push_back(b);
  }
  return out;
}

int clear_bone_count(const FbiMatrix& gold) {
  return static_cast<int>(std::count_if(gold.begin(), gold.end(), [](FbiStatus s) { return s != FbiStatus::kUncertain; }));
}

namespace {

void accumulate(AnnotatorStats& s, const AnnotationRecord& r, const TaskDefinition* task) {
  ++s.tasks_completed;
  s.total_duration_ms += r.duration_ms;
  if (r.is_gold) {
    ++s.gold_seen;
    const int clear = task != nullptr && task->gold_fbi ? clear_bone_count(*task->gold_fbi) : 0;
    s.gold_total_clear_bones += clear;
    s.gold_correct_bones += clear - static_cast<long>(r.gold_conflicts.size());
  }
}

}  // namespace

std::map<std::string, AnnotatorStats> stats_from_records(const std::vector<AnnotationRecord>& records,
                                                         const std::vector<TaskDefinition>& tasks) {
  std::unordered_map<std::string, const TaskDefinition*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.task_id, &t);
  std::map<std::string, AnnotatorStats> out;
  for (const auto& r : records) {
    auto& s = out[r.annotator_id];
    s.annotator_id = r.annotator_id;
    auto it = by_id.find(r.task_id);
    accumulate(s, r, it == by_id.end() ? nullptr : it->second);
  }
  return out;
}

AnnotationHub::AnnotationHub(std::vector<TaskDefinition> stream, const std::string& log_path)
    : stream_(std::move(stream)), log_path_(log_path) {
  for (std::size_t i = 0; i < stream_.size(); ++i) {
    const auto& t = stream_[i];
    if (t.is_gold != t.gold_fbi.has_value()) {
      fail(ErrorCode::kInvalidArgument, "task '" + t.task_id + "': gold labels must be present exactly for gold tasks");
    }
    if (!index_.emplace(t.task_id, i).second) fail(ErrorCode::kInvalidArgument, "duplicate task id '" + t.task_id + "'");
  }
  if (log_path_.empty()) return;

  if (std::filesystem::exists(log_path_) && std::filesystem::file_size(log_path_) > 0) {
    auto existing = read_annotations(log_path_);
    if (!existing.errors.empty()) {
      fail(ErrorCode::kParse, "annotation log " + log_path_ + " line " + std::to_string(existing.errors.front().line) +
                                  ": " + existing.errors.front().message);
    }
    for (const auto& r : existing.records) {
      if (!index_.count(r.task_id)) {
        fail(ErrorCode::kNotFound, "annotation log refers to unknown task '" + r.task_id + "'");
      }
      apply(r);
    }
    log_.open(log_path_, std::ios::app);
  } else {
    log_.open(log_path_, std::ios::trunc);
    if (log_) log_ << header_line(DatasetKind::kFbiAnnotation) << '\n' << std::flush;
  }
  if (!log_) fail(ErrorCode::kIo, "cannot open annotation log " + log_path_);
}

AnnotationHub::~AnnotationHub() = default;

void AnnotationHub::apply(const AnnotationRecord& r) {
  auto& session = sessions_[r.annotator_id];
  const std::size_t pos = index_.at(r.task_id);
  session.cursor = std::max(session.cursor, pos + 1);
  session.served.erase(r.task_id);
  session.submitted.insert(r.task_id);
  auto& s = stats_[r.annotator_id];
  s.annotator_id = r.annotator_id;
  accumulate(s, r, &stream_[pos]);
  records_.push_back(r);
}

void AnnotationHub::append_to_log(const AnnotationRecord& r) {
  if (!log_.is_open()) return;
  log_ << to_json(r).dump() << '\n' << std::flush;
  if (!log_) fail(ErrorCode::kIo, "failed appending to annotation log " + log_path_);
}

std::optional<TaskDefinition> AnnotationHub::next_task(const std::string& annotator_id) {
  if (annotator_id.empty()) fail(ErrorCode::kInvalidArgument, "annotator id must not be empty");
  std::lock_guard lock(mutex_);
  auto& session = sessions_[annotator_id];
  auto& s = stats_[annotator_id];
  s.annotator_id = annotator_id;
  while (session.cursor < stream_.size()) {
    const auto& t = stream_[session.cursor++];
    if (session.submitted.count(t.task_id)) continue;
    session.served.insert(t.task_id);
    return t;
  }
  return std::nullopt;
}

SubmitResponse AnnotationHub::submit_labels(const std::string& annotator_id, const std::string& task_id,
                                            const std::vector<int>& labels, std::int64_t duration_ms) {
  if (labels.size() != static_cast<std::size_t>(kNumFbiBones)) {
    fail(ErrorCode::kInvalidArgument, "expected " + std::to_string(kNumFbiBones) + " labels, got " +
                                          std::to_string(labels.size()));
  }
  if (duration_ms < 0) fail(ErrorCode::kInvalidArgument, "duration_ms must be >= 0");
  FbiMatrix m{};
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = fbi_status_from_int(labels[i]);

  std::lock_guard lock(mutex_);
  auto it = index_.find(task_id);
  if (it == index_.end()) fail(ErrorCode::kNotFound, "unknown task '" + task_id + "'");
  auto sit = sessions_.find(annotator_id);
  if (sit != sessions_.end() && sit->second.submitted.count(task_id)) {
    fail(ErrorCode::kConflict, "task '" + task_id + "' was already submitted by '" + annotator_id + "'");
  }
  if (sit == sessions_.end() || !sit->second.served.count(task_id)) {
    fail(ErrorCode::kConflict, "task '" + task_id + "' was not served to '" + annotator_id + "'");
  }
  const TaskDefinition& task = stream_[it->second];

  AnnotationRecord r;
  r.task_id = task_id;
  r.image_ref = task.image_ref;
  r.annotator_id = annotator_id;
  r.labels = m;
  r.duration_ms = duration_ms;
  r.is_gold = task.is_gold;
  SubmitResponse resp;
  resp.accepted = true;
  resp.is_gold = task.is_gold;
  if (task.is_gold) {
    r.gold_conflicts = gold_conflicts(m, *task.gold_fbi);
    for (int b : r.gold_conflicts) resp.feedback.push_back({b, (*task.gold_fbi)[static_cast<std::size_t>(b)]});
  }
  r.created_at = now_utc_ms();
  append_to_log(r);
  apply(r);
  return resp;
}

AnnotatorStats AnnotationHub::annotator_stats(const std::string& annotator_id) const {
  std::lock_guard lock(mutex_);
  auto it = stats_.find(annotator_id);
  if (it == stats_.end()) fail(ErrorCode::kNotFound, "unknown annotator '" + annotator_id + "'");
  return it->second;
}

std::vector<AnnotationRecord> AnnotationHub::export_annotations(const std::optional<std::string>& annotator) const {
  std::vector<AnnotationRecord> out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& r : records_) {
      if (!annotator || r.annotator_id == *annotator) out.push_back(r);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    if (a.created_at != b.created_at) return a.created_at < b.created_at;
    return a.task_id < b.task_id;
  });
  return out;
}

}  // namespace fbipose
