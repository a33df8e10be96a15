#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbipose/skeleton.hpp"
#include "fbipose/synthetic.hpp"

namespace fbipose {

// JSONL files start with a header line {"schema": "<name>/v1"} followed by
// one record per line.
enum class DatasetKind { kPose2D, kPose3D, kFbiAnnotation, kSynthetic };

inline constexpr int kSchemaVersion = 1;

std::string schema_name(DatasetKind kind);

struct Pose2DRecord {
  std::string id;
  std::string image_ref;  // optional, empty when absent
  Pose2D pose;
  std::string action;  // optional
};

struct Pose3DRecord {
  std::string id;
  Pose3D pose;
  std::string action;  // optional
};

struct AnnotationRecord {
  std::string task_id;
  std::string image_ref;
  std::string annotator_id;
  FbiMatrix labels{};
  std::int64_t duration_ms = 0;
  bool is_gold = false;
  std::vector<int> gold_conflicts;  // bone indices, empty unless is_gold
  std::int64_t created_at = 0;      // UTC milliseconds since epoch
};

struct SyntheticSample {
  std::string id;
  std::optional<Pose3D> pose3d;  // absent for FBI-only (weak) records
  Pose2D pose2d;
  FbiMatrix fbi{};
  FbiProbabilities probs;
  double scale = 1.0;
  std::uint64_t seed = 0;
  double alpha = 35.0;
  std::string action;  // optional
};

// Annotation task. gold_fbi is present exactly when is_gold and is never
// part of client_view().
struct TaskDefinition {
  std::string task_id;
  std::string image_ref;
  Pose2D pose2d;
  bool is_gold = false;
  std::optional<FbiMatrix> gold_fbi;

  nlohmann::json client_view(const SkeletonTopology& topology = SkeletonTopology::standard()) const;
};

struct LineError {
  std::size_t line = 0;  // 1-based, counting the header
  std::string message;
};

template <typename Record>
struct Dataset {
  std::vector<Record> records;
  std::vector<LineError> errors;
};

nlohmann::ordered_json to_json(const Pose2DRecord& r);
nlohmann::ordered_json to_json(const Pose3DRecord& r);
nlohmann::ordered_json to_json(const AnnotationRecord& r);
nlohmann::ordered_json to_json(const SyntheticSample& r);

// Record parsers; throw ErrorCode::kParse with a field-level message.
Pose2DRecord parse_pose2d_record(const nlohmann::json& j);
Pose3DRecord parse_pose3d_record(const nlohmann::json& j);
AnnotationRecord parse_annotation_record(const nlohmann::json& j);
SyntheticSample parse_synthetic_sample(const nlohmann::json& j);

// Readers collect malformed record lines into `errors` and keep going. A
// missing file is kIo; a header of the wrong schema or version is
// kSchemaVersion; a missing or unparseable header is kParse. An empty file
// yields no records.
Dataset<Pose2DRecord> read_pose2d(const std::string& path);
Dataset<Pose3DRecord> read_pose3d(const std::string& path);
Dataset<AnnotationRecord> read_annotations(const std::string& path);
Dataset<SyntheticSample> read_synthetic(const std::string& path);

void write_pose2d(const std::vector<Pose2DRecord>& records, const std::string& path);
void write_pose3d(const std::vector<Pose3DRecord>& records, const std::string& path);
void write_annotations(const std::vector<AnnotationRecord>& records, const std::string& path);
void write_synthetic(const std::vector<SyntheticSample>& records, const std::string& path);

// Same bytes as the file writers, to a string (header line included).
std::string serialize_annotations(const std::vector<AnnotationRecord>& records);

std::string header_line(DatasetKind kind);

// Regular tasks plus gold tasks in a seeded random order, such that gold
// makes up `gold_fraction` of the stream: round(f * N / (1 - f)) gold items
// for N regular tasks, drawn without replacement from the pool while it
// lasts (further rounds reshuffle the pool and suffix the task id with
// "-r<k>"). gold_fraction = 1 yields the shuffled gold pool alone.
std::vector<TaskDefinition> mix_gold(const std::vector<TaskDefinition>& tasks,
                                     const std::vector<TaskDefinition>& gold_tasks, double gold_fraction,
                                     std::uint64_t seed);

// Fraction of bone labels equal to Uncertain. Throws kEmptyDataset on empty
// input.
double uncertain_fraction(const std::vector<FbiMatrix>& labels);
double uncertain_fraction(const std::vector<AnnotationRecord>& records);

std::int64_t now_utc_ms();

}  // namespace fbipose
