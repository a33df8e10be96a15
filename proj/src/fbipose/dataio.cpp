#include "fbipose/dataio.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "fbipose/error.hpp"

namespace fbipose {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  fail(ErrorCode::kParse, "field '" + field + "': " + what);
}

const json& field(const json& j, const char* name) {
  if (!j.is_object()) fail(ErrorCode::kParse, "record is not a JSON object");
  auto it = j.find(name);
  if (it == j.end()) bad(name, "missing");
  return *it;
}

std::string string_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) bad(name, "expected a string");
  return v.get<std::string>();
}

std::string optional_string(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) bad(name, "expected a string");
  return it->get<std::string>();
}

double number(const json& v, const std::string& name) {
  if (!v.is_number()) bad(name, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(name, "not finite");
  return x;
}

template <int N>
std::vector<Eigen::Matrix<double, N, 1>> parse_points(const json& v, const char* name) {
  if (!v.is_array()) bad(name, "expected an array of joints");
  if (v.size() != static_cast<std::size_t>(kNumJoints)) {
    bad(name, "expected " + std::to_string(kNumJoints) + " joints, got " + std::to_string(v.size()));
  }
  std::vector<Eigen::Matrix<double, N, 1>> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& p = v[i];
    const std::string where = std::string(name) + "[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != static_cast<std::size_t>(N)) {
      bad(where, "expected " + std::to_string(N) + " coordinates");
    }
    for (int k = 0; k < N; ++k) out[i](k) = number(p[static_cast<std::size_t>(k)], where);
  }
  return out;
}

template <typename V>
ojson points_json(const std::vector<V>& pts) {
  ojson a = ojson::array();
  for (const auto& p : pts) {
    ojson row = ojson::array();
    for (Eigen::Index k = 0; k < p.size(); ++k) row.push_back(p(k));
    a.push_back(std::move(row));
  }
  return a;
}

FbiMatrix parse_labels(const json& v, const char* name) {
  if (!v.is_array() || v.size() != static_cast<std::size_t>(kNumFbiBones)) {
    bad(name, "expected " + std::to_string(kNumFbiBones) + " labels");
  }
  FbiMatrix out{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) bad(name, "labels must be integers 0, 1 or 2");
    const int x = v[i].get<int>();
    if (x < 0 || x > 2) bad(name, "label " + std::to_string(x) + " is not 0, 1 or 2");
    out[i] = static_cast<FbiStatus>(x);
  }
  return out;
}

ojson labels_json(const FbiMatrix& m) {
  ojson a = ojson::array();
  for (FbiStatus s : m) a.push_back(static_cast<int>(s));
  return a;
}

FbiProbRows parse_prob_rows(const json& v, const char* name) {
  if (!v.is_array() || v.size() != static_cast<std::size_t>(kNumFbiBones)) {
    bad(name, "expected " + std::to_string(kNumFbiBones) + " rows");
  }
  FbiProbRows out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != 3) bad(name, "rows must hold 3 probabilities");
    for (int k = 0; k < 3; ++k) out(static_cast<Eigen::Index>(i), k) = number(v[i][static_cast<std::size_t>(k)], name);
  }
  return out;
}

ojson prob_rows_json(const FbiProbRows& m) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(ojson::array({m(i, 0), m(i, 1), m(i, 2)}));
  return a;
}

// Reads "<name>/v<version>" from a header line.
void check_header(const std::string& line, DatasetKind kind) {
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("unparseable header line: ") + e.what());
  }
  if (!h.is_object() || !h.contains("schema") || !h["schema"].is_string()) {
    fail(ErrorCode::kParse, "first line must be a {\"schema\": \"<name>/v1\"} header");
  }
  const auto schema = h["schema"].get<std::string>();
  const auto slash = schema.rfind("/v");
  const std::string name = schema.substr(0, slash);
  if (slash == std::string::npos || name != schema_name(kind)) {
    fail(ErrorCode::kSchemaVersion, "expected schema " + schema_name(kind) + ", found " + schema);
  }
  if (schema.substr(slash + 2) != std::to_string(kSchemaVersion)) {
    fail(ErrorCode::kSchemaVersion, "unsupported schema version " + schema + " (this build reads " +
                                        schema_name(kind) + "/v" + std::to_string(kSchemaVersion) + ")");
  }
}

template <typename Record, typename Parse>
Dataset<Record> read_jsonl(const std::string& path, DatasetKind kind, Parse parse) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  Dataset<Record> out;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!have_header) {
      check_header(line, kind);
      have_header = true;
      continue;
    }
    try {
      out.records.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      out.errors.push_back({number, e.what()});
    } catch (const Error& e) {
      out.errors.push_back({number, e.what()});
    }
  }
  if (in.bad()) fail(ErrorCode::kIo, "failed reading " + path);
  return out;
}

template <typename Record>
std::string serialize(const std::vector<Record>& records, DatasetKind kind) {
  std::string out = header_line(kind);
  out += '\n';
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) fail(ErrorCode::kIo, "failed writing " + path);
}

}  // namespace

std::string schema_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kPose2D: return "pose2d";
    case DatasetKind::kPose3D: return "pose3d";
    case DatasetKind::kFbiAnnotation: return "fbi-annotation";
    case DatasetKind::kSynthetic: return "synthetic-sample";
  }
  return "unknown";
}

std::string header_line(DatasetKind kind) {
  return ojson{{"schema", schema_name(kind) + "/v" + std::to_string(kSchemaVersion)}}.dump();
}

nlohmann::json TaskDefinition::client_view(const SkeletonTopology& topology) const {
  json bones = json::array();
  const auto& names = topology.joint_names();
  for (const auto& b : topology.fbi_bones()) {
    bones.push_back({{"from", names[static_cast<std::size_t>(b.parent)]},
                     {"to", names[static_cast<std::size_t>(b.child)]}});
  }
  return {{"task_id", task_id},
          {"image_ref", image_ref},
          {"pose2d", json(points_json(pose2d.joints))},
          {"bones", std::move(bones)},
          {"topology_version", topology.version()}};
}

ojson to_json(const Pose2DRecord& r) {
  ojson j;
  j["id"] = r.id;
  if (!r.image_ref.empty()) j["image_ref"] = r.image_ref;
  j["pose2d"] = points_json(r.pose.joints);
  if (!r.action.empty()) j["action"] = r.action;
  return j;
}

ojson to_json(const Pose3DRecord& r) {
  ojson j;
  j["id"] = r.id;
  j["pose3d"] = points_json(r.pose.joints);
  if (!r.action.empty()) j["action"] = r.action;
  return j;
}

ojson to_json(const AnnotationRecord& r) {
  ojson j;
  j["task_id"] = r.task_id;
  j["image_ref"] = r.image_ref;
  j["annotator_id"] = r.annotator_id;
  j["labels"] = labels_json(r.labels);
  j["duration_ms"] = r.duration_ms;
  j["is_gold"] = r.is_gold;
  j["gold_conflicts"] = r.gold_conflicts;
  j["created_at"] = r.created_at;
  return j;
}

ojson to_json(const SyntheticSample& r) {
  ojson j;
  j["id"] = r.id;
  j["pose3d"] = r.pose3d ? points_json(r.pose3d->joints) : ojson(nullptr);
  j["pose2d"] = points_json(r.pose2d.joints);
  j["fbi"] = labels_json(r.fbi);
  j["p_fws"] = prob_rows_json(r.probs.p_fws);
  j["p_aws"] = prob_rows_json(r.probs.p_aws);
  j["scale"] = r.scale;
  j["seed"] = r.seed;
  j["alpha"] = r.alpha;
  if (!r.action.empty()) j["action"] = r.action;
  return j;
}

Pose2DRecord parse_pose2d_record(const json& j) {
  Pose2DRecord r;
  r.id = string_field(j, "id");
  r.image_ref = optional_string(j, "image_ref");
  r.pose.joints = parse_points<2>(field(j, "pose2d"), "pose2d");
  r.action = optional_string(j, "action");
  return r;
}

Pose3DRecord parse_pose3d_record(const json& j) {
  Pose3DRecord r;
  r.id = string_field(j, "id");
  r.pose.joints = parse_points<3>(field(j, "pose3d"), "pose3d");
  r.action = optional_string(j, "action");
  return r;
}

AnnotationRecord parse_annotation_record(const json& j) {
  AnnotationRecord r;
  r.task_id = string_field(j, "task_id");
  r.image_ref = string_field(j, "image_ref");
  r.annotator_id = string_field(j, "annotator_id");
  r.labels = parse_labels(field(j, "labels"), "labels");
  const json& d = field(j, "duration_ms");
  if (!d.is_number_integer()) bad("duration_ms", "expected an integer");
  r.duration_ms = d.get<std::int64_t>();
  if (r.duration_ms < 0) bad("duration_ms", "must be >= 0");
  const json& g = field(j, "is_gold");
  if (!g.is_boolean()) bad("is_gold", "expected a boolean");
  r.is_gold = g.get<bool>();
  const json& c = field(j, "gold_conflicts");
  if (!c.is_array()) bad("gold_conflicts", "expected an array");
  for (const auto& b : c) {
    if (!b.is_number_integer()) bad("gold_conflicts", "expected bone indices");
    const int bone = b.get<int>();
    if (bone < 0 || bone >= kNumFbiBones) bad("gold_conflicts", "bone index out of range");
    r.gold_conflicts.push_back(bone);
  }
  if (!r.is_gold && !r.gold_conflicts.empty()) bad("gold_conflicts", "must be empty for non-gold tasks");
  const json& t = field(j, "created_at");
  if (!t.is_number_integer()) bad("created_at", "expected integer milliseconds");
  r.created_at = t.get<std::int64_t>();
  return r;
}

SyntheticSample parse_synthetic_sample(const json& j) {
  SyntheticSample r;
  r.id = string_field(j, "id");
  const json& p3 = field(j, "pose3d");
  if (!p3.is_null()) r.pose3d = Pose3D{parse_points<3>(p3, "pose3d")};
  r.pose2d.joints = parse_points<2>(field(j, "pose2d"), "pose2d");
  r.fbi = parse_labels(field(j, "fbi"), "fbi");
  r.probs.p_fws = parse_prob_rows(field(j, "p_fws"), "p_fws");
  r.probs.p_aws = parse_prob_rows(field(j, "p_aws"), "p_aws");
  try {
    r.probs.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kParse, e.what());
  }
  r.scale = number(field(j, "scale"), "scale");
  if (!(r.scale > 0.0)) bad("scale", "must be > 0");
  const json& seed = field(j, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    bad("seed", "expected a non-negative integer");
  }
  r.seed = seed.get<std::uint64_t>();
  auto alpha = j.find("alpha");
  if (alpha != j.end()) r.alpha = number(*alpha, "alpha");
  r.action = optional_string(j, "action");
  return r;
}

Dataset<Pose2DRecord> read_pose2d(const std::string& path) {
  return read_jsonl<Pose2DRecord>(path, DatasetKind::kPose2D, parse_pose2d_record);
}

Dataset<Pose3DRecord> read_pose3d(const std::string& path) {
  return read_jsonl<Pose3DRecord>(path, DatasetKind::kPose3D, parse_pose3d_record);
}

Dataset<AnnotationRecord> read_annotations(const std::string& path) {
  return read_jsonl<AnnotationRecord>(path, DatasetKind::kFbiAnnotation, parse_annotation_record);
}

Dataset<SyntheticSample> read_synthetic(const std::string& path) {
  return read_jsonl<SyntheticSample>(path, DatasetKind::kSynthetic, parse_synthetic_sample);
}

void write_pose2d(const std::vector<Pose2DRecord>& records, const std::string& path) {
  write_text(serialize(records, DatasetKind::kPose2D), path);
}

void write_pose3d(const std::vector<Pose3DRecord>& records, const std::string& path) {
  write_text(serialize(records, DatasetKind::kPose3D), path);
}

void write_annotations(const std::vector<AnnotationRecord>& records, const std::string& path) {
  write_text(serialize_annotations(records), path);
}

void write_synthetic(const std::vector<SyntheticSample>& records, const std::string& path) {
  write_text(serialize(records, DatasetKind::kSynthetic), path);
}

std::string serialize_annotations(const std::vector<AnnotationRecord>& records) {
  return serialize(records, DatasetKind::kFbiAnnotation);
}

std::vector<TaskDefinition> mix_gold(const std::vector<TaskDefinition>& tasks,
                                     const std::vector<TaskDefinition>& gold_tasks, double gold_fraction,
                                     std::uint64_t seed) {
  if (!(gold_fraction >= 0.0 && gold_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "gold fraction must lie in [0, 1]");
  }
  if (gold_fraction > 0.0 && gold_tasks.empty()) {
    fail(ErrorCode::kInvalidArgument, "gold fraction > 0 needs a non-empty gold pool");
  }
  for (const auto& g : gold_tasks) {
    if (!g.is_gold || !g.gold_fbi) fail(ErrorCode::kInvalidArgument, "gold task '" + g.task_id + "' has no gold labels");
  }
  std::mt19937_64 rng(seed);
  std::vector<TaskDefinition> out;
  std::size_t n_gold = 0;
  if (gold_fraction >= 1.0) {
    n_gold = gold_tasks.size();
  } else {
    out = tasks;
    const double n = static_cast<double>(tasks.size());
    n_gold = static_cast<std::size_t>(std::llround(gold_fraction * n / (1.0 - gold_fraction)));
  }
  std::vector<std::size_t> pool(gold_tasks.size());
  for (std::size_t round = 0; n_gold > 0; ++round) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t take = std::min(n_gold, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      TaskDefinition g = gold_tasks[pool[i]];
      if (round > 0) g.task_id += "-r" + std::to_string(round);
      out.push_back(std::move(g));
    }
    n_gold -= take;
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

double uncertain_fraction(const std::vector<FbiMatrix>& labels) {
  if (labels.empty()) fail(ErrorCode::kEmptyDataset, "no labels");
  std::size_t uncertain = 0;
  for (const auto& m : labels) uncertain += static_cast<std::size_t>(std::count(m.begin(), m.end(), FbiStatus::kUncertain));
  return static_cast<double>(uncertain) / static_cast<double>(labels.size() * kNumFbiBones);
}

double uncertain_fraction(const std::vector<AnnotationRecord>& records) {
  std::vector<FbiMatrix> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.labels);
  return uncertain_fraction(labels);
}

std::int64_t now_utc_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace fbipose
