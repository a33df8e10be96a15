#include "fbipose/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fbipose/embedded_config.hpp"
#include "fbipose/error.hpp"

namespace fbipose {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDegenerateLength = 1e-12;

Edge parse_edge(const nlohmann::json& pair, const SkeletonTopology& topo) {
  if (!pair.is_array() || pair.size() != 2) {
    fail(ErrorCode::kTopologyMismatch, "edge must be a [parent, child] pair");
  }
  return Edge{topo.joint_index(pair[0].get<std::string>()),
              topo.joint_index(pair[1].get<std::string>())};
}

}  // namespace

std::string_view to_string(FbiStatus status) noexcept {
  switch (status) {
    case FbiStatus::kForward: return "forward";
    case FbiStatus::kBackward: return "backward";
    case FbiStatus::kUncertain: return "uncertain";
  }
  return "?";
}

FbiStatus fbi_status_from_int(int value) {
  if (value < 0 || value > 2) {
    fail(ErrorCode::kInvalidArgument, "FBI status must be 0, 1 or 2, got " + std::to_string(value));
  }
  return static_cast<FbiStatus>(value);
}

FbiMatrix uniform_fbi(FbiStatus status) {
  FbiMatrix m;
  m.fill(status);
  return m;
}

const SkeletonTopology& SkeletonTopology::standard() {
  static const SkeletonTopology topo =
      SkeletonTopology::from_json(nlohmann::json::parse(embedded::kTopologyJson));
  return topo;
}

SkeletonTopology SkeletonTopology::from_json(const nlohmann::json& doc) {
  SkeletonTopology t;
  try {
    if (doc.at("schema").get<std::string>() != "skeleton-topology/v1") {
      fail(ErrorCode::kSchemaVersion, "unsupported topology schema " + doc.at("schema").dump());
    }
    t.version_ = doc.at("version").get<int>();
    t.joint_names_ = doc.at("joints").get<std::vector<std::string>>();
    if (static_cast<int>(t.joint_names_.size()) != kNumJoints) {
      fail(ErrorCode::kTopologyMismatch, "topology must have exactly 16 joints");
    }
    t.root_ = t.joint_index(doc.at("root").get<std::string>());
    for (const auto& e : doc.at("tree_edges")) t.tree_edges_.push_back(parse_edge(e, t));
    for (const auto& e : doc.at("fbi_bones")) t.fbi_bones_.push_back(parse_edge(e, t));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed topology document: ") + e.what());
  }

  if (static_cast<int>(t.tree_edges_.size()) != kNumTreeEdges) {
    fail(ErrorCode::kTopologyMismatch, "topology must have exactly 15 tree edges");
  }
  if (static_cast<int>(t.fbi_bones_.size()) != kNumFbiBones) {
    fail(ErrorCode::kTopologyMismatch, "topology must have exactly 14 FBI bones");
  }

  // Spanning tree rooted at root_, listed so that every parent is placed
  // before it is used (root-to-leaf accumulation relies on this order).
  t.edge_into_.assign(kNumJoints, -1);
  std::vector<bool> placed(kNumJoints, false);
  placed[static_cast<std::size_t>(t.root_)] = true;
  for (int e = 0; e < kNumTreeEdges; ++e) {
    const Edge& edge = t.tree_edges_[static_cast<std::size_t>(e)];
    if (!placed[static_cast<std::size_t>(edge.parent)]) {
      fail(ErrorCode::kTopologyMismatch, "tree edge " + std::to_string(e) +
                                             " appears before its parent joint is reachable");
    }
    if (placed[static_cast<std::size_t>(edge.child)]) {
      fail(ErrorCode::kTopologyMismatch, "joint " + t.joint_names_[edge.child] + " has two parents");
    }
    placed[static_cast<std::size_t>(edge.child)] = true;
    t.edge_into_[static_cast<std::size_t>(edge.child)] = e;
  }

  t.edge_bone_.assign(kNumTreeEdges, -1);
  for (int b = 0; b < kNumFbiBones; ++b) {
    const Edge& bone = t.fbi_bones_[static_cast<std::size_t>(b)];
    auto it = std::find(t.tree_edges_.begin(), t.tree_edges_.end(), bone);
    if (it == t.tree_edges_.end()) {
      fail(ErrorCode::kTopologyMismatch, "FBI bone " + std::to_string(b) + " is not a tree edge");
    }
    const int e = static_cast<int>(it - t.tree_edges_.begin());
    if (t.edge_bone_[static_cast<std::size_t>(e)] != -1) {
      fail(ErrorCode::kTopologyMismatch, "FBI bone listed twice");
    }
    t.edge_bone_[static_cast<std::size_t>(e)] = b;
    t.bone_edge_.push_back(e);
  }
  for (int e = 0; e < kNumTreeEdges; ++e) {
    if (t.edge_bone_[static_cast<std::size_t>(e)] == -1) t.spine_edge_ = e;
  }
  return t;
}

nlohmann::json SkeletonTopology::to_json() const {
  auto pair = [this](const Edge& e) {
    return nlohmann::json::array({joint_names_[static_cast<std::size_t>(e.parent)],
                                  joint_names_[static_cast<std::size_t>(e.child)]});
  };
  nlohmann::json doc;
  doc["schema"] = "skeleton-topology/v1";
  doc["version"] = version_;
  doc["root"] = joint_names_[static_cast<std::size_t>(root_)];
  doc["joints"] = joint_names_;
  doc["tree_edges"] = nlohmann::json::array();
  for (const auto& e : tree_edges_) doc["tree_edges"].push_back(pair(e));
  doc["fbi_bones"] = nlohmann::json::array();
  for (const auto& e : fbi_bones_) doc["fbi_bones"].push_back(pair(e));
  return doc;
}

int SkeletonTopology::joint_index(std::string_view name) const {
  auto it = std::find(joint_names_.begin(), joint_names_.end(), name);
  if (it == joint_names_.end()) {
    fail(ErrorCode::kTopologyMismatch, "unknown joint '" + std::string(name) + "'");
  }
  return static_cast<int>(it - joint_names_.begin());
}

BoneLengthPrior BoneLengthPrior::standard() {
  static const BoneLengthPrior prior = BoneLengthPrior::from_json(
      nlohmann::json::parse(embedded::kSynthConfigJson).at("bone_lengths_mm"),
      SkeletonTopology::standard());
  return prior;
}

BoneLengthPrior BoneLengthPrior::from_json(const nlohmann::json& by_child_joint,
                                           const SkeletonTopology& topology) {
  BoneLengthPrior p;
  for (int e = 0; e < kNumTreeEdges; ++e) {
    const auto& name = topology.joint_names()[static_cast<std::size_t>(topology.tree_edges()[e].child)];
    if (!by_child_joint.contains(name)) {
      fail(ErrorCode::kInvalidArgument, "bone length for '" + name + "' missing");
    }
    p.lengths[static_cast<std::size_t>(e)] = by_child_joint.at(name).get<double>();
  }
  p.validate();
  return p;
}

nlohmann::json BoneLengthPrior::to_json(const SkeletonTopology& topology) const {
  nlohmann::json j = nlohmann::json::object();
  for (int e = 0; e < kNumTreeEdges; ++e) {
    j[topology.joint_names()[static_cast<std::size_t>(topology.tree_edges()[e].child)]] =
        lengths[static_cast<std::size_t>(e)];
  }
  return j;
}

void BoneLengthPrior::validate() const {
  for (std::size_t e = 0; e < lengths.size(); ++e) {
    if (!(lengths[e] > 0.0) || !std::isfinite(lengths[e])) {
      fail(ErrorCode::kInvalidArgument, "bone length prior " + std::to_string(e) + " must be positive");
    }
  }
}

double out_of_plane_angle(const Pose3D& pose, int bone, const SkeletonTopology& topology) {
  if (bone < 0 || bone >= kNumFbiBones) {
    fail(ErrorCode::kInvalidArgument, "bone index " + std::to_string(bone) + " out of range [0,14)");
  }
  if (static_cast<int>(pose.joints.size()) != kNumJoints) {
    fail(ErrorCode::kInvalidArgument, "pose must have 16 joints");
  }
  const Edge& e = topology.fbi_bones()[static_cast<std::size_t>(bone)];
  const Vec3& b0 = pose.joints[static_cast<std::size_t>(e.parent)];
  const Vec3& b1 = pose.joints[static_cast<std::size_t>(e.child)];
  const double length = (b1 - b0).norm();
  if (!(length > kDegenerateLength)) {
    fail(ErrorCode::kDegenerateBone, "bone " + std::to_string(bone) + " has zero length");
  }
  const double ratio = std::clamp((b0.z() - b1.z()) / length, -1.0, 1.0);
  return std::asin(ratio) * kRadToDeg;
}

FbiConversion convert_pose_to_fbi(const Pose3D& pose, double alpha_deg, const SkeletonTopology& topology) {
  if (!(alpha_deg >= 0.0 && alpha_deg <= 90.0)) {
    fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 90] degrees");
  }
  FbiConversion out;
  for (int b = 0; b < kNumFbiBones; ++b) {
    double theta = 0.0;
    try {
      theta = out_of_plane_angle(pose, b, topology);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kDegenerateBone) throw;
      out.labels[static_cast<std::size_t>(b)] = FbiStatus::kUncertain;
      out.degenerate_bones.push_back(b);
      continue;
    }
    FbiStatus s = FbiStatus::kUncertain;
    if (theta > alpha_deg) {
      s = FbiStatus::kForward;
    } else if (theta < -alpha_deg) {
      s = FbiStatus::kBackward;
    }
    out.labels[static_cast<std::size_t>(b)] = s;
  }
  return out;
}

FbiOneHot fbi_one_hot(const FbiMatrix& matrix) {
  FbiOneHot m = FbiOneHot::Zero();
  for (int b = 0; b < kNumFbiBones; ++b) {
    m(b, static_cast<int>(matrix[static_cast<std::size_t>(b)])) = 1.0;
  }
  return m;
}

namespace {

template <typename Joints>
std::vector<PoseViolation> validate_joints(const Joints& joints, const SkeletonTopology& topology) {
  std::vector<PoseViolation> out;
  if (static_cast<int>(joints.size()) != kNumJoints) {
    out.push_back({PoseViolation::Kind::kJointCount, -1,
                   "expected 16 joints, got " + std::to_string(joints.size())});
  }
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (!joints[j].allFinite()) {
      const std::string name = j < topology.joint_names().size() ? topology.joint_names()[j]
                                                                 : "#" + std::to_string(j);
      out.push_back({PoseViolation::Kind::kNonFinite, static_cast<int>(j),
                     "joint " + std::to_string(j) + " (" + name + ") has a non-finite coordinate"});
    }
  }
  return out;
}

[[noreturn]] void throw_violations(const std::vector<PoseViolation>& v) {
  std::ostringstream os;
  os << "invalid pose:";
  for (const auto& item : v) os << ' ' << item.message << ';';
  fail(ErrorCode::kInvalidArgument, os.str());
}

}  // namespace

std::vector<PoseViolation> validate_pose(const Pose2D& pose, const SkeletonTopology& topology) {
  return validate_joints(pose.joints, topology);
}

std::vector<PoseViolation> validate_pose(const Pose3D& pose, const SkeletonTopology& topology) {
  return validate_joints(pose.joints, topology);
}

void require_valid(const Pose2D& pose) {
  if (auto v = validate_pose(pose); !v.empty()) throw_violations(v);
}

void require_valid(const Pose3D& pose) {
  if (auto v = validate_pose(pose); !v.empty()) throw_violations(v);
}

Pose3D root_relative(const Pose3D& pose, const SkeletonTopology& topology) {
  require_valid(pose);
  Pose3D out = pose;
  const Vec3 root = pose.joints[static_cast<std::size_t>(topology.root())];
  for (auto& j : out.joints) j -= root;
  return out;
}

}  // namespace fbipose
