#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace fbipose {

inline constexpr int kNumJoints = 16;
inline constexpr int kNumTreeEdges = 15;
inline constexpr int kNumFbiBones = 14;
inline constexpr int kNumFbiStates = 3;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Joints are kept in a vector (not a fixed array) so that malformed input can
// be represented and reported by validate_pose().
struct Pose2D {
  std::vector<Vec2> joints;
};

// Camera frame, millimetres. +Z points away from the camera, so a smaller Z
// is closer to the viewer.
struct Pose3D {
  std::vector<Vec3> joints;
};

// Column index of the one-hot encoding. Forward means the child end B1 of the
// directed bone B0->B1 is closer to the camera than B0.
enum class FbiStatus : std::uint8_t { kForward = 0, kBackward = 1, kUncertain = 2 };

using FbiMatrix = std::array<FbiStatus, kNumFbiBones>;
using FbiOneHot = Eigen::Matrix<double, kNumFbiBones, kNumFbiStates, Eigen::RowMajor>;

std::string_view to_string(FbiStatus status) noexcept;
FbiStatus fbi_status_from_int(int value);
FbiMatrix uniform_fbi(FbiStatus status);

struct Edge {
  int parent = -1;
  int child = -1;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// The fixed 16-joint MPII kinematic tree. The joint list, the tree edges and
// the ordered FBI bone list come from config/topology.json (compiled in) so
// the service, the file formats and the CLI share one table.
class SkeletonTopology {
 public:
  static const SkeletonTopology& standard();
  static SkeletonTopology from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  int version() const noexcept { return version_; }
  int root() const noexcept { return root_; }
  const std::vector<std::string>& joint_names() const noexcept { return joint_names_; }
  const std::vector<Edge>& tree_edges() const noexcept { return tree_edges_; }
  const std::vector<Edge>& fbi_bones() const noexcept { return fbi_bones_; }

  int joint_index(std::string_view name) const;
  // Tree-edge index of an FBI bone.
  int edge_of_bone(int bone) const { return bone_edge_.at(static_cast<std::size_t>(bone)); }
  // FBI bone index of a tree edge, or -1 for edges that carry no FBI (spine).
  int bone_of_edge(int edge) const { return edge_bone_.at(static_cast<std::size_t>(edge)); }
  // Tree edge whose child is `joint`; -1 for the root.
  int edge_into(int joint) const { return edge_into_.at(static_cast<std::size_t>(joint)); }
  // The single tree edge without an FBI label.
  int spine_edge() const noexcept { return spine_edge_; }

 private:
  int version_ = 0;
  int root_ = -1;
  int spine_edge_ = -1;
  std::vector<std::string> joint_names_;
  std::vector<Edge> tree_edges_;
  std::vector<Edge> fbi_bones_;
  std::vector<int> bone_edge_;
  std::vector<int> edge_bone_;
  std::vector<int> edge_into_;
};

// Positive lengths per tree edge, indexed like SkeletonTopology::tree_edges().
struct BoneLengthPrior {
  std::array<double, kNumTreeEdges> lengths{};

  static BoneLengthPrior standard();
  static BoneLengthPrior from_json(const nlohmann::json& by_child_joint,
                                   const SkeletonTopology& topology);
  nlohmann::json to_json(const SkeletonTopology& topology) const;
  void validate() const;
};

// Signed out-of-plane angle of FBI bone `bone`, in degrees within [-90, 90].
// Positive when the child joint is closer to the camera. Throws
// ErrorCode::kDegenerateBone for a zero-length bone.
double out_of_plane_angle(const Pose3D& pose, int bone,
                          const SkeletonTopology& topology = SkeletonTopology::standard());

struct FbiConversion {
  FbiMatrix labels{};
  std::vector<int> degenerate_bones;  // labelled Uncertain, reported as a warning
};

FbiConversion convert_pose_to_fbi(const Pose3D& pose, double alpha_deg,
                                  const SkeletonTopology& topology = SkeletonTopology::standard());

FbiOneHot fbi_one_hot(const FbiMatrix& matrix);

struct PoseViolation {
  enum class Kind { kJointCount, kNonFinite };
  Kind kind;
  int joint = -1;  // -1 for count violations
  std::string message;
};

std::vector<PoseViolation> validate_pose(const Pose2D& pose,
                                         const SkeletonTopology& topology = SkeletonTopology::standard());
std::vector<PoseViolation> validate_pose(const Pose3D& pose,
                                         const SkeletonTopology& topology = SkeletonTopology::standard());

// Throws ErrorCode::kInvalidArgument listing the violations, if any.
void require_valid(const Pose2D& pose);
void require_valid(const Pose3D& pose);

Pose3D root_relative(const Pose3D& pose, const SkeletonTopology& topology = SkeletonTopology::standard());

}  // namespace fbipose
