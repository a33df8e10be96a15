#include <doctest.h>

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "fbipose/error.hpp"
#include "fbipose/skeleton.hpp"
#include "fbipose/synthetic.hpp"
#include "support.hpp"

using namespace fbipose;

namespace {

const int kThorax = 7;
const int kNeck = 8;

Pose3D with_neck_offset(const Vec3& offset) {
  Pose3D p = fbitest::random_pose(11);
  p.joints[kNeck] = p.joints[kThorax] + offset;
  return p;
}

}  // namespace

TEST_CASE("topology table") {
  const auto& t = SkeletonTopology::standard();
  CHECK(t.version() == 1);
  CHECK(t.joint_names().size() == 16);
  CHECK(t.tree_edges().size() == 15);
  CHECK(t.fbi_bones().size() == 14);
  CHECK(t.root() == t.joint_index("pelvis"));
  CHECK(t.root() == 6);
  CHECK(t.spine_edge() == 0);
  CHECK(t.bone_of_edge(t.spine_edge()) == -1);
  for (int b = 0; b < kNumFbiBones; ++b) {
    CHECK(t.bone_of_edge(t.edge_of_bone(b)) == b);
    CHECK(t.tree_edges()[static_cast<std::size_t>(t.edge_of_bone(b))] == t.fbi_bones()[static_cast<std::size_t>(b)]);
  }
  CHECK(t.edge_into(t.root()) == -1);
  CHECK_THROWS_AS(t.joint_index("tail"), Error);

  const auto again = SkeletonTopology::from_json(t.to_json());
  CHECK(again.tree_edges() == t.tree_edges());
  CHECK(again.fbi_bones() == t.fbi_bones());
}

TEST_CASE("topology rejects a cyclic or disconnected table") {
  auto doc = SkeletonTopology::standard().to_json();
  doc["tree_edges"][0] = {"thorax", "pelvis"};
  CHECK_THROWS_AS(SkeletonTopology::from_json(doc), Error);
}

TEST_CASE("out-of-plane angle of a 3-4-5 bone") {
  // Child 3 mm closer to the camera over a 5 mm bone: asin(3/5).
  const double expected = 36.86989764584402;
  const Pose3D p = with_neck_offset({4.0, 0.0, -3.0});
  CHECK(out_of_plane_angle(p, 0) == doctest::Approx(expected).epsilon(1e-12));
  const Pose3D q = with_neck_offset({0.0, 4.0, 3.0});
  CHECK(out_of_plane_angle(q, 0) == doctest::Approx(-expected).epsilon(1e-12));

  CHECK(convert_pose_to_fbi(p, 35.0).labels[0] == FbiStatus::kForward);
  CHECK(convert_pose_to_fbi(q, 35.0).labels[0] == FbiStatus::kBackward);
  CHECK(convert_pose_to_fbi(p, 40.0).labels[0] == FbiStatus::kUncertain);
  CHECK(convert_pose_to_fbi(q, 40.0).labels[0] == FbiStatus::kUncertain);
}

TEST_CASE("threshold boundary is Uncertain") {
  const double a = 30.0 * M_PI / 180.0;
  const Pose3D p = with_neck_offset({std::cos(a), 0.0, -std::sin(a)});
  CHECK(convert_pose_to_fbi(p, 29.0).labels[0] == FbiStatus::kForward);
  CHECK(convert_pose_to_fbi(p, 31.0).labels[0] == FbiStatus::kUncertain);
}

TEST_CASE("degenerate bones become Uncertain with a warning") {
  const Pose3D p = with_neck_offset(Vec3::Zero());
  CHECK_THROWS_WITH_AS(out_of_plane_angle(p, 0), doctest::Contains("zero"), Error);
  const auto c = convert_pose_to_fbi(p, 35.0);
  CHECK(c.labels[0] == FbiStatus::kUncertain);
  REQUIRE(c.degenerate_bones.size() == 1);
  CHECK(c.degenerate_bones[0] == 0);
}

TEST_CASE("alpha outside [0, 90] is rejected") {
  const Pose3D p = fbitest::random_pose(3);
  CHECK_THROWS_AS(convert_pose_to_fbi(p, -1.0), Error);
  CHECK_THROWS_AS(convert_pose_to_fbi(p, 91.0), Error);
}

TEST_CASE("pose validation reports count and non-finite joints") {
  Pose3D p = fbitest::random_pose(5);
  CHECK(validate_pose(p).empty());
  p.joints[4].x() = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate_pose(p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == PoseViolation::Kind::kNonFinite);
  CHECK(v[0].joint == 4);
  p.joints.pop_back();
  CHECK(validate_pose(p).front().kind == PoseViolation::Kind::kJointCount);
  try {
    require_valid(p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("one-hot encoding") {
  FbiMatrix m = uniform_fbi(FbiStatus::kForward);
  m[3] = FbiStatus::kUncertain;
  const FbiOneHot h = fbi_one_hot(m);
  CHECK(h.rowwise().sum().isOnes());
  CHECK(h(0, 0) == 1.0);
  CHECK(h(3, 2) == 1.0);
  CHECK_THROWS_AS(fbi_status_from_int(3), Error);
}

TEST_CASE("property: depth mirroring swaps Forward and Backward") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Pose3D p = fbitest::random_pose(seed);
    const auto a = convert_pose_to_fbi(p, 20.0).labels;
    const auto b = convert_pose_to_fbi(depth_mirror(p), 20.0).labels;
    for (int i = 0; i < kNumFbiBones; ++i) {
      const auto x = a[static_cast<std::size_t>(i)];
      const auto y = b[static_cast<std::size_t>(i)];
      if (x == FbiStatus::kUncertain) {
        CHECK(y == FbiStatus::kUncertain);
      } else {
        CHECK(x != y);
        CHECK(y != FbiStatus::kUncertain);
      }
    }
  }
}

TEST_CASE("property: uncertain count grows with alpha") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Pose3D p = fbitest::random_pose(seed);
    int previous = -1;
    for (double alpha : {0.0, 10.0, 35.0, 60.0, 90.0}) {
      const auto labels = convert_pose_to_fbi(p, alpha).labels;
      int n = 0;
      for (auto s : labels) n += s == FbiStatus::kUncertain ? 1 : 0;
      CHECK(n >= previous);
      previous = n;
    }
    CHECK(previous == kNumFbiBones);
  }
}
