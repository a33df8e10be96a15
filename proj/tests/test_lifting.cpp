#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fbipose/error.hpp"
#include "fbipose/lifting.hpp"
#include "fbipose/synthetic.hpp"
#include "support.hpp"

using namespace fbipose;

namespace {

const BoneLengthPrior& synth_lengths() { return SynthConfig::standard().bone_lengths; }

int true_spine_sign(const Pose3D& p) {
  const auto& t = SkeletonTopology::standard();
  const Edge e = t.tree_edges()[static_cast<std::size_t>(t.spine_edge())];
  return p.joints[static_cast<std::size_t>(e.child)].z() >= p.joints[static_cast<std::size_t>(e.parent)].z() ? 1 : -1;
}

}  // namespace

TEST_CASE("5-12-13 bone lifts to depth 5") {
  // Bone of length 13 seen 12 px long at scale 1: depth offset 5.
  BoneLengthPrior prior = synth_lengths();
  Pose3D p = fbitest::random_pose(21);
  const auto& t = SkeletonTopology::standard();
  const int thorax = t.joint_index("thorax");
  const int neck = t.joint_index("upper-neck");
  p.joints[static_cast<std::size_t>(neck)] = p.joints[static_cast<std::size_t>(thorax)] + Vec3(12.0, 0.0, -5.0);
  prior.lengths[static_cast<std::size_t>(t.edge_into(neck))] = 13.0;
  // Keep every other bone consistent with its prior length.
  for (std::size_t e = 0; e < t.tree_edges().size(); ++e) {
    const Edge edge = t.tree_edges()[e];
    prior.lengths[e] = (p.joints[static_cast<std::size_t>(edge.child)] - p.joints[static_cast<std::size_t>(edge.parent)]).norm();
  }
  CHECK(prior.lengths[static_cast<std::size_t>(t.edge_into(neck))] == doctest::Approx(13.0));

  const ScaledOrthoCamera cam{1.0, Vec2(0.0, 0.0)};
  const Pose2D p2 = project(p, cam);
  LiftOptions o;
  o.scale = 1.0;
  o.spine_sign = true_spine_sign(p);
  const auto labels = convert_pose_to_fbi(p, 0.0).labels;
  const LiftResult r = lift(p2, labels, prior, o);
  const Vec3 d = r.pose.joints[static_cast<std::size_t>(neck)] - r.pose.joints[static_cast<std::size_t>(thorax)];
  CHECK(d.z() == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(d.x() == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(r.ambiguous_edges.empty());
  CHECK(r.radicand_clamps == 0);
}

TEST_CASE("projection is affine in the camera") {
  const Pose3D p = fbitest::random_pose(4);
  const ScaledOrthoCamera cam{0.2, Vec2(500.0, 480.0)};
  const Pose2D q = project(p, cam);
  for (std::size_t j = 0; j < p.joints.size(); ++j) {
    CHECK(q.joints[j].x() == doctest::Approx(0.2 * p.joints[j].x() + 500.0));
    CHECK(q.joints[j].y() == doctest::Approx(0.2 * p.joints[j].y() + 480.0));
  }
  CHECK_THROWS_AS(project(p, ScaledOrthoCamera{0.0, Vec2::Zero()}), Error);
}

TEST_CASE("scale estimate is the smallest feasible scale") {
  const Pose3D p = fbitest::random_pose(8);
  const ScaledOrthoCamera cam{0.2, Vec2::Zero()};
  const Pose2D q = project(p, cam);
  const double s = estimate_scale(q, synth_lengths());
  CHECK(s <= 0.2 + 1e-12);
  const auto& t = SkeletonTopology::standard();
  double worst = 0.0;
  for (std::size_t e = 0; e < t.tree_edges().size(); ++e) {
    const Edge edge = t.tree_edges()[e];
    const double du = (q.joints[static_cast<std::size_t>(edge.child)] - q.joints[static_cast<std::size_t>(edge.parent)]).norm();
    worst = std::max(worst, du / synth_lengths().lengths[e]);
  }
  CHECK(s == doctest::Approx(worst).epsilon(1e-12));

  Pose2D flat;
  flat.joints.assign(16, Vec2(3.0, 3.0));
  try {
    estimate_scale(flat, synth_lengths());
    FAIL("expected kZeroScale");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroScale);
  }
}

TEST_CASE("property: exact round trip with true scale and spine sign") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto draw = generate_synthetic_draw(seed);
    const Pose2D q = project(draw.pose, draw.camera);
    LiftOptions o;
    o.scale = draw.camera.scale;
    o.principal = draw.camera.principal;
    o.spine_sign = true_spine_sign(draw.pose);
    const LiftResult r = lift(q, convert_pose_to_fbi(draw.pose, 0.0).labels, synth_lengths(), o);
    CHECK(fbitest::max_joint_error(root_relative(r.pose), root_relative(draw.pose)) < 1e-6);
  }
}

TEST_CASE("property: lifted bone lengths equal the priors") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto draw = generate_synthetic_draw(seed);
    const Pose2D q = project(draw.pose, draw.camera);
    const auto labels = convert_pose_to_fbi(draw.pose, 35.0).labels;
    for (auto policy : {UncertainPolicy::kDefaultForward, UncertainPolicy::kDefaultBackward}) {
      LiftOptions o;
      o.uncertain_policy = policy;
      const LiftResult r = lift(q, labels, synth_lengths(), o);
      CHECK(r.radicand_clamps == 0);
      const auto& t = SkeletonTopology::standard();
      for (std::size_t e = 0; e < t.tree_edges().size(); ++e) {
        const Edge edge = t.tree_edges()[e];
        const double len = (r.pose.joints[static_cast<std::size_t>(edge.child)] -
                            r.pose.joints[static_cast<std::size_t>(edge.parent)]).norm();
        CHECK(len == doctest::Approx(synth_lengths().lengths[e]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("zero clamp flattens uncertain bones and reports them") {
  const auto draw = generate_synthetic_draw(3);
  const Pose2D q = project(draw.pose, draw.camera);
  const auto labels = convert_pose_to_fbi(draw.pose, 35.0).labels;
  LiftOptions o;
  o.scale = draw.camera.scale;
  o.principal = draw.camera.principal;
  const LiftResult r = lift(q, labels, synth_lengths(), o);
  const auto& t = SkeletonTopology::standard();
  std::vector<int> expected{t.spine_edge()};
  for (int b = 0; b < kNumFbiBones; ++b) {
    if (labels[static_cast<std::size_t>(b)] != FbiStatus::kUncertain) continue;
    expected.push_back(t.edge_of_bone(b));
    const Edge e = t.fbi_bones()[static_cast<std::size_t>(b)];
    CHECK(r.pose.joints[static_cast<std::size_t>(e.child)].z() ==
          doctest::Approx(r.pose.joints[static_cast<std::size_t>(e.parent)].z()));
  }
  std::sort(expected.begin(), expected.end());
  CHECK(r.ambiguous_edges == expected);
  CHECK(r.pose.joints[static_cast<std::size_t>(t.root())].z() == 0.0);
}

TEST_CASE("too-small scale clamps radicands") {
  const auto draw = generate_synthetic_draw(6);
  const Pose2D q = project(draw.pose, draw.camera);
  LiftOptions o;
  o.scale = 0.5 * estimate_scale(q, synth_lengths());
  const LiftResult r = lift(q, convert_pose_to_fbi(draw.pose, 0.0).labels, synth_lengths(), o);
  CHECK(r.radicand_clamps > 0);
}

TEST_CASE("enumeration covers every sign pattern") {
  const auto draw = generate_synthetic_draw(12);
  const Pose2D q = project(draw.pose, draw.camera);
  FbiMatrix labels = convert_pose_to_fbi(draw.pose, 0.0).labels;
  labels[1] = FbiStatus::kUncertain;
  labels[4] = FbiStatus::kUncertain;
  EnumerateOptions o;
  o.scale = draw.camera.scale;
  o.principal = draw.camera.principal;
  const auto all = enumerate_lifts(q, labels, synth_lengths(), o);
  REQUIRE(all.size() == 8);  // spine + 2 bones
  const auto& t = SkeletonTopology::standard();
  const std::vector<int> edges{t.spine_edge(), t.edge_of_bone(1), t.edge_of_bone(4)};
  CHECK(all[0].ambiguous_edges == edges);

  // Bit i set flips edge i to Backward / spine -1.
  for (std::size_t c = 0; c < all.size(); ++c) {
    FbiMatrix fixed = labels;
    fixed[1] = (c & 2) ? FbiStatus::kBackward : FbiStatus::kForward;
    fixed[4] = (c & 4) ? FbiStatus::kBackward : FbiStatus::kForward;
    LiftOptions lo;
    lo.scale = o.scale;
    lo.principal = o.principal;
    lo.spine_sign = (c & 1) ? -1 : 1;
    const LiftResult one = lift(q, fixed, synth_lengths(), lo);
    CHECK(fbitest::max_joint_error(one.pose, all[c].pose) < 1e-9);
  }

  o.max_uncertain = 2;
  try {
    enumerate_lifts(q, labels, synth_lengths(), o);
    FAIL("expected kCapExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCapExceeded);
  }
}

TEST_CASE("property: enumeration contains the ground truth") {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 60; ++seed) {
    const auto draw = generate_synthetic_draw(seed);
    const auto labels = convert_pose_to_fbi(draw.pose, 35.0).labels;
    if (std::count(labels.begin(), labels.end(), FbiStatus::kUncertain) > 8) continue;
    ++checked;
    EnumerateOptions o;
    o.scale = draw.camera.scale;
    o.principal = draw.camera.principal;
    const auto all = enumerate_lifts(project(draw.pose, draw.camera), labels, synth_lengths(), o);
    double best = 1e300;
    for (const auto& r : all) best = std::min(best, fbitest::max_joint_error(root_relative(r.pose), root_relative(draw.pose)));
    CHECK(best < 1e-6);
  }
}

TEST_CASE("lifting rejects malformed input") {
  Pose2D bad;
  bad.joints.assign(15, Vec2::Zero());
  CHECK_THROWS_AS(lift(bad, uniform_fbi(FbiStatus::kForward), synth_lengths()), Error);
  BoneLengthPrior neg = synth_lengths();
  neg.lengths[2] = -1.0;
  const auto draw = generate_synthetic_draw(1);
  CHECK_THROWS_AS(lift(project(draw.pose, draw.camera), uniform_fbi(FbiStatus::kForward), neg), Error);
}
