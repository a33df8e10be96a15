#include "fbipose/lifting.hpp"

#include <cmath>

#include "fbipose/error.hpp"

namespace fbipose {

namespace {

using DepthSigns = std::array<int, kNumTreeEdges>;

void require_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    fail(ErrorCode::kZeroScale, "scale must be positive and finite");
  }
}

void require_topology_match(const Pose2D& pose2d, const SkeletonTopology& topology) {
  if (static_cast<int>(pose2d.joints.size()) != static_cast<int>(topology.joint_names().size())) {
    fail(ErrorCode::kTopologyMismatch, "2D pose joint count does not match the topology");
  }
  require_valid(pose2d);
}

constexpr double kRadicandTolerance = 1e-12;

// Z(child) = Z(parent) + sign * |dZ|, edges visited in topology order.
LiftResult lift_with_signs(const Pose2D& pose2d, const BoneLengthPrior& priors,
                           const SkeletonTopology& topology, double scale, const Vec2& principal,
                           const DepthSigns& signs) {
  LiftResult out;
  out.scale_used = scale;
  out.pose.joints.assign(kNumJoints, Vec3::Zero());
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec2 xy = (pose2d.joints[static_cast<std::size_t>(j)] - principal) / scale;
    out.pose.joints[static_cast<std::size_t>(j)] = Vec3(xy.x(), xy.y(), 0.0);
  }
  for (int e = 0; e < kNumTreeEdges; ++e) {
    const Edge& edge = topology.tree_edges()[static_cast<std::size_t>(e)];
    const Vec2 du = pose2d.joints[static_cast<std::size_t>(edge.child)] -
                    pose2d.joints[static_cast<std::size_t>(edge.parent)];
    const double length = priors.lengths[static_cast<std::size_t>(e)];
    const double planar = du.squaredNorm() / (scale * scale);
    double radicand = length * length - planar;
    if (radicand < 0.0) {
      // Rounding at the bone that fixed the estimated scale is not a clamp.
      if (radicand < -kRadicandTolerance * length * length) ++out.radicand_clamps;
      radicand = 0.0;
    }
    const double dz = std::sqrt(radicand);
    out.pose.joints[static_cast<std::size_t>(edge.child)].z() =
        out.pose.joints[static_cast<std::size_t>(edge.parent)].z() +
        static_cast<double>(signs[static_cast<std::size_t>(e)]) * dz;
  }
  return out;
}

int depth_sign(FbiStatus status, UncertainPolicy policy) {
  switch (status) {
    case FbiStatus::kForward: return -1;
    case FbiStatus::kBackward: return +1;
    case FbiStatus::kUncertain:
      switch (policy) {
        case UncertainPolicy::kDefaultForward: return -1;
        case UncertainPolicy::kDefaultBackward: return +1;
        case UncertainPolicy::kZeroClamp: return 0;
      }
  }
  return 0;
}

int checked_spine_sign(int sign) {
  if (sign != 1 && sign != -1) fail(ErrorCode::kInvalidArgument, "spine sign must be +1 or -1");
  return sign;
}

}  // namespace

Pose2D project(const Pose3D& pose, const ScaledOrthoCamera& camera) {
  require_valid(pose);
  require_scale(camera.scale);
  Pose2D out;
  out.joints.reserve(pose.joints.size());
  for (const auto& p : pose.joints) {
    out.joints.emplace_back(camera.scale * p.x() + camera.principal.x(),
                            camera.scale * p.y() + camera.principal.y());
  }
  return out;
}

double estimate_scale(const Pose2D& pose2d, const BoneLengthPrior& priors,
                      const SkeletonTopology& topology) {
  require_topology_match(pose2d, topology);
  priors.validate();
  double s = 0.0;
  for (int e = 0; e < kNumTreeEdges; ++e) {
    const Edge& edge = topology.tree_edges()[static_cast<std::size_t>(e)];
    const double du = (pose2d.joints[static_cast<std::size_t>(edge.child)] -
                       pose2d.joints[static_cast<std::size_t>(edge.parent)])
                          .norm();
    s = std::max(s, du / priors.lengths[static_cast<std::size_t>(e)]);
  }
  if (!(s > 0.0)) fail(ErrorCode::kZeroScale, "all 2D joints coincide; scale is zero");
  return s;
}

LiftResult lift(const Pose2D& pose2d, const FbiMatrix& fbi, const BoneLengthPrior& priors,
                const LiftOptions& options, const SkeletonTopology& topology) {
  require_topology_match(pose2d, topology);
  priors.validate();
  const double scale = options.scale ? *options.scale : estimate_scale(pose2d, priors, topology);
  require_scale(scale);

  DepthSigns signs{};
  std::vector<int> ambiguous;
  for (int e = 0; e < kNumTreeEdges; ++e) {
    const int bone = topology.bone_of_edge(e);
    if (bone < 0) {
      signs[static_cast<std::size_t>(e)] = options.spine_sign ? checked_spine_sign(*options.spine_sign) : +1;
      if (!options.spine_sign) ambiguous.push_back(e);
      continue;
    }
    const FbiStatus status = fbi[static_cast<std::size_t>(bone)];
    signs[static_cast<std::size_t>(e)] = depth_sign(status, options.uncertain_policy);
    if (status == FbiStatus::kUncertain) ambiguous.push_back(e);
  }
  LiftResult out = lift_with_signs(pose2d, priors, topology, scale, options.principal, signs);
  out.ambiguous_edges = std::move(ambiguous);
  return out;
}

std::vector<LiftResult> enumerate_lifts(const Pose2D& pose2d, const FbiMatrix& fbi,
                                        const BoneLengthPrior& priors, const EnumerateOptions& options,
                                        const SkeletonTopology& topology) {
  require_topology_match(pose2d, topology);
  priors.validate();
  if (options.max_uncertain < 0 || options.max_uncertain > 30) {
    fail(ErrorCode::kInvalidArgument, "max_uncertain must lie in [0, 30]");
  }
  const double scale = options.scale ? *options.scale : estimate_scale(pose2d, priors, topology);
  require_scale(scale);

  DepthSigns base{};
  std::vector<int> ambiguous;
  for (int e = 0; e < kNumTreeEdges; ++e) {
    const int bone = topology.bone_of_edge(e);
    if (bone < 0) {
      if (options.spine_sign) {
        base[static_cast<std::size_t>(e)] = checked_spine_sign(*options.spine_sign);
      } else {
        base[static_cast<std::size_t>(e)] = +1;
        ambiguous.push_back(e);
      }
      continue;
    }
    const FbiStatus status = fbi[static_cast<std::size_t>(bone)];
    if (status == FbiStatus::kUncertain) {
      base[static_cast<std::size_t>(e)] = -1;
      ambiguous.push_back(e);
    } else {
      base[static_cast<std::size_t>(e)] = depth_sign(status, UncertainPolicy::kZeroClamp);
    }
  }
  const int k = static_cast<int>(ambiguous.size());
  if (k > options.max_uncertain) {
    fail(ErrorCode::kCapExceeded, std::to_string(k) + " ambiguous bones exceed the cap of " +
                                      std::to_string(options.max_uncertain));
  }

  const std::uint64_t count = std::uint64_t{1} << k;
  std::vector<LiftResult> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t c = 0; c < count; ++c) {
    DepthSigns signs = base;
    for (int i = 0; i < k; ++i) {
      const auto e = static_cast<std::size_t>(ambiguous[static_cast<std::size_t>(i)]);
      const bool second = ((c >> i) & 1U) != 0;
      const bool spine = topology.bone_of_edge(static_cast<int>(e)) < 0;
      if (spine) {
        signs[e] = second ? -1 : +1;
      } else {
        signs[e] = second ? +1 : -1;
      }
    }
    LiftResult r = lift_with_signs(pose2d, priors, topology, scale, options.principal, signs);
    r.ambiguous_edges = ambiguous;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fbipose
