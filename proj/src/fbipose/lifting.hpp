#pragma once

#include <optional>
#include <vector>

#include "fbipose/skeleton.hpp"

namespace fbipose {

// Weak-perspective camera: u = s*X + cx, v = s*Y + cy.
struct ScaledOrthoCamera {
  double scale = 1.0;  // pixels per world unit, > 0
  Vec2 principal = Vec2::Zero();
};

enum class UncertainPolicy { kDefaultForward, kDefaultBackward, kZeroClamp };

struct LiftOptions {
  // Pixels per prior unit. Estimated with estimate_scale() when absent.
  std::optional<double> scale;
  // +1 puts the thorax behind the pelvis (larger Z). Defaults to +1 and the
  // spine is then reported as ambiguous.
  std::optional<int> spine_sign;
  UncertainPolicy uncertain_policy = UncertainPolicy::kZeroClamp;
  Vec2 principal = Vec2::Zero();
};

struct LiftResult {
  Pose3D pose;  // root at Z = 0, units of the bone-length prior
  double scale_used = 0.0;
  // Tree-edge indices (ascending) whose depth sign was not fixed by FBI. The
  // spine edge appears here when no spine sign was supplied.
  std::vector<int> ambiguous_edges;
  int radicand_clamps = 0;
};

Pose2D project(const Pose3D& pose, const ScaledOrthoCamera& camera);

// Smallest scale that keeps every depth radicand L^2 - |du|^2/s^2 >= 0:
// max over tree edges of |du| / L. Throws ErrorCode::kZeroScale when every
// 2D bone has zero length.
double estimate_scale(const Pose2D& pose2d, const BoneLengthPrior& priors,
                      const SkeletonTopology& topology = SkeletonTopology::standard());

LiftResult lift(const Pose2D& pose2d, const FbiMatrix& fbi, const BoneLengthPrior& priors,
                const LiftOptions& options = {},
                const SkeletonTopology& topology = SkeletonTopology::standard());

struct EnumerateOptions {
  std::optional<double> scale;
  std::optional<int> spine_sign;  // when absent the spine is enumerated too
  int max_uncertain = 12;
  Vec2 principal = Vec2::Zero();
};

// All 2^k sign assignments of the k ambiguous edges. Candidate c gives edge
// ambiguous_edges[i] the "second" sign when bit i of c is set: Backward for
// FBI bones, -1 for the spine. Bit clear means Forward / +1.
std::vector<LiftResult> enumerate_lifts(const Pose2D& pose2d, const FbiMatrix& fbi,
                                        const BoneLengthPrior& priors,
                                        const EnumerateOptions& options = {},
                                        const SkeletonTopology& topology = SkeletonTopology::standard());

}  // namespace fbipose
