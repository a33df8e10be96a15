#pragma once

#include <vector>

#include <Eigen/Core>

#include "fbipose/skeleton.hpp"

namespace fbipose {

// Pelvis, the joint aligned under protocol #1.
inline constexpr int kPelvisJoint = 6;

// x -> scale * rotation * x + translation
struct AlignmentTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
  Pose3D apply(const Pose3D& pose) const;
};

// Translate pred so its pelvis sits on gt's pelvis, then average the joint
// distances.
double mpjpe_p1(const Pose3D& pred, const Pose3D& gt);

// Least-squares similarity (or rigid, with_scale = false) transform taking
// pred onto gt. Reflections are corrected so det(R) = +1. When the joints are
// collinear the rotation about the common axis is undetermined and the
// smallest rotation is returned. Throws ErrorCode::kInvalidArgument when
// either pose has all joints coincident.
AlignmentTransform procrustes_align(const Pose3D& pred, const Pose3D& gt, bool with_scale = true);

// Mean joint error after the better of the least-squares alignment and the
// protocol #1 pelvis alignment, so it never exceeds mpjpe_p1().
double mpjpe_p2(const Pose3D& pred, const Pose3D& gt, bool with_scale = true);

struct FbiCorrectness {
  long matched = 0;
  long clear = 0;  // ground-truth Forward/Backward bones
  double ratio() const;  // throws ErrorCode::kUndefinedRatio when clear == 0
};

// Converts every predicted pose to FBI at alpha and compares against the
// ground-truth labels on bones whose ground truth is clear.
FbiCorrectness fbi_correctness(const std::vector<Pose3D>& pred, const std::vector<FbiMatrix>& gt_fbi,
                               double alpha_deg, const SkeletonTopology& topology = SkeletonTopology::standard());

double fbi_correctness_ratio(const std::vector<Pose3D>& pred, const std::vector<FbiMatrix>& gt_fbi,
                             double alpha_deg, const SkeletonTopology& topology = SkeletonTopology::standard());

struct AngleHistogram {
  std::vector<double> edges;  // bucket boundaries in degrees, size = counts + 1
  std::vector<long> counts;
  std::vector<double> percentages;
  long total = 0;
};

// Histogram of |theta| over bones labelled Uncertain, buckets of `bucket_deg`
// covering [0, 90]. The last bucket is closed on the right. Zero-length bones
// are skipped. No uncertain bones gives zero counts, not an error.
AngleHistogram uncertain_angle_histogram(const std::vector<Pose3D>& poses, const std::vector<FbiMatrix>& labels,
                                         double bucket_deg = 10.0,
                                         const SkeletonTopology& topology = SkeletonTopology::standard());

}  // namespace fbipose
