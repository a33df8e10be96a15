#include "fbipose/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "fbipose/error.hpp"

namespace fbipose {

namespace {

using Points = Eigen::Matrix<double, 3, Eigen::Dynamic>;

Points to_points(const Pose3D& pose) {
  require_valid(pose);
  Points p(3, static_cast<Eigen::Index>(pose.joints.size()));
  for (std::size_t i = 0; i < pose.joints.size(); ++i) p.col(static_cast<Eigen::Index>(i)) = pose.joints[i];
  return p;
}

double mean_distance(const Points& a, const Points& b) { return (a - b).colwise().norm().mean(); }

// Smallest rotation taking unit vector a onto unit vector b.
Eigen::Matrix3d minimal_rotation(const Vec3& a, const Vec3& b) {
  return Eigen::Quaterniond::FromTwoVectors(a, b).toRotationMatrix();
}

}  // namespace

Pose3D AlignmentTransform::apply(const Pose3D& pose) const {
  Pose3D out = pose;
  for (auto& j : out.joints) j = apply(j);
  return out;
}

double mpjpe_p1(const Pose3D& pred, const Pose3D& gt) {
  const Points p = to_points(pred);
  const Points g = to_points(gt);
  const Vec3 shift = g.col(kPelvisJoint) - p.col(kPelvisJoint);
  return mean_distance(p.colwise() + shift, g);
}

AlignmentTransform procrustes_align(const Pose3D& pred, const Pose3D& gt, bool with_scale) {
  const Points p = to_points(pred);
  const Points g = to_points(gt);
  const Vec3 mu_p = p.rowwise().mean();
  const Vec3 mu_g = g.rowwise().mean();
  const Points pc = p.colwise() - mu_p;
  const Points gc = g.colwise() - mu_g;
  const double var_p = pc.squaredNorm();
  const double var_g = gc.squaredNorm();
  constexpr double kTiny = 1e-24;
  if (var_p <= kTiny || var_g <= kTiny) {
    fail(ErrorCode::kInvalidArgument, "procrustes alignment needs poses whose joints are not all coincident");
  }

  const Eigen::Matrix3d cov = gc * pc.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();

  AlignmentTransform t;
  double trace = 0.0;
  if (sv(1) <= 1e-12 * sv(0)) {
    // Collinear: only the common axis is constrained.
    t.rotation = minimal_rotation(v.col(0), u.col(0));
    trace = sv(0);
  } else {
    Vec3 d(1.0, 1.0, 1.0);
    if ((u * v.transpose()).determinant() < 0.0) d(2) = -1.0;
    t.rotation = u * d.asDiagonal() * v.transpose();
    trace = sv.dot(d);
  }
  t.scale = with_scale ? trace / var_p : 1.0;
  if (with_scale && t.scale <= 0.0) t.scale = 0.0;
  t.translation = mu_g - t.scale * (t.rotation * mu_p);
  return t;
}

double mpjpe_p2(const Pose3D& pred, const Pose3D& gt, bool with_scale) {
  const AlignmentTransform t = procrustes_align(pred, gt, with_scale);
  const Points p = to_points(t.apply(pred));
  // The least-squares fit minimises squared, not mean, distance; the pelvis
  // translation of protocol #1 is also a candidate alignment.
  return std::min(mean_distance(p, to_points(gt)), mpjpe_p1(pred, gt));
}

double FbiCorrectness::ratio() const {
  if (clear == 0) fail(ErrorCode::kUndefinedRatio, "no bones with a clear ground-truth status");
  return static_cast<double>(matched) / static_cast<double>(clear);
}

FbiCorrectness fbi_correctness(const std::vector<Pose3D>& pred, const std::vector<FbiMatrix>& gt_fbi,
                               double alpha_deg, const SkeletonTopology& topology) {
  if (pred.size() != gt_fbi.size()) {
    fail(ErrorCode::kInvalidArgument, "prediction and label lists differ in length");
  }
  FbiCorrectness c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const FbiMatrix labels = convert_pose_to_fbi(pred[i], alpha_deg, topology).labels;
    for (int b = 0; b < kNumFbiBones; ++b) {
      const FbiStatus g = gt_fbi[i][static_cast<std::size_t>(b)];
      if (g == FbiStatus::kUncertain) continue;
      ++c.clear;
      if (labels[static_cast<std::size_t>(b)] == g) ++c.matched;
    }
  }
  return c;
}

double fbi_correctness_ratio(const std::vector<Pose3D>& pred, const std::vector<FbiMatrix>& gt_fbi,
                             double alpha_deg, const SkeletonTopology& topology) {
  return fbi_correctness(pred, gt_fbi, alpha_deg, topology).ratio();
}

AngleHistogram uncertain_angle_histogram(const std::vector<Pose3D>& poses, const std::vector<FbiMatrix>& labels,
                                         double bucket_deg, const SkeletonTopology& topology) {
  if (poses.size() != labels.size()) fail(ErrorCode::kInvalidArgument, "pose and label lists differ in length");
  if (!(bucket_deg > 0.0) || bucket_deg > 90.0) {
    fail(ErrorCode::kInvalidArgument, "bucket width must lie in (0, 90] degrees");
  }
  const int buckets = static_cast<int>(std::ceil(90.0 / bucket_deg - 1e-9));
  AngleHistogram h;
  h.counts.assign(static_cast<std::size_t>(buckets), 0);
  h.percentages.assign(static_cast<std::size_t>(buckets), 0.0);
  for (int k = 0; k <= buckets; ++k) h.edges.push_back(std::min(90.0, k * bucket_deg));

  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (int b = 0; b < kNumFbiBones; ++b) {
      if (labels[i][static_cast<std::size_t>(b)] != FbiStatus::kUncertain) continue;
      double theta = 0.0;
      try {
        theta = std::abs(out_of_plane_angle(poses[i], b, topology));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kDegenerateBone) continue;
        throw;
      }
      const int k = std::min(buckets - 1, static_cast<int>(theta / bucket_deg));
      ++h.counts[static_cast<std::size_t>(k)];
      ++h.total;
    }
  }
  if (h.total > 0) {
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
      h.percentages[k] = 100.0 * static_cast<double>(h.counts[k]) / static_cast<double>(h.total);
    }
  }
  return h;
}

}  // namespace fbipose
