#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "fbipose/lifting.hpp"
#include "fbipose/skeleton.hpp"

namespace fbipose {

struct AngleRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Synthetic body generator configuration (config/synth_default.json). Angle
// ranges are in degrees; see that file for the full list of keys.
struct SynthConfig {
  BoneLengthPrior bone_lengths;
  std::map<std::string, AngleRange> ranges;
  std::map<std::string, AngleRange> view;
  std::map<std::string, AngleRange> placement;

  static const SynthConfig& standard();
  static SynthConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const AngleRange& range(const std::string& key) const;
};

struct SyntheticDraw {
  Pose3D pose;  // camera frame, mm
  ScaledOrthoCamera camera;
  std::string action;  // coarse pose class: standing, bending or sitting
  double knee_flexion_deg[2] = {0.0, 0.0};   // right, left
  double elbow_flexion_deg[2] = {0.0, 0.0};  // right, left
};

SyntheticDraw generate_synthetic_draw(std::uint64_t seed, const SynthConfig& config = SynthConfig::standard());

Pose3D generate_synthetic_pose(std::uint64_t seed, const SynthConfig& config = SynthConfig::standard());

// Same pose with every root-relative depth negated. It projects to the same
// 2D pose under a weak-perspective camera.
Pose3D depth_mirror(const Pose3D& pose, const SkeletonTopology& topology = SkeletonTopology::standard());

using FbiProbRows = Eigen::Matrix<double, kNumFbiBones, kNumFbiStates, Eigen::RowMajor>;

struct FbiProbabilities {
  FbiProbRows p_fws = FbiProbRows::Constant(1.0 / 3.0);  // fixed-weight supervision branch
  FbiProbRows p_aws = FbiProbRows::Constant(1.0 / 3.0);  // focal-loss supervision branch

  static FbiProbabilities uniform() { return {}; }
  void validate() const;
};

// Stand-in for the image-based FBI predictor. Each bone's angle is observed
// with perception noise of 60/concentration degrees and thresholded at alpha;
// the observed class gets a logit bump of concentration * w plus unit
// Gaussian noise on every logit. w grows with |sin(theta)| for p_fws and
// shrinks with it for p_aws, so p_fws is confident on steep bones and p_aws
// on near-planar ones. As concentration grows both converge to the one-hot
// encoding of convert_pose_to_fbi().
FbiProbabilities simulate_fbi_probabilities(const Pose3D& pose, double alpha_deg, double concentration,
                                            std::uint64_t seed,
                                            const SkeletonTopology& topology = SkeletonTopology::standard());

}  // namespace fbipose
