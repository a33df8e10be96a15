#include "fbipose/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "fbipose/embedded_config.hpp"
#include "fbipose/error.hpp"

namespace fbipose {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kPerceptionDeg = 60.0;

using Rot = Eigen::Matrix3d;

Rot rot_x(double deg) { return Eigen::AngleAxisd(deg * kDegToRad, Vec3::UnitX()).toRotationMatrix(); }
Rot rot_y(double deg) { return Eigen::AngleAxisd(deg * kDegToRad, Vec3::UnitY()).toRotationMatrix(); }
Rot rot_z(double deg) { return Eigen::AngleAxisd(deg * kDegToRad, Vec3::UnitZ()).toRotationMatrix(); }

std::map<std::string, AngleRange> parse_ranges(const nlohmann::json& j) {
  std::map<std::string, AngleRange> out;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_array() || value.size() != 2) {
      fail(ErrorCode::kInvalidArgument, "range '" + key + "' must be [lo, hi]");
    }
    AngleRange r{value[0].get<double>(), value[1].get<double>()};
    if (!(r.lo <= r.hi)) fail(ErrorCode::kInvalidArgument, "range '" + key + "' has lo > hi");
    out.emplace(key, r);
  }
  return out;
}

nlohmann::json dump_ranges(const std::map<std::string, AngleRange>& ranges) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, r] : ranges) j[key] = {r.lo, r.hi};
  return j;
}

const AngleRange& lookup(const std::map<std::string, AngleRange>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) fail(ErrorCode::kInvalidArgument, "generator config lacks '" + key + "'");
  return it->second;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(const AngleRange& r) {
    std::uniform_real_distribution<double> d(r.lo, r.hi);
    return r.lo == r.hi ? r.lo : d(rng_);
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

const SynthConfig& SynthConfig::standard() {
  static const SynthConfig cfg = SynthConfig::from_json(nlohmann::json::parse(embedded::kSynthConfigJson));
  return cfg;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& doc) {
  SynthConfig c;
  try {
    if (doc.value("schema", std::string{}) != "synthetic-generator/v1") {
      fail(ErrorCode::kSchemaVersion, "generator config must declare schema synthetic-generator/v1");
    }
    c.bone_lengths = BoneLengthPrior::from_json(doc.at("bone_lengths_mm"), SkeletonTopology::standard());
    c.ranges = parse_ranges(doc.at("ranges_deg"));
    c.view = parse_ranges(doc.at("view_deg"));
    c.placement = parse_ranges(doc.at("placement"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed generator config: ") + e.what());
  }
  return c;
}

nlohmann::json SynthConfig::to_json() const {
  return {{"schema", "synthetic-generator/v1"},
          {"bone_lengths_mm", bone_lengths.to_json(SkeletonTopology::standard())},
          {"ranges_deg", dump_ranges(ranges)},
          {"view_deg", dump_ranges(view)},
          {"placement", dump_ranges(placement)}};
}

const AngleRange& SynthConfig::range(const std::string& key) const { return lookup(ranges, key); }

SyntheticDraw generate_synthetic_draw(std::uint64_t seed, const SynthConfig& config) {
  const SkeletonTopology& topo = SkeletonTopology::standard();
  Sampler rng(seed);
  auto draw = [&](const char* key) { return rng.uniform(config.range(key)); };
  auto length_of = [&](const char* child) {
    return config.bone_lengths.lengths[static_cast<std::size_t>(topo.edge_into(topo.joint_index(child)))];
  };
  auto joint = [&](const char* name) { return static_cast<std::size_t>(topo.joint_index(name)); };

  // Body frame: x to the subject's left, y up, z in the facing direction.
  const Vec3 up = Vec3::UnitY();
  const Vec3 down = -Vec3::UnitY();
  std::vector<Vec3> body(kNumJoints, Vec3::Zero());
  SyntheticDraw out;

  const Rot pelvis = rot_x(draw("pelvis_tilt"));
  const double spine_bend = draw("spine_bend");
  const double spine_lean = draw("spine_lean");
  const Rot torso = pelvis * rot_z(spine_lean) * rot_x(spine_bend);
  body[joint("thorax")] = length_of("thorax") * (torso * up);
  const double neck_lean = draw("neck_lean");
  const double neck_flex = draw("neck_flex");
  const Rot neck = torso * rot_z(neck_lean) * rot_x(neck_flex);
  body[joint("upper-neck")] = body[joint("thorax")] + length_of("upper-neck") * (neck * up);
  const double head_lean = draw("head_lean");
  const double head_flex = draw("head_flex");
  const Rot head = neck * rot_z(head_lean) * rot_x(head_flex);
  body[joint("head-top")] = body[joint("upper-neck")] + length_of("head-top") * (head * up);

  const Rot girdle = torso * rot_y(draw("torso_twist"));
  struct Limb {
    const char* shoulder;
    const char* elbow;
    const char* wrist;
    const char* hip;
    const char* knee;
    const char* ankle;
    double side;  // +1 left, -1 right
    int slot;
  };
  const Limb limbs[] = {
      {"r-shoulder", "r-elbow", "r-wrist", "r-hip", "r-knee", "r-ankle", -1.0, 0},
      {"l-shoulder", "l-elbow", "l-wrist", "l-hip", "l-knee", "l-ankle", +1.0, 1},
  };
  double thigh_flex[2] = {0.0, 0.0};
  for (const Limb& limb : limbs) {
    const double s = limb.side;
    const Vec3 lateral(s, 0.0, 0.0);

    const double elevation = draw("shoulder_elevation");
    const double protraction = draw("shoulder_protraction");
    const Vec3 shoulder_dir = girdle * rot_z(s * elevation) * rot_y(-s * protraction) * lateral;
    body[joint(limb.shoulder)] = body[joint("thorax")] + length_of(limb.shoulder) * shoulder_dir;

    const double arm_abduction = draw("arm_abduction");
    const double arm_flexion = draw("arm_flexion");
    const double arm_twist = draw("arm_twist");
    const Rot arm = girdle * rot_z(s * arm_abduction) * rot_x(-arm_flexion) * rot_y(s * arm_twist);
    const Vec3 upper = arm * down;
    const Vec3 elbow_axis = arm * Vec3::UnitX();
    const double elbow = draw("elbow_flexion");
    const Vec3 fore = Eigen::AngleAxisd(-elbow * kDegToRad, elbow_axis) * upper;
    body[joint(limb.elbow)] = body[joint(limb.shoulder)] + length_of(limb.elbow) * upper;
    body[joint(limb.wrist)] = body[joint(limb.elbow)] + length_of(limb.wrist) * fore;
    out.elbow_flexion_deg[limb.slot] = elbow;

    const Vec3 hip_dir = pelvis * rot_z(-s * draw("hip_droop")) * lateral;
    body[joint(limb.hip)] = length_of(limb.hip) * hip_dir;

    thigh_flex[limb.slot] = draw("thigh_flexion");
    const double thigh_abduction = draw("thigh_abduction");
    const double thigh_twist = draw("thigh_twist");
    const Rot leg = pelvis * rot_z(s * thigh_abduction) * rot_x(-thigh_flex[limb.slot]) * rot_y(s * thigh_twist);
    const Vec3 thigh = leg * down;
    const Vec3 knee_axis = leg * Vec3::UnitX();
    const double knee = draw("knee_flexion");
    const Vec3 shin = Eigen::AngleAxisd(knee * kDegToRad, knee_axis) * thigh;
    body[joint(limb.knee)] = body[joint(limb.hip)] + length_of(limb.knee) * thigh;
    body[joint(limb.ankle)] = body[joint(limb.knee)] + length_of(limb.ankle) * shin;
    out.knee_flexion_deg[limb.slot] = knee;
  }

  if (thigh_flex[0] > 60.0 && thigh_flex[1] > 60.0) {
    out.action = "sitting";
  } else if (spine_bend > 30.0) {
    out.action = "bending";
  } else {
    out.action = "standing";
  }

  // Facing the camera maps body (x, y, z) to camera (X, -Y, -Z).
  const Rot facing = Vec3(1.0, -1.0, -1.0).asDiagonal();
  // Draws are sequenced explicitly; operand evaluation order is unspecified.
  const double roll = rng.uniform(lookup(config.view, "roll"));
  const double pitch = rng.uniform(lookup(config.view, "pitch"));
  const double yaw = rng.uniform(lookup(config.view, "yaw"));
  const Rot view = rot_z(roll) * rot_x(pitch) * facing * rot_y(yaw);
  const AngleRange& lateral = lookup(config.placement, "root_lateral_mm");
  Vec3 root;
  root.x() = rng.uniform(lateral);
  root.y() = rng.uniform(lateral);
  root.z() = rng.uniform(lookup(config.placement, "root_depth_mm"));
  out.pose.joints.resize(kNumJoints);
  for (std::size_t j = 0; j < body.size(); ++j) out.pose.joints[j] = view * body[j] + root;

  out.camera.scale = rng.uniform(lookup(config.placement, "pixels_per_mm"));
  const AngleRange& principal = lookup(config.placement, "principal_px");
  out.camera.principal.x() = rng.uniform(principal);
  out.camera.principal.y() = rng.uniform(principal);
  return out;
}

Pose3D generate_synthetic_pose(std::uint64_t seed, const SynthConfig& config) {
  return generate_synthetic_draw(seed, config).pose;
}

Pose3D depth_mirror(const Pose3D& pose, const SkeletonTopology& topology) {
  require_valid(pose);
  Pose3D out = pose;
  const double root_z = pose.joints[static_cast<std::size_t>(topology.root())].z();
  for (auto& j : out.joints) j.z() = 2.0 * root_z - j.z();
  return out;
}

void FbiProbabilities::validate() const {
  for (const FbiProbRows* m : {&p_fws, &p_aws}) {
    for (int b = 0; b < kNumFbiBones; ++b) {
      if (!m->row(b).allFinite() || (m->row(b).array() < 0.0).any() ||
          std::abs(m->row(b).sum() - 1.0) > 1e-9) {
        fail(ErrorCode::kInvalidArgument,
             "FBI probability row " + std::to_string(b) + " is not a probability distribution");
      }
    }
  }
}

FbiProbabilities simulate_fbi_probabilities(const Pose3D& pose, double alpha_deg, double concentration,
                                            std::uint64_t seed, const SkeletonTopology& topology) {
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    fail(ErrorCode::kInvalidArgument, "concentration must be positive");
  }
  if (!(alpha_deg >= 0.0 && alpha_deg <= 90.0)) {
    fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 90] degrees");
  }
  require_valid(pose);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double perception_sd = kPerceptionDeg / concentration;

  FbiProbabilities out;
  for (int b = 0; b < kNumFbiBones; ++b) {
    double theta = 0.0;
    try {
      theta = out_of_plane_angle(pose, b, topology);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateBone) throw;
    }
    const double observed = std::clamp(theta + perception_sd * gauss(rng), -90.0, 90.0);
    int label = 2;
    if (observed > alpha_deg) {
      label = 0;
    } else if (observed < -alpha_deg) {
      label = 1;
    }
    const double steep = std::abs(std::sin(observed * kDegToRad));
    const double weights[2] = {0.05 + 0.95 * steep, 1.0 - 0.95 * steep};
    FbiProbRows* rows[2] = {&out.p_fws, &out.p_aws};
    for (int branch = 0; branch < 2; ++branch) {
      Eigen::Vector3d logits;
      for (int j = 0; j < kNumFbiStates; ++j) {
        logits[j] = gauss(rng) + (j == label ? concentration * weights[branch] : 0.0);
      }
      logits.array() -= logits.maxCoeff();
      const Eigen::Vector3d e = logits.array().exp();
      rows[branch]->row(b) = (e / e.sum()).transpose();
    }
  }
  return out;
}

}  // namespace fbipose
