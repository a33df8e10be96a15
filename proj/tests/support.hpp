#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "fbipose/skeleton.hpp"
#include "fbipose/synthetic.hpp"

namespace fbitest {

namespace fs = std::filesystem;

// Fresh per-test directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fbipose_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline fbipose::Pose3D random_pose(std::uint64_t seed) { return fbipose::generate_synthetic_pose(seed); }

inline double max_joint_error(const fbipose::Pose3D& a, const fbipose::Pose3D& b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.joints.size(); ++j) worst = std::max(worst, (a.joints[j] - b.joints[j]).norm());
  return worst;
}

inline fbipose::Pose3D translated(fbipose::Pose3D p, const fbipose::Vec3& t) {
  for (auto& j : p.joints) j += t;
  return p;
}

}  // namespace fbitest
