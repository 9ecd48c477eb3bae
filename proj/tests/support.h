#ifndef FLOWPOSE_TESTS_SUPPORT_H_
#define FLOWPOSE_TESTS_SUPPORT_H_

#include <cmath>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "flowpose/camera.h"
#include "flowpose/error.h"
#include "flowpose/pose.h"
#include "flowpose/random.h"

namespace flowpose::testing {

template <typename Fn>
void expect_code(ErrorCode code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "no exception, expected " << error_code_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

inline Eigen::Vector3d random_unit(CounterRng& rng) {
  Eigen::Vector3d v;
  do {
    v = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Eigen::Matrix3d random_rotation(CounterRng& rng, double max_angle) {
  return Eigen::AngleAxisd(rng.uniform(0.0, max_angle), random_unit(rng))
      .toRotationMatrix();
}

inline RigidPose random_pose(CounterRng& rng, double max_angle = M_PI,
                             double max_translation = 5.0) {
  RigidPose p;
  p.rotation = random_rotation(rng, max_angle);
  p.translation = random_unit(rng) * rng.uniform(0.0, max_translation);
  return p;
}

inline CameraIntrinsics test_camera() { return {500, 480, 320, 240, 640, 480}; }

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "flowpose_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace flowpose::testing

#endif  // FLOWPOSE_TESTS_SUPPORT_H_
