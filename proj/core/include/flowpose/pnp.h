#ifndef FLOWPOSE_PNP_H_
#define FLOWPOSE_PNP_H_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flowpose/camera.h"
#include "flowpose/pose.h"

namespace flowpose {

inline constexpr int kPnpMinimalSample = 6;

// Linear EPnP estimate of the pose mapping world points into the camera.
// Uses four control points, or three when the points are coplanar. Needs at
// least 6 points; throws kDegenerateConfiguration when no estimate is finite.
RigidPose epnp(std::span<const Eigen::Vector3d> points,
               std::span<const Eigen::Vector2d> pixels,
               const CameraIntrinsics& K);

// Gauss-Newton on the summed squared reprojection error with a left
// multiplicative rotation update. Stops when the cost no longer decreases.
RigidPose refine_pnp(std::span<const Eigen::Vector3d> points,
                     std::span<const Eigen::Vector2d> pixels,
                     const CameraIntrinsics& K, const RigidPose& initial,
                     int max_iters = 20);

// Pixel reprojection error, +inf for points at or behind the camera.
double reprojection_error(const RigidPose& pose, const Eigen::Vector3d& point,
                          const Eigen::Vector2d& pixel,
                          const CameraIntrinsics& K);

struct PnpOptions {
  double threshold = 1.0;  // pixels
  double confidence = 0.99;
  int max_iters = 500;
  std::uint64_t seed = 0;
};

struct PnpResult {
  RigidPose pose;
  std::vector<char> inlier_mask;
  std::size_t num_inliers = 0;
  int iterations = 0;
};

// RANSAC over 6-point EPnP hypotheses, then EPnP + Gauss-Newton on the
// inliers. Throws kPnpFailure with fewer than 6 inliers.
PnpResult pnp_ransac(std::span<const Eigen::Vector3d> points,
                     std::span<const Eigen::Vector2d> pixels,
                     const CameraIntrinsics& K, const PnpOptions& options);

}  // namespace flowpose

#endif  // FLOWPOSE_PNP_H_
