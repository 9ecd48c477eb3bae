#ifndef FLOWPOSE_TRIANGULATION_H_
#define FLOWPOSE_TRIANGULATION_H_

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "flowpose/camera.h"
#include "flowpose/flow.h"
#include "flowpose/pose.h"

namespace flowpose {

enum class TriangulationStatus {
  kOk,
  kSmallAngle,
  kNegativeDepth,
  kOutOfBounds,
};

struct TriangulatedSample {
  Eigen::Vector2d p_a;
  Eigen::Vector2d p_b;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  // camera-A frame
  double depth_a = 0.0;
  double depth_b = 0.0;
  TriangulationStatus status = TriangulationStatus::kOk;

  bool valid() const { return status == TriangulationStatus::kOk; }
};

struct TriangulatedSet {
  std::vector<TriangulatedSample> samples;
  std::size_t valid_count() const;
};

struct TriangulationOptions {
  // Rays whose angle statistic falls below this cosine are rejected.
  double min_cosine = 0.001;
  // Triangulated depths beyond this are treated as out of bounds.
  double max_depth = 1e4;
};

// Closest-approach parameters for two rays c_i + lambda_i n_i and the
// midpoint of the two closest points.
struct MidpointSolution {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  // ||n1||^2 ||n2||^2 - (n1.n2)^2
  double determinant = 0.0;
};

// Solves the 2x2 stationarity system in closed form with the adjugate
// inverse. Returns nullopt only for exactly parallel rays (determinant <= 0).
std::optional<MidpointSolution> solve_midpoint(const Ray& r1, const Ray& r2);

// cos of the angle between n1 and v = c2 + <c1 - c2, n2^> n2^ - c1, using
// unit directions. Returns 0 when v vanishes.
double ray_angle_cosine(const Ray& r1, const Ray& r2);

// Rays of a correspondence in camera-A coordinates: c1 = 0, n1 = K^-1 h(p_a);
// c2 = -R^T t, n2 = R^T K^-1 h(p_b).
std::pair<Ray, Ray> correspondence_rays(const Eigen::Vector2d& p_a,
                                        const Eigen::Vector2d& p_b,
                                        const RigidPose& pose_ab,
                                        const CameraIntrinsics& K);

// Mid-point triangulation of every correspondence with per-sample status.
// Image bounds for the reprojection test come from corrs.width/height.
// Throws kPoseDegenerate when ||t|| < 1e-12.
TriangulatedSet midpoint_triangulate(const CorrespondenceSet& corrs,
                                     const RigidPose& pose_ab,
                                     const CameraIntrinsics& K,
                                     const TriangulationOptions& options = {});

// d x* / d (p_a.x, p_a.y, p_b.x, p_b.y), differentiating the closed-form
// lambdas and midpoint through the pixel-to-ray map. Throws
// kGradientUndefined when the system determinant is below 1e-12.
Eigen::Matrix<double, 3, 4> triangulation_gradient(const Eigen::Vector2d& p_a,
                                                   const Eigen::Vector2d& p_b,
                                                   const RigidPose& pose_ab,
                                                   const CameraIntrinsics& K);

}  // namespace flowpose

#endif  // FLOWPOSE_TRIANGULATION_H_
