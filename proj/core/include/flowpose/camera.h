#ifndef FLOWPOSE_CAMERA_H_
#define FLOWPOSE_CAMERA_H_

#include <Eigen/Core>

namespace flowpose {

// Pinhole calibration. width/height of 0 mean "image size unknown"; the
// principal-point bound is then not checked.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws kInvalidArgument when the invariants fail.
  void validate() const;

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse_matrix() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

// (fx x/z + cx, fy y/z + cy). Throws kNonPositiveDepth for z <= 0.
Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraIntrinsics& K);

// Camera-frame point at the given depth along the pixel's ray; result.z() is
// exactly `depth`.
Eigen::Vector3d unproject(const Eigen::Vector2d& pixel, double depth,
                          const CameraIntrinsics& K);

// K^-1 h(p): ray direction with unit z component.
inline Eigen::Vector3d pixel_ray(const Eigen::Vector2d& pixel,
                                 const CameraIntrinsics& K) {
  return {(pixel.x() - K.cx) / K.fx, (pixel.y() - K.cy) / K.fy, 1.0};
}

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // nonzero, not necessarily unit
};

}  // namespace flowpose

#endif  // FLOWPOSE_CAMERA_H_
