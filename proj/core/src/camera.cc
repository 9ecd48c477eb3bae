#include "flowpose/camera.h"

#include <cmath>
#include <string>

#include "flowpose/error.h"

namespace flowpose {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point must be finite");
  }
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative image size");
  }
  if (width > 0 && height > 0 &&
      (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)) {
    throw Error(ErrorCode::kInvalidArgument,
                "principal point outside the image");
  }
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

Eigen::Matrix3d CameraIntrinsics::inverse_matrix() const {
  Eigen::Matrix3d K_inv;
  K_inv << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return K_inv;
}

Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraIntrinsics& K) {
  if (!(point.z() > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "cannot project point with z = " + std::to_string(point.z()));
  }
  return {K.fx * point.x() / point.z() + K.cx,
          K.fy * point.y() / point.z() + K.cy};
}

Eigen::Vector3d unproject(const Eigen::Vector2d& pixel, double depth,
                          const CameraIntrinsics& K) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "cannot unproject with depth " + std::to_string(depth));
  }
  return {(pixel.x() - K.cx) / K.fx * depth, (pixel.y() - K.cy) / K.fy * depth,
          depth};
}

}  // namespace flowpose
