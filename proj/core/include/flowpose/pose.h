#ifndef FLOWPOSE_POSE_H_
#define FLOWPOSE_POSE_H_

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace flowpose {

// Rigid transform x -> R x + t. For a relative pose T_ab this maps points in
// camera-a coordinates into camera-b coordinates; for a trajectory entry it
// is camera-to-world.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidPose identity() { return {}; }
  static RigidPose from_matrix(const Eigen::Matrix4d& m);

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const {
    return rotation * x + translation;
  }
  Eigen::Matrix4d matrix() const;
  // Camera center for an a->b transform: -R^T t.
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
};

// a ∘ b: apply b first, then a.
RigidPose compose(const RigidPose& a, const RigidPose& b);
RigidPose invert(const RigidPose& a);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega);
Eigen::Vector3d log_so3(const Eigen::Matrix3d& R);

// Geodesic angle of R in radians, robust near 0 and pi.
double rotation_angle(const Eigen::Matrix3d& R);
double rotation_error(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);
// Angle between two nonzero vectors in radians.
double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// ||R^T R - I||_F.
double orthonormality_error(const Eigen::Matrix3d& R);
// Polar projection onto SO(3).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& M);

inline constexpr double kReorthonormalizeTolerance = 1e-7;

// Projects the rotation back onto SO(3) when drift exceeds the tolerance;
// returns the pose unchanged otherwise.
RigidPose reorthonormalized(const RigidPose& pose,
                            double tolerance = kReorthonormalizeTolerance);

bool is_valid_rotation(const Eigen::Matrix3d& R, double tolerance = 1e-9);

}  // namespace flowpose

#endif  // FLOWPOSE_POSE_H_
