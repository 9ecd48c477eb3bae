#include "flowpose/pose.h"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

namespace flowpose {

RigidPose RigidPose::from_matrix(const Eigen::Matrix4d& m) {
  RigidPose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Eigen::Matrix4d RigidPose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidPose compose(const RigidPose& a, const RigidPose& b) {
  RigidPose c;
  c.rotation = a.rotation * b.rotation;
  c.translation = a.rotation * b.translation + a.translation;
  return c;
}

RigidPose invert(const RigidPose& a) {
  RigidPose inv;
  inv.rotation = a.rotation.transpose();
  inv.translation = -(inv.rotation * a.translation);
  return inv;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d S;
  S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return S;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    return Eigen::Matrix3d::Identity() + skew(omega);
  }
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

double rotation_angle(const Eigen::Matrix3d& R) {
  // atan2 form stays accurate for tiny angles where acos((tr-1)/2) does not.
  const Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0),
                          R(1, 0) - R(0, 1));
  const double s = 0.5 * w.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  return std::atan2(s, c);
}

double rotation_error(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  // Entrywise column dots: a == b gives an exactly symmetric a^T b and
  // therefore an exact zero angle.
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = a.col(i).dot(b.col(j));
  }
  return rotation_angle(m);
}

double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double orthonormality_error(const Eigen::Matrix3d& R) {
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    D(2, 2) = -1.0;
  }
  return svd.matrixU() * D * svd.matrixV().transpose();
}

RigidPose reorthonormalized(const RigidPose& pose, double tolerance) {
  if (orthonormality_error(pose.rotation) <= tolerance) return pose;
  RigidPose out = pose;
  out.rotation = nearest_rotation(pose.rotation);
  return out;
}

bool is_valid_rotation(const Eigen::Matrix3d& R, double tolerance) {
  return orthonormality_error(R) < tolerance &&
         std::abs(R.determinant() - 1.0) < tolerance;
}

}  // namespace flowpose
