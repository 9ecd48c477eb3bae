#include "flowpose/triangulation.h"

#include <cmath>

#include "flowpose/error.h"

namespace flowpose {
namespace {

constexpr double kGradientDeterminantFloor = 1e-12;

bool reprojects_inside(const Eigen::Vector3d& point, const CameraIntrinsics& K,
                       int width, int height) {
  if (width <= 0 || height <= 0) return true;
  const Eigen::Vector2d px = project(point, K);
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
}

}  // namespace

std::size_t TriangulatedSet::valid_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.valid() ? 1 : 0;
  return n;
}

std::optional<MidpointSolution> solve_midpoint(const Ray& r1, const Ray& r2) {
  const Eigen::Vector3d& n1 = r1.direction;
  const Eigen::Vector3d& n2 = r2.direction;
  const double a11 = n1.squaredNorm();
  const double a22 = n2.squaredNorm();
  const double a12 = n1.dot(n2);
  const double det = a11 * a22 - a12 * a12;
  if (!(det > 0.0)) return std::nullopt;

  const Eigen::Vector3d d = r2.origin - r1.origin;
  const double b1 = n1.dot(d);
  const double b2 = -n2.dot(d);

  MidpointSolution s;
  s.determinant = det;
  s.lambda1 = (a22 * b1 + a12 * b2) / det;
  s.lambda2 = (a12 * b1 + a11 * b2) / det;
  s.point = 0.5 * ((r1.origin + s.lambda1 * n1) + (r2.origin + s.lambda2 * n2));
  return s;
}

double ray_angle_cosine(const Ray& r1, const Ray& r2) {
  const Eigen::Vector3d n1 = r1.direction.normalized();
  const Eigen::Vector3d n2 = r2.direction.normalized();
  const Eigen::Vector3d v =
      r2.origin + (r1.origin - r2.origin).dot(n2) * n2 - r1.origin;
  const double norm = v.norm();
  if (!(norm > 0.0)) return 0.0;
  return v.dot(n1) / norm;
}

std::pair<Ray, Ray> correspondence_rays(const Eigen::Vector2d& p_a,
                                        const Eigen::Vector2d& p_b,
                                        const RigidPose& pose_ab,
                                        const CameraIntrinsics& K) {
  const Eigen::Matrix3d Rt = pose_ab.rotation.transpose();
  Ray r1{Eigen::Vector3d::Zero(), pixel_ray(p_a, K)};
  Ray r2{-(Rt * pose_ab.translation), Rt * pixel_ray(p_b, K)};
  return {r1, r2};
}

TriangulatedSet midpoint_triangulate(const CorrespondenceSet& corrs,
                                     const RigidPose& pose_ab,
                                     const CameraIntrinsics& K,
                                     const TriangulationOptions& options) {
  if (pose_ab.translation.norm() < 1e-12) {
    throw Error(ErrorCode::kPoseDegenerate,
                "translation vanishes; rays share an origin");
  }
  TriangulatedSet out;
  out.samples.reserve(corrs.size());
  for (const Correspondence& c : corrs.items) {
    TriangulatedSample s;
    s.p_a = c.p_a;
    s.p_b = c.p_b;
    const auto [r1, r2] = correspondence_rays(c.p_a, c.p_b, pose_ab, K);
    const auto sol = solve_midpoint(r1, r2);
    if (!sol || ray_angle_cosine(r1, r2) < options.min_cosine) {
      s.status = TriangulationStatus::kSmallAngle;
      if (sol) s.point = sol->point;
      out.samples.push_back(s);
      continue;
    }
    s.point = sol->point;
    s.depth_a = s.point.z();
    s.depth_b = (pose_ab * s.point).z();
    if (!(s.depth_a > 0.0) || !(s.depth_b > 0.0)) {
      s.status = TriangulationStatus::kNegativeDepth;
    } else if (s.depth_a > options.max_depth || s.depth_b > options.max_depth ||
               !reprojects_inside(s.point, K, corrs.width, corrs.height) ||
               !reprojects_inside(pose_ab * s.point, K, corrs.width,
                                  corrs.height)) {
      s.status = TriangulationStatus::kOutOfBounds;
    }
    out.samples.push_back(s);
  }
  return out;
}

Eigen::Matrix<double, 3, 4> triangulation_gradient(const Eigen::Vector2d& p_a,
                                                   const Eigen::Vector2d& p_b,
                                                   const RigidPose& pose_ab,
                                                   const CameraIntrinsics& K) {
  const auto [r1, r2] = correspondence_rays(p_a, p_b, pose_ab, K);
  const Eigen::Vector3d& n1 = r1.direction;
  const Eigen::Vector3d& n2 = r2.direction;
  const double a11 = n1.squaredNorm();
  const double a22 = n2.squaredNorm();
  const double a12 = n1.dot(n2);
  const double det = a11 * a22 - a12 * a12;
  if (!(det >= kGradientDeterminantFloor)) {
    throw Error(ErrorCode::kGradientUndefined,
                "rays are (nearly) parallel; determinant " +
                    std::to_string(det));
  }
  const Eigen::Vector3d d = r2.origin - r1.origin;
  const double b1 = n1.dot(d);
  const double b2 = -n2.dot(d);
  const double lambda1 = (a22 * b1 + a12 * b2) / det;
  const double lambda2 = (a12 * b1 + a11 * b2) / det;

  // System M [l1 l2]^T = b with M = [[a11, -a12], [-a12, a22]].
  Eigen::Matrix2d M_inv;
  M_inv << a22, a12, a12, a11;
  M_inv /= det;

  // Pixel derivatives of the ray directions; origins do not depend on pixels.
  const Eigen::Matrix3d Rt = pose_ab.rotation.transpose();
  const Eigen::Vector3d dray_dx(1.0 / K.fx, 0.0, 0.0);
  const Eigen::Vector3d dray_dy(0.0, 1.0 / K.fy, 0.0);
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  const Eigen::Vector3d dn1[4] = {dray_dx, dray_dy, zero, zero};
  const Eigen::Vector3d dn2[4] = {zero, zero, Rt * dray_dx, Rt * dray_dy};

  Eigen::Matrix<double, 3, 4> J;
  for (int k = 0; k < 4; ++k) {
    const double da11 = 2.0 * n1.dot(dn1[k]);
    const double da22 = 2.0 * n2.dot(dn2[k]);
    const double da12 = dn1[k].dot(n2) + n1.dot(dn2[k]);
    const Eigen::Vector2d db(dn1[k].dot(d), -dn2[k].dot(d));
    const Eigen::Vector2d dM_lambda(da11 * lambda1 - da12 * lambda2,
                                    -da12 * lambda1 + da22 * lambda2);
    const Eigen::Vector2d dlambda = M_inv * (db - dM_lambda);
    J.col(k) = 0.5 * (dlambda(0) * n1 + lambda1 * dn1[k] + dlambda(1) * n2 +
                      lambda2 * dn2[k]);
  }
  return J;
}

}  // namespace flowpose
