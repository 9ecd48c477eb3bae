#include "flowpose/pnp.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "flowpose/error.h"
#include "flowpose/evaluation.h"
#include "flowpose/random.h"

namespace flowpose {
namespace {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

struct ControlPoints {
  std::vector<Vector3d> world;
  MatrixXd alphas;  // n x k barycentric coordinates
};

ControlPoints choose_control_points(std::span<const Vector3d> points) {
  const std::size_t n = points.size();
  Vector3d c0 = Vector3d::Zero();
  for (const auto& p : points) c0 += p;
  c0 /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - c0) * (p - c0).transpose();
  cov /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Vector3d lambda = es.eigenvalues();  // ascending
  if (!(lambda(2) > 0.0) || lambda(1) < 1e-12 * lambda(2)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "PnP points are coincident or collinear");
  }
  const bool planar = lambda(0) < 1e-10 * lambda(2);
  ControlPoints cp;
  cp.world.push_back(c0);
  for (int axis = 2; axis >= (planar ? 1 : 0); --axis) {
    cp.world.push_back(c0 + std::sqrt(lambda(axis)) * es.eigenvectors().col(axis));
  }
  const int k = static_cast<int>(cp.world.size());
  MatrixXd B(3, k - 1);
  for (int j = 1; j < k; ++j) B.col(j - 1) = cp.world[j] - c0;
  const auto qr = B.colPivHouseholderQr();
  cp.alphas.resize(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd a = qr.solve(points[i] - c0);
    cp.alphas(i, 0) = 1.0 - a.sum();
    cp.alphas.row(i).tail(k - 1) = a.transpose();
  }
  return cp;
}

double mean_reprojection_error(const RigidPose& pose,
                               std::span<const Vector3d> points,
                               std::span<const Vector2d> pixels,
                               const CameraIntrinsics& K) {
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sum += reprojection_error(pose, points[i], pixels[i], K);
  }
  return sum / static_cast<double>(points.size());
}

double squared_cost(const RigidPose& pose, std::span<const Vector3d> points,
                    std::span<const Vector2d> pixels,
                    const CameraIntrinsics& K) {
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vector3d X = pose * points[i];
    if (!(X.z() > 0.0)) return std::numeric_limits<double>::infinity();
    sum += (project(X, K) - pixels[i]).squaredNorm();
  }
  return sum;
}

// Distance-preservation residuals between control points for a given
// combination of null vectors.
struct BetaProblem {
  std::vector<std::array<int, 2>> pairs;
  std::vector<double> rho;
  std::vector<std::vector<Vector3d>> deltas;  // [pair][null vector]
};

VectorXd refine_betas(const BetaProblem& prob, VectorXd beta) {
  const int N = static_cast<int>(beta.size());
  const int m = static_cast<int>(prob.pairs.size());
  for (int iter = 0; iter < 10; ++iter) {
    MatrixXd J(m, N);
    VectorXd r(m);
    for (int p = 0; p < m; ++p) {
      Vector3d d = Vector3d::Zero();
      for (int a = 0; a < N; ++a) d += beta(a) * prob.deltas[p][a];
      r(p) = d.squaredNorm() - prob.rho[p];
      for (int a = 0; a < N; ++a) J(p, a) = 2.0 * d.dot(prob.deltas[p][a]);
    }
    const VectorXd step = J.colPivHouseholderQr().solve(-r);
    if (!step.allFinite()) break;
    beta += step;
    if (step.norm() <= 1e-14 * beta.norm()) break;
  }
  return beta;
}

VectorXd linearized_betas(const BetaProblem& prob, int N) {
  const int m = static_cast<int>(prob.pairs.size());
  const int unknowns = N * (N + 1) / 2;
  MatrixXd L(m, unknowns);
  VectorXd rho(m);
  for (int p = 0; p < m; ++p) {
    int col = 0;
    for (int a = 0; a < N; ++a) {
      for (int b = a; b < N; ++b) {
        const double f = a == b ? 1.0 : 2.0;
        L(p, col++) = f * prob.deltas[p][a].dot(prob.deltas[p][b]);
      }
    }
    rho(p) = prob.rho[p];
  }
  const VectorXd prod = L.colPivHouseholderQr().solve(rho);
  VectorXd beta = VectorXd::Zero(N);
  beta(0) = std::sqrt(std::abs(prod(0)));
  if (beta(0) > 0.0) {
    for (int b = 1; b < N; ++b) beta(b) = prod(b) / beta(0);
  }
  return beta;
}

}  // namespace

double reprojection_error(const RigidPose& pose, const Vector3d& point,
                          const Vector2d& pixel, const CameraIntrinsics& K) {
  const Vector3d X = pose * point;
  if (!(X.z() > 0.0)) return std::numeric_limits<double>::infinity();
  return (project(X, K) - pixel).norm();
}

RigidPose epnp(std::span<const Vector3d> points,
               std::span<const Vector2d> pixels, const CameraIntrinsics& K) {
  if (points.size() != pixels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "PnP inputs differ in size");
  }
  if (points.size() < static_cast<std::size_t>(kPnpMinimalSample)) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "EPnP needs at least 6 points");
  }
  const ControlPoints cp = choose_control_points(points);
  const int k = static_cast<int>(cp.world.size());
  const std::size_t n = points.size();

  MatrixXd M = MatrixXd::Zero(2 * n, 3 * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const double a = cp.alphas(i, j);
      M(2 * i, 3 * j) = a * K.fx;
      M(2 * i, 3 * j + 2) = a * (K.cx - pixels[i].x());
      M(2 * i + 1, 3 * j + 1) = a * K.fy;
      M(2 * i + 1, 3 * j + 2) = a * (K.cy - pixels[i].y());
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M.transpose() * M);
  const MatrixXd& V = es.eigenvectors();

  BetaProblem prob;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      prob.pairs.push_back({i, j});
      prob.rho.push_back((cp.world[i] - cp.world[j]).squaredNorm());
    }
  }
  const int max_n = k == 4 ? 4 : 3;
  prob.deltas.resize(prob.pairs.size());
  for (std::size_t p = 0; p < prob.pairs.size(); ++p) {
    const auto [i, j] = prob.pairs[p];
    for (int a = 0; a < max_n; ++a) {
      prob.deltas[p].push_back(V.col(a).segment<3>(3 * i) -
                               V.col(a).segment<3>(3 * j));
    }
  }

  RigidPose best;
  double best_err = std::numeric_limits<double>::infinity();
  VectorXd previous;
  for (int N = 1; N <= max_n; ++N) {
    BetaProblem sub = prob;
    for (auto& d : sub.deltas) d.resize(N);
    VectorXd beta;
    if (N * (N + 1) / 2 <= static_cast<int>(prob.pairs.size())) {
      beta = linearized_betas(sub, N);
    } else {
      beta = VectorXd::Zero(N);
      beta.head(N - 1) = previous;
    }
    beta = refine_betas(sub, beta);
    previous = beta;
    if (!beta.allFinite()) continue;

    std::vector<Vector3d> cc(k, Vector3d::Zero());
    for (int j = 0; j < k; ++j) {
      for (int a = 0; a < N; ++a) cc[j] += beta(a) * V.col(a).segment<3>(3 * j);
    }
    std::vector<Vector3d> camera(n, Vector3d::Zero());
    double mean_z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) camera[i] += cp.alphas(i, j) * cc[j];
      mean_z += camera[i].z();
    }
    if (mean_z < 0.0) {
      for (auto& c : camera) c = -c;
    }
    RigidPose pose;
    try {
      const Sim3Transform rigid =
          umeyama(points, std::span<const Vector3d>(camera), false);
      pose.rotation = rigid.rotation;
      pose.translation = rigid.translation;
    } catch (const Error&) {
      continue;
    }
    const double err = mean_reprojection_error(pose, points, pixels, K);
    if (err < best_err) {
      best_err = err;
      best = pose;
    }
  }
  if (!std::isfinite(best_err)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "EPnP found no pose with all points in front");
  }
  return best;
}

RigidPose refine_pnp(std::span<const Vector3d> points,
                     std::span<const Vector2d> pixels,
                     const CameraIntrinsics& K, const RigidPose& initial,
                     int max_iters) {
  RigidPose pose = initial;
  double cost = squared_cost(pose, points, pixels, K);
  if (!std::isfinite(cost)) return pose;
  const std::size_t n = points.size();
  for (int iter = 0; iter < max_iters && cost > 0.0; ++iter) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Vector3d X = pose * points[i];
      const double iz = 1.0 / X.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << K.fx * iz, 0.0, -K.fx * X.x() * iz * iz, 0.0, K.fy * iz,
          -K.fy * X.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dX;
      dX.leftCols<3>() = -skew(X);
      dX.rightCols<3>().setIdentity();
      const Eigen::Matrix<double, 2, 6> J = dproj * dX;
      const Vector2d r = project(X, K) - pixels[i];
      H += J.transpose() * J;
      g += J.transpose() * r;
    }
    const Eigen::Matrix<double, 6, 1> step = -H.ldlt().solve(g);
    if (!step.allFinite()) break;
    RigidPose next;
    const Eigen::Matrix3d dR = exp_so3(step.head<3>());
    next.rotation = dR * pose.rotation;
    next.translation = dR * pose.translation + step.tail<3>();
    const double next_cost = squared_cost(next, points, pixels, K);
    if (!(next_cost < cost)) break;
    pose = next;
    const bool converged = cost - next_cost <= 1e-15 * cost;
    cost = next_cost;
    if (converged) break;
  }
  pose.rotation = nearest_rotation(pose.rotation);
  return pose;
}

PnpResult pnp_ransac(std::span<const Vector3d> points,
                     std::span<const Vector2d> pixels,
                     const CameraIntrinsics& K, const PnpOptions& options) {
  if (points.size() != pixels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "PnP inputs differ in size");
  }
  const std::size_t n = points.size();
  if (n < static_cast<std::size_t>(kPnpMinimalSample)) {
    throw Error(ErrorCode::kPnpFailure, "fewer than 6 PnP correspondences");
  }
  auto inliers_of = [&](const RigidPose& pose, std::vector<char>& mask) {
    mask.assign(n, 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (reprojection_error(pose, points[i], pixels[i], K) < options.threshold) {
        mask[i] = 1;
        ++count;
      }
    }
    return count;
  };

  CounterRng rng(options.seed, "pnp");
  const int max_iters = std::max(1, options.max_iters);
  const int max_draws = 10 * max_iters + 100;
  int required = max_iters;
  int iterations = 0;
  std::size_t best_count = 0;
  RigidPose best_pose;
  std::vector<char> mask;
  std::array<Vector3d, kPnpMinimalSample> sp;
  std::array<Vector2d, kPnpMinimalSample> sx;
  std::array<std::size_t, kPnpMinimalSample> idx{};

  for (int draws = 0; draws < max_draws && iterations < required; ++draws) {
    for (int k = 0; k < kPnpMinimalSample; ++k) {
      std::size_t i;
      do {
        i = rng.uniform_index(n);
      } while (std::find(idx.begin(), idx.begin() + k, i) != idx.begin() + k);
      idx[k] = i;
      sp[k] = points[i];
      sx[k] = pixels[i];
    }
    RigidPose pose;
    try {
      pose = epnp(sp, sx, K);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateConfiguration) continue;
      throw;
    }
    ++iterations;
    const std::size_t count = inliers_of(pose, mask);
    if (count > best_count) {
      best_count = count;
      best_pose = pose;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      if (w >= 1.0) {
        required = 0;
      } else {
        const double p = std::pow(w, kPnpMinimalSample);
        if (p > std::numeric_limits<double>::epsilon()) {
          const double need =
              std::log(1.0 - options.confidence) / std::log(1.0 - p);
          if (std::isfinite(need) && need < required) {
            required = static_cast<int>(std::ceil(need));
          }
        }
      }
    }
  }
  if (best_count < static_cast<std::size_t>(kPnpMinimalSample)) {
    throw Error(ErrorCode::kPnpFailure,
                "no PnP hypothesis reached 6 inliers (best " +
                    std::to_string(best_count) + ")");
  }

  PnpResult result;
  result.iterations = iterations;
  RigidPose pose = best_pose;
  for (int round = 0; round < 2; ++round) {
    inliers_of(pose, mask);
    std::vector<Vector3d> ip;
    std::vector<Vector2d> ix;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) {
        ip.push_back(points[i]);
        ix.push_back(pixels[i]);
      }
    }
    if (ip.size() < static_cast<std::size_t>(kPnpMinimalSample)) break;
    RigidPose start = pose;
    try {
      const RigidPose linear = epnp(ip, ix, K);
      if (squared_cost(linear, ip, ix, K) < squared_cost(start, ip, ix, K)) {
        start = linear;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
    }
    pose = refine_pnp(ip, ix, K, start);
  }
  result.num_inliers = inliers_of(pose, mask);
  if (result.num_inliers < static_cast<std::size_t>(kPnpMinimalSample)) {
    throw Error(ErrorCode::kPnpFailure, "refined PnP pose kept < 6 inliers");
  }
  result.pose = pose;
  result.inlier_mask = std::move(mask);
  return result;
}

}  // namespace flowpose
