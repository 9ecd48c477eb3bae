#include "flowpose/epipolar.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "flowpose/error.h"
#include "flowpose/random.h"
#include "flowpose/triangulation.h"

namespace flowpose {
namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
template <typename Getter>
Eigen::Matrix3d normalizing_transform(std::span<const Correspondence> corrs,
                                      Getter get) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& c : corrs) centroid += get(c);
  centroid /= static_cast<double>(corrs.size());
  double mean_dist = 0.0;
  for (const auto& c : corrs) mean_dist += (get(c) - centroid).norm();
  mean_dist /= static_cast<double>(corrs.size());
  if (!(mean_dist > 0.0) || !std::isfinite(mean_dist)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "all points coincide in one image");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d T;
  T << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return T;
}

template <typename Matrix>
Eigen::Matrix3d solve_constraint_system(const Matrix& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double largest = sv(0);
  // Padded minimal systems carry an exact zero as the 9th singular value, so
  // the uniqueness test is on the 8th.
  if (!(largest > 0.0) || sv(7) < kEightPointDegeneracyTolerance * largest) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "constraint matrix has a non-unique null direction");
  }
  const Eigen::Matrix<double, 9, 1> f = svd.matrixV().col(8);
  Eigen::Matrix3d F;
  F << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  return F;
}

Eigen::Matrix3d enforce_rank2(const Eigen::Matrix3d& F) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(F, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Vector3d s = svd.singularValues();
  s(2) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

bool has_collinear_seven(const std::array<Eigen::Vector2d, 8>& pts) {
  for (int skip = 0; skip < 8; ++skip) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (int i = 0; i < 8; ++i) {
      if (i != skip) mean += pts[i];
    }
    mean /= 7.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (int i = 0; i < 8; ++i) {
      if (i == skip) continue;
      const Eigen::Vector2d d = pts[i] - mean;
      cov += d * d.transpose();
    }
    const double tr = cov.trace();
    const double det = cov.determinant();
    // det / tr^2 ~ lambda_min / lambda_max for a thin spread.
    if (!(tr > 0.0) || det < 1e-10 * tr * tr) return true;
  }
  return false;
}

std::size_t count_inliers(const Eigen::Matrix3d& F,
                          const CorrespondenceSet& corrs, double threshold,
                          std::vector<char>* mask) {
  std::size_t count = 0;
  if (mask) mask->assign(corrs.size(), 0);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (symmetric_epipolar_distance(F, corrs[i].p_a, corrs[i].p_b) <
        threshold) {
      ++count;
      if (mask) (*mask)[i] = 1;
    }
  }
  return count;
}

int required_iterations(double inlier_ratio, double confidence, int max_iters) {
  if (inlier_ratio >= 1.0) return 0;
  const double p_clean = std::pow(inlier_ratio, 8);
  if (!(p_clean > std::numeric_limits<double>::epsilon())) return max_iters;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p_clean);
  if (!std::isfinite(n) || n > max_iters) return max_iters;
  return static_cast<int>(std::ceil(n));
}

}  // namespace

FundamentalMatrix eight_point(std::span<const Correspondence> corrs) {
  if (corrs.size() < 8) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "eight-point needs at least 8 correspondences");
  }
  const Eigen::Matrix3d Ta =
      normalizing_transform(corrs, [](const Correspondence& c) { return c.p_a; });
  const Eigen::Matrix3d Tb =
      normalizing_transform(corrs, [](const Correspondence& c) { return c.p_b; });

  const Eigen::Index rows = std::max<Eigen::Index>(9, corrs.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, 9);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Eigen::Vector3d a = Ta * corrs[i].p_a.homogeneous();
    const Eigen::Vector3d b = Tb * corrs[i].p_b.homogeneous();
    A.row(i) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(),
        b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }

  const Eigen::Matrix3d F_norm = enforce_rank2(solve_constraint_system(A));
  Eigen::Matrix3d F = Tb.transpose() * F_norm * Ta;
  F /= F.norm();
  return FundamentalMatrix{F};
}

double symmetric_epipolar_distance(const Eigen::Matrix3d& F,
                                   const Eigen::Vector2d& p_a,
                                   const Eigen::Vector2d& p_b) {
  const Eigen::Vector3d ha = p_a.homogeneous();
  const Eigen::Vector3d hb = p_b.homogeneous();
  const Eigen::Vector3d line_b = F * ha;
  const Eigen::Vector3d line_a = F.transpose() * hb;
  const double algebraic = std::abs(hb.dot(line_b));
  const double nb = line_b.head<2>().norm();
  const double na = line_a.head<2>().norm();
  if (!(nb > 0.0) || !(na > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return std::max(algebraic / nb, algebraic / na);
}

RansacResult ransac_fundamental(const CorrespondenceSet& corrs,
                                const RansacOptions& options) {
  const std::size_t n = corrs.size();
  if (n < 8) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "RANSAC needs at least 8 correspondences");
  }
  CounterRng rng(options.seed, "ransac");
  const int max_iters = std::max(1, options.max_iters);
  const int max_draws = 10 * max_iters + 100;

  std::size_t best_count = 0;
  Eigen::Matrix3d best_F = Eigen::Matrix3d::Zero();
  int required = max_iters;
  int iterations = 0;
  std::array<std::size_t, 8> sample{};
  std::array<Correspondence, 8> minimal;
  std::array<Eigen::Vector2d, 8> pts_a, pts_b;

  for (int draws = 0; draws < max_draws && iterations < required; ++draws) {
    for (int k = 0; k < 8; ++k) {
      std::size_t idx;
      do {
        idx = rng.uniform_index(n);
      } while (std::find(sample.begin(), sample.begin() + k, idx) !=
               sample.begin() + k);
      sample[k] = idx;
      minimal[k] = corrs[idx];
      pts_a[k] = corrs[idx].p_a;
      pts_b[k] = corrs[idx].p_b;
    }
    if (has_collinear_seven(pts_a) || has_collinear_seven(pts_b)) continue;
    Eigen::Matrix3d F;
    try {
      F = eight_point(std::span<const Correspondence>(minimal)).matrix;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateConfiguration) continue;
      throw;
    }
    ++iterations;
    const std::size_t count = count_inliers(F, corrs, options.threshold, nullptr);
    if (count > best_count) {
      best_count = count;
      best_F = F;
      required = std::min(
          required,
          required_iterations(static_cast<double>(count) / n,
                              options.confidence, max_iters));
    }
  }

  if (best_count < 8) {
    throw Error(ErrorCode::kRansacFailure,
                "no hypothesis reached 8 inliers (best " +
                    std::to_string(best_count) + ")");
  }

  RansacResult result;
  result.iterations = iterations;
  std::vector<char> best_mask;
  count_inliers(best_F, corrs, options.threshold, &best_mask);

  std::vector<Correspondence> inliers;
  inliers.reserve(best_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask[i]) inliers.push_back(corrs[i]);
  }
  try {
    const FundamentalMatrix refit = eight_point(inliers);
    std::vector<char> refit_mask;
    const std::size_t refit_count =
        count_inliers(refit.matrix, corrs, options.threshold, &refit_mask);
    if (refit_count >= 8) {
      result.F = refit;
      result.inlier_mask = std::move(refit_mask);
      result.num_inliers = refit_count;
      return result;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
  }
  result.F = FundamentalMatrix{best_F};
  result.inlier_mask = std::move(best_mask);
  result.num_inliers = best_count;
  return result;
}

EpipolarMaps epipolar_residual_maps(const FundamentalMatrix& F,
                                    const FlowField& flow_ab) {
  const int w = flow_ab.width();
  const int h = flow_ab.height();
  EpipolarMaps maps{ScoreMap(w, h), ScoreMap(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d line = F.matrix * Eigen::Vector3d(x, y, 1.0);
      const double norm = line.head<2>().norm();
      if (!(norm >= 1e-12)) {
        maps.distance(x, y) = kEpipolarDistanceCap;
        maps.inlier_score(x, y) = 0.0;
        continue;
      }
      const Eigen::Vector2d& f = flow_ab(x, y);
      const Eigen::Vector3d target(x + f.x(), y + f.y(), 1.0);
      const double d = std::abs(target.dot(line)) / norm;
      maps.distance(x, y) = d;
      maps.inlier_score(x, y) = d < 0.5 ? 1.0 / (1.0 + d) : 0.0;
    }
  }
  return maps;
}

Eigen::Matrix3d essential_from_fundamental(const FundamentalMatrix& F,
                                           const CameraIntrinsics& K) {
  const Eigen::Matrix3d Km = K.matrix();
  return Km.transpose() * F.matrix * Km;
}

FundamentalMatrix fundamental_from_pose(const RigidPose& pose_ab,
                                        const CameraIntrinsics& K) {
  const Eigen::Matrix3d K_inv = K.inverse_matrix();
  Eigen::Matrix3d F =
      K_inv.transpose() * skew(pose_ab.translation) * pose_ab.rotation * K_inv;
  F /= F.norm();
  return FundamentalMatrix{F};
}

std::array<RigidPose, 4> decompose_essential(const Eigen::Matrix3d& E) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  if (U.determinant() < 0.0) U = -U;
  if (V.determinant() < 0.0) V = -V;
  Eigen::Matrix3d W;
  W << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  // Singular values are implicitly forced to (1, 1, 0).
  const Eigen::Matrix3d R1 = U * W * V.transpose();
  const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
  const Eigen::Vector3d t = U.col(2).normalized();

  std::array<RigidPose, 4> out;
  out[0].rotation = R1;
  out[0].translation = t;
  out[1].rotation = R1;
  out[1].translation = -t;
  out[2].rotation = R2;
  out[2].translation = t;
  out[3].rotation = R2;
  out[3].translation = -t;
  return out;
}

PoseHypothesis decompose_and_select(const FundamentalMatrix& F,
                                    const CameraIntrinsics& K,
                                    const CorrespondenceSet& corrs,
                                    const CheiralityOptions& options) {
  if (corrs.empty()) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "cheirality test needs correspondences");
  }
  const std::array<RigidPose, 4> candidates =
      decompose_essential(essential_from_fundamental(F, K));

  std::array<std::size_t, 4> support{};
  std::array<std::vector<char>, 4> masks;
  for (int k = 0; k < 4; ++k) {
    masks[k].assign(corrs.size(), 0);
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      const auto [r1, r2] =
          correspondence_rays(corrs[i].p_a, corrs[i].p_b, candidates[k], K);
      const auto sol = solve_midpoint(r1, r2);
      if (!sol) continue;
      const double za = sol->point.z();
      const double zb = (candidates[k] * sol->point).z();
      if (za > 0.0 && zb > 0.0 && za <= options.max_depth &&
          zb <= options.max_depth) {
        masks[k][i] = 1;
        ++support[k];
      }
    }
  }

  int best = 0;
  for (int k = 1; k < 4; ++k) {
    if (support[k] > support[best]) best = k;
  }
  std::size_t runner_up = 0;
  for (int k = 0; k < 4; ++k) {
    if (k != best) runner_up = std::max(runner_up, support[k]);
  }
  const double margin = static_cast<double>(support[best] - runner_up);
  if (margin <= options.ambiguity_ratio * static_cast<double>(support[best])) {
    throw Error(ErrorCode::kCheiralityAmbiguity,
                "best candidate support " + std::to_string(support[best]) +
                    " vs runner-up " + std::to_string(runner_up));
  }

  PoseHypothesis hyp;
  hyp.pose = candidates[best];
  hyp.pose.translation.normalize();
  hyp.support = support[best];
  hyp.inlier_mask = std::move(masks[best]);
  return hyp;
}

PoseRecovery recover_pose(const FlowField& flow_ab, const FlowField& flow_ba,
                          const CameraIntrinsics& K,
                          const PoseRecoveryOptions& options) {
  if (!flow_ab.same_shape(flow_ba)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "forward and backward flows differ in size");
  }
  PoseRecovery out;
  ForwardBackwardScore fb = fb_distance_and_score(flow_ab, flow_ba);
  out.fb_distance = std::move(fb.distance);
  out.fb_score = std::move(fb.score);
  out.occlusion = occlusion_mask(flow_ba, options.occlusion_threshold);
  out.samples =
      sample_correspondences(flow_ab, out.fb_score, out.occlusion,
                             options.top_frac, options.num_samples,
                             options.seed, "pose");

  RansacOptions ransac = options.ransac;
  ransac.seed = options.seed;
  RansacResult rr = ransac_fundamental(out.samples, ransac);
  out.F = rr.F;
  out.ransac_inliers = std::move(rr.inlier_mask);

  EpipolarMaps maps = epipolar_residual_maps(out.F, flow_ab);
  out.epipolar_distance = std::move(maps.distance);
  out.inlier_score = std::move(maps.inlier_score);

  CorrespondenceSet inliers;
  inliers.width = out.samples.width;
  inliers.height = out.samples.height;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    if (out.ransac_inliers[i]) {
      inliers.items.push_back(out.samples[i]);
      index.push_back(i);
    }
  }
  PoseHypothesis hyp = decompose_and_select(out.F, K, inliers, options.cheirality);
  std::vector<char> full_mask(out.samples.size(), 0);
  for (std::size_t j = 0; j < index.size(); ++j) {
    full_mask[index[j]] = hyp.inlier_mask[j];
  }
  hyp.inlier_mask = std::move(full_mask);
  out.hypothesis = std::move(hyp);
  return out;
}

}  // namespace flowpose
