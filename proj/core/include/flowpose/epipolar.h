#ifndef FLOWPOSE_EPIPOLAR_H_
#define FLOWPOSE_EPIPOLAR_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flowpose/camera.h"
#include "flowpose/flow.h"
#include "flowpose/pose.h"

namespace flowpose {

// Pixel-space fundamental matrix with p_b^T F p_a = 0, rank 2 and unit
// Frobenius norm.
struct FundamentalMatrix {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Zero();
};

// Relative threshold on the two smallest singular values of the stacked
// constraint matrix below which the solution is considered non-unique.
inline constexpr double kEightPointDegeneracyTolerance = 1e-10;

// Hartley-normalized 8-point estimate from >= 8 correspondences. Throws
// kInsufficientCorrespondences or kDegenerateConfiguration.
FundamentalMatrix eight_point(std::span<const Correspondence> corrs);
inline FundamentalMatrix eight_point(const CorrespondenceSet& corrs) {
  return eight_point(std::span<const Correspondence>(corrs.items));
}

// max(distance of p_b to F p_a, distance of p_a to F^T p_b), in pixels.
double symmetric_epipolar_distance(const Eigen::Matrix3d& F,
                                   const Eigen::Vector2d& p_a,
                                   const Eigen::Vector2d& p_b);

struct RansacOptions {
  double threshold = 0.1;   // pixels, symmetric epipolar distance
  double confidence = 0.99;
  int max_iters = 2000;
  std::uint64_t seed = 0;
};

struct RansacResult {
  FundamentalMatrix F;
  std::vector<char> inlier_mask;
  std::size_t num_inliers = 0;
  int iterations = 0;
};

// Hypothesize-and-verify over 8-point minimal samples with adaptive
// termination and a final least-squares refit on the best inlier set.
// Throws kRansacFailure when no hypothesis reaches 8 inliers.
RansacResult ransac_fundamental(const CorrespondenceSet& corrs,
                                const RansacOptions& options);

inline constexpr double kEpipolarDistanceCap = 1e3;

struct EpipolarMaps {
  ScoreMap distance;      // D_epi
  ScoreMap inlier_score;  // M_r = [D_epi < 0.5] / (1 + D_epi)
};

// Distance of every p + F_ab(p) to the epipolar line F h(p). Degenerate
// lines get the cap distance and zero score.
EpipolarMaps epipolar_residual_maps(const FundamentalMatrix& F,
                                    const FlowField& flow_ab);

Eigen::Matrix3d essential_from_fundamental(const FundamentalMatrix& F,
                                           const CameraIntrinsics& K);
FundamentalMatrix fundamental_from_pose(const RigidPose& pose_ab,
                                        const CameraIntrinsics& K);

// The four (R, t) factorizations of E with unit t, ordered
// (R1, t), (R1, -t), (R2, t), (R2, -t).
std::array<RigidPose, 4> decompose_essential(const Eigen::Matrix3d& E);

struct PoseHypothesis {
  RigidPose pose;  // ||t|| = 1
  std::size_t support = 0;
  std::vector<char> inlier_mask;  // passes cheirality, per correspondence
};

struct CheiralityOptions {
  double max_depth = 1e4;
  // Top two supports within this fraction of the best are ambiguous.
  double ambiguity_ratio = 0.05;
};

// Decomposes E = K^T F K and picks the candidate with the most
// correspondences triangulating in front of both cameras.
PoseHypothesis decompose_and_select(const FundamentalMatrix& F,
                                    const CameraIntrinsics& K,
                                    const CorrespondenceSet& corrs,
                                    const CheiralityOptions& options = {});

struct PoseRecoveryOptions {
  double top_frac = 0.2;
  std::size_t num_samples = 6000;
  double occlusion_threshold = kOcclusionMassThreshold;
  RansacOptions ransac;
  CheiralityOptions cheirality;
  std::uint64_t seed = 0;
};

struct PoseRecovery {
  PoseHypothesis hypothesis;
  FundamentalMatrix F;
  CorrespondenceSet samples;
  std::vector<char> ransac_inliers;
  ScoreMap fb_distance;
  ScoreMap fb_score;            // M_s
  ScoreMap occlusion;           // M_o
  ScoreMap epipolar_distance;   // D_epi
  ScoreMap inlier_score;        // M_r
};

// Full flow-to-pose chain: forward-backward score and occlusion, top-fraction
// sampling, RANSAC, residual maps, decomposition with cheirality.
PoseRecovery recover_pose(const FlowField& flow_ab, const FlowField& flow_ba,
                          const CameraIntrinsics& K,
                          const PoseRecoveryOptions& options = {});

}  // namespace flowpose

#endif  // FLOWPOSE_EPIPOLAR_H_
