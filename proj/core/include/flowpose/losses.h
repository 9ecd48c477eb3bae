#ifndef FLOWPOSE_LOSSES_H_
#define FLOWPOSE_LOSSES_H_

#include <cstddef>
#include <span>

#include "flowpose/camera.h"
#include "flowpose/grid.h"
#include "flowpose/pose.h"
#include "flowpose/triangulation.h"

namespace flowpose {

inline constexpr double kPhotometricAlpha = 0.85;
inline constexpr double kFlowSmoothnessBeta = 0.1;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

struct LossWeights {
  double w1 = 1.0;   // photometric flow loss
  double w2 = 1.0;   // triangulation depth loss
  double w3 = 1.0;   // reprojection losses
  double w4 = 0.1;   // depth smoothness
  double w31 = 1.0;  // flow reprojection
  double w32 = 1.0;  // depth reprojection

  // Throws kInvalidArgument on negative or non-finite weights.
  void validate() const;
};

struct LossReport {
  double flow = 0.0;                 // L_f
  double depth = 0.0;                // L_d
  double flow_reprojection = 0.0;    // L_pf
  double depth_reprojection = 0.0;   // L_pd
  double smoothness = 0.0;           // L_s
  double total = 0.0;
  double scale = 1.0;
  std::size_t depth_samples = 0;
  std::size_t flow_reprojection_pixels = 0;
  std::size_t depth_reprojection_pixels = 0;
  std::size_t photometric_pixels = 0;
};

// argmin_s mean(((D_tri - s D) / D_tri)^2) = sum(r) / sum(r^2), r = D / D_tri.
double fit_scale(std::span<const double> depth_pred,
                 std::span<const double> depth_tri);

struct DepthLoss {
  double value = 0.0;
  double scale = 1.0;
  std::size_t count = 0;
};

// Pairs every valid triangulated sample with the predicted depth at its p_a.
DepthLoss depth_loss(const DepthMap& depth_pred, const TriangulatedSet& tri);

// dL_d / dD(p) at the fitted scale (the scale is stationary, so it drops out).
ScoreMap depth_loss_gradient(const DepthMap& depth_pred,
                             const TriangulatedSet& tri);

struct RigidFlow {
  FlowField flow;
  Mask valid;
  ScoreMap depth_b;  // z of the transformed point, 0 where invalid
};

RigidFlow rigid_flow(const DepthMap& depth_a, const RigidPose& pose_ab,
                     const CameraIntrinsics& K);

struct ReprojectionLoss {
  double value = 0.0;
  std::size_t count = 0;
};

ReprojectionLoss flow_reprojection_loss(const FlowField& flow_ab,
                                        const DepthMap& depth_a,
                                        const RigidPose& pose_ab,
                                        const CameraIntrinsics& K,
                                        const ScoreMap& inlier_score,
                                        const ScoreMap& epipolar_distance);

// dL_pf / dD_a(p). The |D_epi| term does not depend on depth.
ScoreMap flow_reprojection_loss_gradient(const FlowField& flow_ab,
                                         const DepthMap& depth_a,
                                         const RigidPose& pose_ab,
                                         const CameraIntrinsics& K,
                                         const ScoreMap& inlier_score,
                                         const ScoreMap& epipolar_distance);

ReprojectionLoss depth_reprojection_loss(const DepthMap& depth_a,
                                         const DepthMap& depth_b,
                                         const RigidPose& pose_ab,
                                         const CameraIntrinsics& K,
                                         const ScoreMap& occlusion,
                                         const ScoreMap& inlier_score);

// Edge-aware smoothness of the mean-normalized disparity.
double smoothness_loss(const ScoreMap& disparity, const Image& image);

// Per-pixel SSIM over a 3x3 window clipped at the border, averaged over
// channels. With a mask the window also skips pixels where it is 0.
ScoreMap ssim(const Image& x, const Image& y, const Mask* valid = nullptr);

// Backward warp of image_b into frame a. Pixels whose target leaves the
// bilinear domain are zero and flagged invalid.
Image warp_image(const Image& image_b, const FlowField& flow_ab, Mask* valid);

ReprojectionLoss flow_photometric_loss(const Image& image_a,
                                       const Image& image_b,
                                       const FlowField& flow_ab,
                                       const ScoreMap& occlusion);

struct LossInputs {
  Image image_a;
  Image image_b;
  FlowField flow_ab;
  DepthMap depth_a;  // raw network prediction
  DepthMap depth_b;
  RigidPose pose_ab;  // the pose the triangulation was run with
  CameraIntrinsics K;
  ScoreMap occlusion;          // M_o
  ScoreMap inlier_score;       // M_r
  ScoreMap epipolar_distance;  // D_epi
  TriangulatedSet tri;
};

// Fits s with the depth loss, rescales both depth maps by s for the
// reprojection terms, and combines every term with the given weights.
LossReport total_loss(const LossInputs& in, const LossWeights& weights = {});

// D = 1 / (a + b sigma) with a = 1/max_depth and b = 1/min_depth -
// 1/max_depth, so sigma in [0, 1] maps onto [min_depth, max_depth].
double disparity_to_depth(double sigma, double min_depth = 0.1,
                          double max_depth = 100.0);

}  // namespace flowpose

#endif  // FLOWPOSE_LOSSES_H_
