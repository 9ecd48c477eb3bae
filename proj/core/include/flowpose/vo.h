#ifndef FLOWPOSE_VO_H_
#define FLOWPOSE_VO_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flowpose/camera.h"
#include "flowpose/epipolar.h"
#include "flowpose/grid.h"
#include "flowpose/losses.h"
#include "flowpose/pnp.h"
#include "flowpose/pose.h"
#include "flowpose/trajectory.h"
#include "flowpose/triangulation.h"

namespace flowpose {

enum class PairMethod { kEpipolar, kPnp, kExtrapolated };

const char* pair_method_name(PairMethod m);

struct PairEstimate {
  RigidPose pose;  // T_ab at the depth map's scale
  PairMethod method = PairMethod::kEpipolar;
  // s with s * D_pred ~ D_tri; the unit translation is divided by it.
  double scale = 1.0;
  std::size_t ransac_inliers = 0;
  std::size_t triangulated_valid = 0;
  std::size_t pnp_inliers = 0;
  double mean_flow = 0.0;
  bool flagged = false;
  std::string failure;
};

inline constexpr std::size_t kMinScaleSamples = 20;

struct VoOptions {
  PoseRecoveryOptions pose;
  TriangulationOptions triangulation;
  PnpOptions pnp;
  double min_flow_px = 2.0;
  std::size_t pnp_samples = 6000;
  std::uint64_t seed = 0;
};

// Epipolar pose plus the triangulation that supervises depth: samples are
// re-drawn with M_r * M_s scores inside M_o * M_r and triangulated with the
// unit-translation pose.
struct PairGeometry {
  PoseRecovery recovery;
  CorrespondenceSet tri_samples;
  TriangulatedSet triangulated;
};

PairGeometry pair_geometry(const FlowField& flow_ab, const FlowField& flow_ba,
                           const CameraIntrinsics& K,
                           const VoOptions& options = {});

// Bundles a pair's geometry with images and depth predictions for
// total_loss.
LossInputs make_loss_inputs(const PairGeometry& geometry, const Image& image_a,
                            const Image& image_b, const FlowField& flow_ab,
                            const DepthMap& depth_a, const DepthMap& depth_b,
                            const CameraIntrinsics& K);

// Epipolar pose, then triangulation of samples re-drawn with M_r * M_s
// scores inside M_o * M_r, then t <- t / s with s fitted between the
// monocular depth and the triangulated depth. Throws kScaleFitFailure with
// fewer than 20 valid triangulated samples.
PairEstimate pair_pose_scaled(const FlowField& flow_ab, const FlowField& flow_ba,
                              const DepthMap& depth_a, const CameraIntrinsics& K,
                              const VoOptions& options = {});

// Metric pose from depth_a lifted points and their flow targets.
PairEstimate pnp_pose(const DepthMap& depth_a, const FlowField& flow_ab,
                      const CameraIntrinsics& K, const VoOptions& options = {});

// Frame k carries the flows k -> k+1 and k+1 -> k (ignored on the last
// frame) and the depth of frame k.
struct FrameData {
  FlowField flow_fwd;
  FlowField flow_bwd;
  DepthMap depth;
  double timestamp = 0.0;
};

struct SequenceResult {
  Trajectory trajectory;
  std::vector<PairEstimate> pairs;
};

using FrameLoader = std::function<FrameData(std::size_t)>;

// Pair k uses PnP when the mean in-image flow magnitude of frame k is below
// min_flow_px and the epipolar chain otherwise. A pair that throws repeats
// the previous relative motion and is flagged. Pair seeds are
// options.seed + k.
SequenceResult run_sequence(std::size_t num_frames, const FrameLoader& load,
                            const CameraIntrinsics& K,
                            const VoOptions& options = {});
SequenceResult run_sequence(const std::vector<FrameData>& frames,
                            const CameraIntrinsics& K,
                            const VoOptions& options = {});

}  // namespace flowpose

#endif  // FLOWPOSE_VO_H_
