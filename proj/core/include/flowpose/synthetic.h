#ifndef FLOWPOSE_SYNTHETIC_H_
#define FLOWPOSE_SYNTHETIC_H_

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "flowpose/camera.h"
#include "flowpose/flow.h"
#include "flowpose/grid.h"
#include "flowpose/pose.h"
#include "flowpose/trajectory.h"

namespace flowpose {

// Two-view point scene. Points are uniform over image A pixels and the depth
// range, kept only when they also project into image B.
struct SparseSceneOptions {
  std::uint64_t seed = 0;
  std::size_t n_points = 100;
  double min_depth = 2.0;
  double max_depth = 10.0;
  double baseline = 1.0;   // ||t_ab||
  double rotation = 0.1;   // rotation angle of R_ab, radians
  double outlier_frac = 0.0;
  double noise_px = 0.0;   // Gaussian sigma on p_b
  CameraIntrinsics K{500.0, 500.0, 320.0, 240.0, 640, 480};
};

struct SparseScene {
  std::uint64_t seed = 0;
  CameraIntrinsics K;
  RigidPose pose_ab;
  std::vector<Eigen::Vector3d> points;  // camera-A frame
  CorrespondenceSet exact;
  CorrespondenceSet observed;  // noise and outliers applied
  std::vector<char> is_outlier;
};

// Throws kInfeasibleFrustum when a point cannot be placed in 1000 draws.
SparseScene generate_scene(const SparseSceneOptions& options);

// z = z0 + sum a sin(kx x + ky y + phase) in world coordinates.
struct Bump {
  double amplitude = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
};

struct HeightField {
  double z0 = 10.0;
  std::vector<Bump> bumps;

  double operator()(double x, double y) const;
  Eigen::Vector2d gradient(double x, double y) const;
  double max_deviation() const;
};

// Fronto-parallel rectangle at depth z in front of the surface, translated
// by `velocity` per frame index.
struct MovingObject {
  double z = 5.0;
  double x0 = -0.5, x1 = 0.5, y0 = -0.5, y1 = 0.5;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

enum class TextureKind { kSinusoidal, kLinear };

struct DenseScene {
  std::uint64_t seed = 0;
  CameraIntrinsics K;
  HeightField surface;
  std::vector<RigidPose> cameras;  // camera-to-world; cameras[0] = identity
  std::optional<MovingObject> object;
  TextureKind texture = TextureKind::kSinusoidal;
  std::vector<Bump> texture_waves;
};

struct DenseSceneOptions {
  std::uint64_t seed = 0;
  int width = 64;
  int height = 48;
  double focal = 64.0;
  double z0 = 8.0;
  int num_bumps = 3;
  double bump_amplitude = 1.5;
  double baseline = 0.8;
  double rotation = 0.05;
  bool moving_object = false;
  TextureKind texture = TextureKind::kSinusoidal;
};

// Two cameras looking at a bumpy height field.
DenseScene generate_dense_scene(const DenseSceneOptions& options);

struct SequenceSceneOptions {
  std::uint64_t seed = 0;
  std::size_t frames = 50;
  int width = 320;
  int height = 240;
  double focal = 300.0;
  double z0 = 12.0;
  double step = 0.4;  // forward progress along x per frame
};

// Mostly lateral camera path in front of a bumpy wall.
DenseScene generate_sequence_scene(const SequenceSceneOptions& options);

// Camera-frame depth of the first surface hit along the pixel's ray at the
// given frame, or nullopt when nothing is hit.
struct RayHit {
  double depth = 0.0;
  Eigen::Vector3d world = Eigen::Vector3d::Zero();  // at the frame's time
  bool on_object = false;
};
std::optional<RayHit> cast_ray(const DenseScene& scene, std::size_t frame,
                               const Eigen::Vector2d& pixel);

struct RenderOptions {
  double noise_px = 0.0;      // Gaussian sigma added to both flows
  double outlier_frac = 0.0;  // fraction of pixels given random targets
  std::uint64_t seed = 0;
};

struct DenseObservations {
  FlowField flow_fwd;  // i -> j
  FlowField flow_bwd;  // j -> i
  DepthMap depth_i;
  DepthMap depth_j;
  ScoreMap occlusion;      // 1 where a pixel of i is visible in j
  ScoreMap occlusion_bwd;  // 1 where a pixel of j is visible in i
  Mask object_mask;        // pixels of i on the moving object
  Image image_i;
  Image image_j;
  RigidPose pose_ij;  // camera-i points into camera j
};

// Per-pixel ray-cast results of one frame, reusable across pairs.
struct FrameRender {
  std::size_t frame = 0;
  DepthMap depth;
  std::vector<Eigen::Vector3d> world;  // hit points at the frame's time
  Mask on_object;
  Image image;  // empty unless requested
};

FrameRender render_frame(const DenseScene& scene, std::size_t frame,
                         bool with_image = true);

// Exact flows from the ray-cast surface; noise and outliers only afterwards.
// A pixel is visible in the other frame when its target lies in the
// bilinear domain and the target frame's depth there agrees within 1e-3
// relative.
DenseObservations render_observations(const DenseScene& scene,
                                      const FrameRender& fi,
                                      const FrameRender& fj,
                                      const RenderOptions& options = {});
DenseObservations render_observations(const DenseScene& scene, std::size_t i,
                                      std::size_t j,
                                      const RenderOptions& options = {});

DepthMap render_depth(const DenseScene& scene, std::size_t frame);
Image render_image(const DenseScene& scene, std::size_t frame);

// Relative pose mapping camera-i points into camera j.
RigidPose relative_pose(const DenseScene& scene, std::size_t i, std::size_t j);

Trajectory groundtruth_trajectory(const DenseScene& scene);

}  // namespace flowpose

#endif  // FLOWPOSE_SYNTHETIC_H_
