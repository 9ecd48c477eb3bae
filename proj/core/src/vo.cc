#include "flowpose/vo.h"

#include "flowpose/error.h"
#include "flowpose/flow.h"
#include "flowpose/losses.h"

namespace flowpose {

const char* pair_method_name(PairMethod m) {
  switch (m) {
    case PairMethod::kEpipolar:
      return "epipolar";
    case PairMethod::kPnp:
      return "pnp";
    case PairMethod::kExtrapolated:
      return "extrapolated";
  }
  return "unknown";
}

PairGeometry pair_geometry(const FlowField& flow_ab, const FlowField& flow_ba,
                           const CameraIntrinsics& K, const VoOptions& options) {
  PoseRecoveryOptions pose_opts = options.pose;
  pose_opts.seed = options.seed;
  PairGeometry out;
  out.recovery = recover_pose(flow_ab, flow_ba, K, pose_opts);
  const PoseRecovery& rec = out.recovery;

  ScoreMap score(flow_ab.width(), flow_ab.height());
  ScoreMap mask(flow_ab.width(), flow_ab.height());
  for (std::size_t i = 0; i < score.size(); ++i) {
    score[i] = rec.inlier_score[i] * rec.fb_score[i];
    mask[i] = rec.occlusion[i] * rec.inlier_score[i];
  }
  out.tri_samples =
      sample_correspondences(flow_ab, score, mask, pose_opts.top_frac,
                             pose_opts.num_samples, options.seed, "tri");
  out.triangulated = midpoint_triangulate(
      out.tri_samples, rec.hypothesis.pose, K, options.triangulation);
  return out;
}

LossInputs make_loss_inputs(const PairGeometry& geometry, const Image& image_a,
                            const Image& image_b, const FlowField& flow_ab,
                            const DepthMap& depth_a, const DepthMap& depth_b,
                            const CameraIntrinsics& K) {
  LossInputs in;
  in.image_a = image_a;
  in.image_b = image_b;
  in.flow_ab = flow_ab;
  in.depth_a = depth_a;
  in.depth_b = depth_b;
  in.pose_ab = geometry.recovery.hypothesis.pose;
  in.K = K;
  in.occlusion = geometry.recovery.occlusion;
  in.inlier_score = geometry.recovery.inlier_score;
  in.epipolar_distance = geometry.recovery.epipolar_distance;
  in.tri = geometry.triangulated;
  return in;
}

PairEstimate pair_pose_scaled(const FlowField& flow_ab, const FlowField& flow_ba,
                              const DepthMap& depth_a, const CameraIntrinsics& K,
                              const VoOptions& options) {
  if (!flow_ab.same_shape(depth_a)) {
    throw Error(ErrorCode::kDimensionMismatch, "flow and depth differ in size");
  }
  const PairGeometry geo = pair_geometry(flow_ab, flow_ba, K, options);
  const PoseRecovery& rec = geo.recovery;
  const TriangulatedSet& tri = geo.triangulated;

  std::vector<double> pred, triangulated;
  for (const auto& s : tri.samples) {
    if (!s.valid()) continue;
    const auto d = sample_depth(depth_a, s.p_a.x(), s.p_a.y());
    if (!d) continue;
    pred.push_back(*d);
    triangulated.push_back(s.depth_a);
  }
  if (pred.size() < kMinScaleSamples) {
    throw Error(ErrorCode::kScaleFitFailure,
                "only " + std::to_string(pred.size()) +
                    " valid triangulated samples for the scale fit");
  }

  PairEstimate out;
  out.method = PairMethod::kEpipolar;
  out.scale = fit_scale(pred, triangulated);
  out.pose = rec.hypothesis.pose;
  out.pose.translation /= out.scale;
  out.ransac_inliers = rec.hypothesis.support;
  out.triangulated_valid = pred.size();
  out.mean_flow = mean_flow_magnitude(flow_ab);
  return out;
}

PairEstimate pnp_pose(const DepthMap& depth_a, const FlowField& flow_ab,
                      const CameraIntrinsics& K, const VoOptions& options) {
  if (!flow_ab.same_shape(depth_a)) {
    throw Error(ErrorCode::kDimensionMismatch, "flow and depth differ in size");
  }
  ScoreMap usable(depth_a.width(), depth_a.height(), 0.0);
  for (int y = 0; y < depth_a.height(); ++y) {
    for (int x = 0; x < depth_a.width(); ++x) {
      usable(x, y) = depth_a.is_valid(x, y) ? 1.0 : 0.0;
    }
  }
  CorrespondenceSet samples;
  try {
    samples = sample_correspondences(flow_ab, usable, usable, 1.0,
                                     options.pnp_samples, options.seed, "pnp");
  } catch (const Error& e) {
    throw Error(ErrorCode::kPnpFailure, e.what());
  }
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector2d> pixels;
  points.reserve(samples.size());
  pixels.reserve(samples.size());
  for (const auto& c : samples.items) {
    points.push_back(unproject(c.p_a, depth_a(static_cast<int>(c.p_a.x()),
                                              static_cast<int>(c.p_a.y())),
                               K));
    pixels.push_back(c.p_b);
  }
  PnpOptions pnp = options.pnp;
  pnp.seed = options.seed;
  const PnpResult res = pnp_ransac(points, pixels, K, pnp);

  PairEstimate out;
  out.method = PairMethod::kPnp;
  out.pose = res.pose;
  out.pnp_inliers = res.num_inliers;
  out.mean_flow = mean_flow_magnitude(flow_ab);
  return out;
}

SequenceResult run_sequence(std::size_t num_frames, const FrameLoader& load,
                            const CameraIntrinsics& K,
                            const VoOptions& options) {
  if (num_frames < 2) {
    throw Error(ErrorCode::kInvalidArgument, "a sequence needs >= 2 frames");
  }
  SequenceResult out;
  RigidPose global = RigidPose::identity();
  RigidPose last_relative = RigidPose::identity();
  FrameData frame = load(0);
  out.trajectory.push_back(frame.timestamp, global);
  for (std::size_t k = 0; k + 1 < num_frames; ++k) {
    FrameData next = load(k + 1);
    VoOptions pair_opts = options;
    pair_opts.seed = options.seed + k;
    PairEstimate est;
    try {
      const double mean_flow = mean_flow_magnitude(frame.flow_fwd);
      if (mean_flow < options.min_flow_px) {
        est = pnp_pose(frame.depth, frame.flow_fwd, K, pair_opts);
      } else {
        est = pair_pose_scaled(frame.flow_fwd, frame.flow_bwd, frame.depth, K,
                               pair_opts);
      }
      est.mean_flow = mean_flow;
    } catch (const Error& e) {
      est = PairEstimate{};
      est.pose = last_relative;
      est.method = PairMethod::kExtrapolated;
      est.flagged = true;
      est.failure = e.what();
    }
    last_relative = est.pose;
    global = reorthonormalized(compose(global, invert(est.pose)));
    out.trajectory.push_back(next.timestamp, global);
    out.pairs.push_back(std::move(est));
    frame = std::move(next);
  }
  out.trajectory.validate();
  return out;
}

SequenceResult run_sequence(const std::vector<FrameData>& frames,
                            const CameraIntrinsics& K,
                            const VoOptions& options) {
  return run_sequence(
      frames.size(), [&](std::size_t i) { return frames[i]; }, K, options);
}

}  // namespace flowpose
