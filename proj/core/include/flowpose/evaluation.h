#ifndef FLOWPOSE_EVALUATION_H_
#define FLOWPOSE_EVALUATION_H_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "flowpose/grid.h"
#include "flowpose/pose.h"
#include "flowpose/trajectory.h"

namespace flowpose {

struct Sim3Transform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const {
    return scale * (rotation * x) + translation;
  }
  // Moves a camera-to-world pose into the target frame.
  RigidPose apply(const RigidPose& pose) const;
};

// Closed-form least-squares similarity (or rigid motion when with_scale is
// false) taking src onto dst. Throws kInsufficientPoints below 3 pairs and
// kDegenerateGeometry when the points are collinear.
Sim3Transform umeyama(std::span<const Eigen::Vector3d> src,
                      std::span<const Eigen::Vector3d> dst,
                      bool with_scale = true);

enum class Association { kIndex, kTimestamp };

inline constexpr double kMaxAssociationGap = 0.02;

// (estimated index, groundtruth index) pairs. kTimestamp picks the nearest
// groundtruth stamp within max_gap seconds.
std::vector<std::pair<std::size_t, std::size_t>> associate(
    const Trajectory& estimated, const Trajectory& groundtruth,
    Association mode = Association::kIndex,
    double max_gap = kMaxAssociationGap);

struct Alignment {
  Sim3Transform transform;
  Trajectory aligned;  // every estimated pose, moved by transform
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  double rmse = 0.0;
};

Alignment sim3_align(const Trajectory& estimated, const Trajectory& groundtruth,
                     Association mode = Association::kIndex,
                     bool with_scale = true);

double ate_rmse(const Trajectory& estimated, const Trajectory& groundtruth,
                Association mode = Association::kIndex, bool with_scale = true);

struct OdometryErrors {
  double t_err = 0.0;  // percent
  double r_err = 0.0;  // degrees per 100 m
  std::size_t segments = 0;
};

struct OdometryOptions {
  std::vector<double> lengths = {100, 200, 300, 400, 500, 600, 700, 800};
  std::size_t step = 1;
};

// Relative-motion errors over every (start frame, length) segment whose
// groundtruth path length reaches the length. Trajectories correspond by
// index. Throws kSequenceTooShort when no segment exists.
OdometryErrors kitti_odometry_errors(const Trajectory& estimated,
                                     const Trajectory& groundtruth,
                                     const OdometryOptions& options = {});

struct DepthMetricOptions {
  double min_depth = 1e-3;
  double cap = 80.0;
  bool median_scaling = true;
};

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rms = 0.0;
  double rms_log = 0.0;
  double a1 = 0.0;  // max(p/g, g/p) < 1.25
  double a2 = 0.0;  // < 1.25^2
  double a3 = 0.0;  // < 1.25^3
  double scale = 1.0;
  std::size_t count = 0;
};

// Evaluated on pixels where gt is in (min_depth, cap] and pred is valid.
// pred is median-scaled (optional) and then clamped to [min_depth, cap].
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                           const DepthMetricOptions& options = {});

struct FlowMetrics {
  double epe_all = 0.0;
  double epe_noc = 0.0;
  double fl = 0.0;  // fraction of valid pixels
  std::size_t count_all = 0;
  std::size_t count_noc = 0;
};

// An empty noc mask means "same as valid".
FlowMetrics flow_metrics(const FlowField& pred, const FlowField& gt,
                         const Mask& valid, const Mask& noc = {});

struct Metric {
  std::string name;
  std::string unit;
  double value = 0.0;
};
using MetricReport = std::vector<Metric>;

MetricReport to_report(const OdometryErrors& e);
MetricReport to_report(const DepthMetrics& m);
MetricReport to_report(const FlowMetrics& m);

std::string format_csv(const MetricReport& report);
std::string format_table(const MetricReport& report);

}  // namespace flowpose

#endif  // FLOWPOSE_EVALUATION_H_
