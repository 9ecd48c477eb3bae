#include "flowpose/evaluation.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "flowpose/error.h"

namespace flowpose {
namespace {

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + n / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fixed6(double v) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

}  // namespace

RigidPose Sim3Transform::apply(const RigidPose& pose) const {
  RigidPose out;
  out.rotation = rotation * pose.rotation;
  out.translation = *this * pose.translation;
  return out;
}

Sim3Transform umeyama(std::span<const Eigen::Vector3d> src,
                      std::span<const Eigen::Vector3d> dst, bool with_scale) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "point sets differ in size");
  }
  if (src.size() < 3) {
    throw Error(ErrorCode::kInsufficientPoints,
                "alignment needs at least 3 point pairs");
  }
  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d ds = src[i] - mu_s;
    sigma += (dst[i] - mu_d) * ds.transpose();
    var_s += ds.squaredNorm();
  }
  sigma /= n;
  var_s /= n;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma, Eigen::ComputeFullU |
                                                   Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  if (!(d(0) > 0.0) || d(1) < 1e-12 * d(0)) {
    throw Error(ErrorCode::kDegenerateGeometry,
                "positions are collinear; rotation is not determined");
  }
  // Identical sets: the identity is the exact optimum, and the SVD would
  // only add round-off.
  if (std::equal(src.begin(), src.end(), dst.begin())) return Sim3Transform{};
  Eigen::Vector3d s(1.0, 1.0, 1.0);
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
    s(2) = -1.0;
  }
  Sim3Transform out;
  out.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? d.dot(s) / var_s : 1.0;
  out.translation = mu_d - out.scale * (out.rotation * mu_s);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> associate(
    const Trajectory& estimated, const Trajectory& groundtruth,
    Association mode, double max_gap) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (mode == Association::kIndex) {
    const std::size_t n = std::min(estimated.size(), groundtruth.size());
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(i, i);
    return out;
  }
  const auto& gt = groundtruth.timestamps;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const double t = estimated.timestamps[i];
    const auto it = std::lower_bound(gt.begin(), gt.end(), t);
    std::size_t best = gt.size();
    double gap = max_gap;
    if (it != gt.end() && std::abs(*it - t) <= gap) {
      best = static_cast<std::size_t>(it - gt.begin());
      gap = std::abs(*it - t);
    }
    if (it != gt.begin() && std::abs(*(it - 1) - t) <= gap &&
        (best == gt.size() || std::abs(*(it - 1) - t) < gap)) {
      best = static_cast<std::size_t>(it - 1 - gt.begin());
    }
    if (best != gt.size()) out.emplace_back(i, best);
  }
  return out;
}

Alignment sim3_align(const Trajectory& estimated, const Trajectory& groundtruth,
                     Association mode, bool with_scale) {
  Alignment out;
  out.matches = associate(estimated, groundtruth, mode);
  if (out.matches.size() < 3) {
    throw Error(ErrorCode::kInsufficientPoints,
                "fewer than 3 associated poses");
  }
  std::vector<Eigen::Vector3d> src, dst;
  src.reserve(out.matches.size());
  dst.reserve(out.matches.size());
  for (const auto& [i, j] : out.matches) {
    src.push_back(estimated.position(i));
    dst.push_back(groundtruth.position(j));
  }
  out.transform = umeyama(src, dst, with_scale);
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    out.aligned.push_back(estimated.timestamps[i],
                          out.transform.apply(estimated.poses[i]));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < src.size(); ++k) {
    sum += (dst[k] - out.transform * src[k]).squaredNorm();
  }
  out.rmse = std::sqrt(sum / static_cast<double>(src.size()));
  return out;
}

double ate_rmse(const Trajectory& estimated, const Trajectory& groundtruth,
                Association mode, bool with_scale) {
  return sim3_align(estimated, groundtruth, mode, with_scale).rmse;
}

OdometryErrors kitti_odometry_errors(const Trajectory& estimated,
                                     const Trajectory& groundtruth,
                                     const OdometryOptions& options) {
  if (estimated.size() != groundtruth.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "odometry evaluation needs one estimate per groundtruth frame");
  }
  const std::size_t n = groundtruth.size();
  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    dist[i] = dist[i - 1] +
              (groundtruth.position(i) - groundtruth.position(i - 1)).norm();
  }

  double t_sum = 0.0;
  double r_sum = 0.0;
  std::size_t count = 0;
  const std::size_t step = std::max<std::size_t>(1, options.step);
  for (std::size_t first = 0; first < n; first += step) {
    for (double len : options.lengths) {
      std::size_t last = first;
      while (last < n && dist[last] < dist[first] + len) ++last;
      if (last >= n) continue;
      const RigidPose delta_gt = compose(invert(groundtruth.poses[first]),
                                         groundtruth.poses[last]);
      const RigidPose delta_est =
          compose(invert(estimated.poses[first]), estimated.poses[last]);
      const RigidPose err = compose(invert(delta_est), delta_gt);
      t_sum += err.translation.norm() / len;
      r_sum += rotation_error(delta_est.rotation, delta_gt.rotation) / len;
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::kSequenceTooShort,
                "no subsequence reaches the shortest evaluation length");
  }
  OdometryErrors out;
  out.segments = count;
  out.t_err = 100.0 * t_sum / static_cast<double>(count);
  out.r_err = 100.0 * (180.0 / std::numbers::pi) * r_sum /
              static_cast<double>(count);
  return out;
}

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                           const DepthMetricOptions& options) {
  if (!pred.same_shape(gt)) {
    throw Error(ErrorCode::kDimensionMismatch, "depth maps differ in size");
  }
  std::vector<double> p, g;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      const double gv = gt(x, y);
      if (!gt.is_valid(x, y) || !(gv > options.min_depth) ||
          !(gv <= options.cap) || !pred.is_valid(x, y)) {
        continue;
      }
      p.push_back(pred(x, y));
      g.push_back(gv);
    }
  }
  if (p.empty()) {
    throw Error(ErrorCode::kEmptyOverlap, "no pixel valid in both depth maps");
  }
  DepthMetrics m;
  m.count = p.size();
  if (options.median_scaling) m.scale = median(g) / median(p);
  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
  std::size_t a1 = 0, a2 = 0, a3 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pv =
        std::clamp(p[i] * m.scale, options.min_depth, options.cap);
    const double gv = g[i];
    const double diff = pv - gv;
    abs_rel += std::abs(diff) / gv;
    sq_rel += diff * diff / gv;
    sq += diff * diff;
    const double dlog = std::log(pv) - std::log(gv);
    sq_log += dlog * dlog;
    const double ratio = std::max(pv / gv, gv / pv);
    a1 += ratio < 1.25;
    a2 += ratio < 1.25 * 1.25;
    a3 += ratio < 1.25 * 1.25 * 1.25;
  }
  const double n = static_cast<double>(p.size());
  m.abs_rel = abs_rel / n;
  m.sq_rel = sq_rel / n;
  m.rms = std::sqrt(sq / n);
  m.rms_log = std::sqrt(sq_log / n);
  m.a1 = static_cast<double>(a1) / n;
  m.a2 = static_cast<double>(a2) / n;
  m.a3 = static_cast<double>(a3) / n;
  return m;
}

FlowMetrics flow_metrics(const FlowField& pred, const FlowField& gt,
                         const Mask& valid, const Mask& noc) {
  if (!pred.same_shape(gt) || !pred.same_shape(valid) ||
      (!noc.empty() && !pred.same_shape(noc))) {
    throw Error(ErrorCode::kDimensionMismatch, "flow inputs differ in size");
  }
  FlowMetrics m;
  double sum_all = 0.0, sum_noc = 0.0;
  std::size_t outliers = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!valid(x, y)) continue;
      const double epe = (pred(x, y) - gt(x, y)).norm();
      sum_all += epe;
      ++m.count_all;
      if (epe > 3.0 && epe > 0.05 * gt(x, y).norm()) ++outliers;
      if (noc.empty() || noc(x, y)) {
        sum_noc += epe;
        ++m.count_noc;
      }
    }
  }
  if (m.count_all == 0 || m.count_noc == 0) {
    throw Error(ErrorCode::kEmptyOverlap, "no valid flow pixel");
  }
  m.epe_all = sum_all / static_cast<double>(m.count_all);
  m.epe_noc = sum_noc / static_cast<double>(m.count_noc);
  m.fl = static_cast<double>(outliers) / static_cast<double>(m.count_all);
  return m;
}

MetricReport to_report(const OdometryErrors& e) {
  return {{"t_err", "%", e.t_err},
          {"r_err", "deg/100m", e.r_err},
          {"segments", "count", static_cast<double>(e.segments)}};
}

MetricReport to_report(const DepthMetrics& m) {
  return {{"abs_rel", "", m.abs_rel},  {"sq_rel", "m", m.sq_rel},
          {"rms", "m", m.rms},         {"rms_log", "", m.rms_log},
          {"a1", "fraction", m.a1},    {"a2", "fraction", m.a2},
          {"a3", "fraction", m.a3},    {"scale", "", m.scale},
          {"count", "px", static_cast<double>(m.count)}};
}

MetricReport to_report(const FlowMetrics& m) {
  return {{"epe_all", "px", m.epe_all},
          {"epe_noc", "px", m.epe_noc},
          {"fl", "%", 100.0 * m.fl},
          {"count_all", "px", static_cast<double>(m.count_all)},
          {"count_noc", "px", static_cast<double>(m.count_noc)}};
}

std::string format_csv(const MetricReport& report) {
  std::string out = "metric,value,unit\n";
  for (const auto& m : report) {
    out += m.name + "," + shortest(m.value) + "," + m.unit + "\n";
  }
  return out;
}

std::string format_table(const MetricReport& report) {
  std::size_t width = 6;
  for (const auto& m : report) width = std::max(width, m.name.size());
  std::string out;
  for (const auto& m : report) {
    out += m.name + std::string(width - m.name.size() + 2, ' ') +
           fixed6(m.value);
    if (!m.unit.empty()) out += " " + m.unit;
    out += "\n";
  }
  return out;
}

}  // namespace flowpose
