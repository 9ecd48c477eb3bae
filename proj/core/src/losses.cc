#include "flowpose/losses.h"

#include <cmath>
#include <vector>

#include "flowpose/error.h"

namespace flowpose {
namespace {

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kDimensionMismatch, what);
  }
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// exp(-|dI|) for the forward difference from (x, y) to (x + dx, y + dy),
// with |dI| averaged over channels.
double edge_weight(const Image& image, int x, int y, int dx, int dy) {
  double g = 0.0;
  for (int c = 0; c < image.channels(); ++c) {
    g += std::abs(image(x + dx, y + dy, c) - image(x, y, c));
  }
  return std::exp(-g / image.channels());
}

// Splits the derivative with respect to a bilinear lookup onto its stencil.
void scatter_bilinear(ScoreMap& grad, double x, double y, double value) {
  const BilinearStencil s = bilinear_stencil(grad.width(), grad.height(), x, y);
  const double w[4] = {(1.0 - s.ax) * (1.0 - s.ay), s.ax * (1.0 - s.ay),
                       (1.0 - s.ax) * s.ay, s.ax * s.ay};
  const int dx[4] = {0, 1, 0, 1};
  const int dy[4] = {0, 0, 1, 1};
  for (int k = 0; k < 4; ++k) {
    if (w[k] != 0.0) grad(s.x0 + dx[k], s.y0 + dy[k]) += w[k] * value;
  }
}

struct DepthPairs {
  std::vector<double> pred, tri;
  std::vector<Eigen::Vector2d> where;
};

DepthPairs collect_depth_pairs(const DepthMap& depth_pred,
                               const TriangulatedSet& tri) {
  DepthPairs pairs;
  for (const auto& s : tri.samples) {
    if (!s.valid() || !(s.depth_a > 0.0)) continue;
    const auto d = sample_depth(depth_pred, s.p_a.x(), s.p_a.y());
    if (!d || !(*d > 0.0)) continue;
    pairs.pred.push_back(*d);
    pairs.tri.push_back(s.depth_a);
    pairs.where.push_back(s.p_a);
  }
  if (pairs.pred.empty()) {
    throw Error(ErrorCode::kEmptySamples,
                "no valid triangulated sample with a predicted depth");
  }
  return pairs;
}

// Transformed point of pixel (x, y) at depth d; nullopt when behind camera b.
std::optional<Eigen::Vector3d> transfer(int x, int y, double d,
                                        const RigidPose& pose_ab,
                                        const CameraIntrinsics& K) {
  const Eigen::Vector3d X = pose_ab * unproject(Eigen::Vector2d(x, y), d, K);
  if (!(X.z() > 0.0)) return std::nullopt;
  return X;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {w1, w2, w3, w4, w31, w32}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "loss weights must be finite and non-negative");
    }
  }
}

double fit_scale(std::span<const double> depth_pred,
                 std::span<const double> depth_tri) {
  if (depth_pred.size() != depth_tri.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "fit_scale size mismatch");
  }
  if (depth_pred.empty()) {
    throw Error(ErrorCode::kEmptySamples, "fit_scale needs samples");
  }
  double sum_r = 0.0;
  double sum_r2 = 0.0;
  for (std::size_t i = 0; i < depth_pred.size(); ++i) {
    if (!(depth_pred[i] > 0.0) || !(depth_tri[i] > 0.0) ||
        !std::isfinite(depth_pred[i]) || !std::isfinite(depth_tri[i])) {
      throw Error(ErrorCode::kNonPositiveDepth,
                  "fit_scale needs positive finite depths");
    }
    const double r = depth_pred[i] / depth_tri[i];
    sum_r += r;
    sum_r2 += r * r;
  }
  return sum_r / sum_r2;
}

DepthLoss depth_loss(const DepthMap& depth_pred, const TriangulatedSet& tri) {
  const DepthPairs pairs = collect_depth_pairs(depth_pred, tri);
  DepthLoss out;
  out.scale = fit_scale(pairs.pred, pairs.tri);
  out.count = pairs.pred.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < out.count; ++i) {
    const double e = (pairs.tri[i] - out.scale * pairs.pred[i]) / pairs.tri[i];
    sum += e * e;
  }
  out.value = sum / static_cast<double>(out.count);
  return out;
}

ScoreMap depth_loss_gradient(const DepthMap& depth_pred,
                             const TriangulatedSet& tri) {
  const DepthPairs pairs = collect_depth_pairs(depth_pred, tri);
  const double s = fit_scale(pairs.pred, pairs.tri);
  const double n = static_cast<double>(pairs.pred.size());
  ScoreMap grad(depth_pred.width(), depth_pred.height(), 0.0);
  for (std::size_t i = 0; i < pairs.pred.size(); ++i) {
    const double r = pairs.pred[i] / pairs.tri[i];
    const double dL_dD = -2.0 * s * (1.0 - s * r) / (n * pairs.tri[i]);
    scatter_bilinear(grad, pairs.where[i].x(), pairs.where[i].y(), dL_dD);
  }
  return grad;
}

RigidFlow rigid_flow(const DepthMap& depth_a, const RigidPose& pose_ab,
                     const CameraIntrinsics& K) {
  const int w = depth_a.width();
  const int h = depth_a.height();
  RigidFlow out{FlowField(w, h, Eigen::Vector2d::Zero()), Mask(w, h, 0),
                ScoreMap(w, h, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth_a.is_valid(x, y)) continue;
      const auto X = transfer(x, y, depth_a(x, y), pose_ab, K);
      if (!X) continue;
      out.flow(x, y) = project(*X, K) - Eigen::Vector2d(x, y);
      out.valid(x, y) = 1;
      out.depth_b(x, y) = X->z();
    }
  }
  return out;
}

ReprojectionLoss flow_reprojection_loss(const FlowField& flow_ab,
                                        const DepthMap& depth_a,
                                        const RigidPose& pose_ab,
                                        const CameraIntrinsics& K,
                                        const ScoreMap& inlier_score,
                                        const ScoreMap& epipolar_distance) {
  require_same_shape(flow_ab, depth_a, "flow and depth differ in size");
  require_same_shape(flow_ab, inlier_score, "flow and M_r differ in size");
  require_same_shape(flow_ab, epipolar_distance, "flow and D_epi differ in size");
  const RigidFlow rigid = rigid_flow(depth_a, pose_ab, K);
  double weighted = 0.0;
  double mass = 0.0;
  double epi = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < flow_ab.height(); ++y) {
    for (int x = 0; x < flow_ab.width(); ++x) {
      if (!rigid.valid(x, y) || !flow_ab(x, y).allFinite()) continue;
      const Eigen::Vector2d diff = rigid.flow(x, y) - flow_ab(x, y);
      weighted += inlier_score(x, y) * diff.lpNorm<1>();
      mass += inlier_score(x, y);
      epi += std::abs(epipolar_distance(x, y));
      ++count;
    }
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kEmptyMask, "inlier score map has no mass");
  }
  return {weighted / mass + epi / static_cast<double>(count), count};
}

ScoreMap flow_reprojection_loss_gradient(const FlowField& flow_ab,
                                         const DepthMap& depth_a,
                                         const RigidPose& pose_ab,
                                         const CameraIntrinsics& K,
                                         const ScoreMap& inlier_score,
                                         const ScoreMap& epipolar_distance) {
  require_same_shape(flow_ab, depth_a, "flow and depth differ in size");
  require_same_shape(flow_ab, inlier_score, "flow and M_r differ in size");
  require_same_shape(flow_ab, epipolar_distance, "flow and D_epi differ in size");
  const RigidFlow rigid = rigid_flow(depth_a, pose_ab, K);
  double mass = 0.0;
  for (int y = 0; y < flow_ab.height(); ++y) {
    for (int x = 0; x < flow_ab.width(); ++x) {
      if (rigid.valid(x, y) && flow_ab(x, y).allFinite()) {
        mass += inlier_score(x, y);
      }
    }
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kEmptyMask, "inlier score map has no mass");
  }
  ScoreMap grad(flow_ab.width(), flow_ab.height(), 0.0);
  for (int y = 0; y < flow_ab.height(); ++y) {
    for (int x = 0; x < flow_ab.width(); ++x) {
      if (!rigid.valid(x, y) || !flow_ab(x, y).allFinite()) continue;
      const double d = depth_a(x, y);
      const Eigen::Vector3d m =
          pose_ab.rotation * pixel_ray(Eigen::Vector2d(x, y), K);
      const Eigen::Vector3d X = d * m + pose_ab.translation;
      const double z2 = X.z() * X.z();
      const double du = K.fx * (m.x() * X.z() - X.x() * m.z()) / z2;
      const double dv = K.fy * (m.y() * X.z() - X.y() * m.z()) / z2;
      const Eigen::Vector2d diff = rigid.flow(x, y) - flow_ab(x, y);
      grad(x, y) = inlier_score(x, y) *
                   (sign(diff.x()) * du + sign(diff.y()) * dv) / mass;
    }
  }
  return grad;
}

ReprojectionLoss depth_reprojection_loss(const DepthMap& depth_a,
                                         const DepthMap& depth_b,
                                         const RigidPose& pose_ab,
                                         const CameraIntrinsics& K,
                                         const ScoreMap& occlusion,
                                         const ScoreMap& inlier_score) {
  require_same_shape(depth_a, depth_b, "depth maps differ in size");
  require_same_shape(depth_a, occlusion, "depth and M_o differ in size");
  require_same_shape(depth_a, inlier_score, "depth and M_r differ in size");
  double weighted = 0.0;
  double mass = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < depth_a.height(); ++y) {
    for (int x = 0; x < depth_a.width(); ++x) {
      const double w = occlusion(x, y) * inlier_score(x, y);
      if (!(w > 0.0) || !depth_a.is_valid(x, y)) continue;
      const auto X = transfer(x, y, depth_a(x, y), pose_ab, K);
      if (!X) continue;
      const Eigen::Vector2d p = project(*X, K);
      const auto sampled = sample_depth(depth_b, p.x(), p.y());
      if (!sampled) continue;
      weighted += w * std::abs(1.0 - X->z() / *sampled);
      mass += w;
      ++count;
    }
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kEmptyMask,
                "no in-bounds pixel under M_o * M_r");
  }
  return {weighted / mass, count};
}

double smoothness_loss(const ScoreMap& disparity, const Image& image) {
  if (!image.same_shape(disparity)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "disparity and image differ in size");
  }
  const int w = disparity.width();
  const int h = disparity.height();
  double mean = 0.0;
  for (double d : disparity.values()) mean += d;
  mean /= static_cast<double>(disparity.size());
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw Error(ErrorCode::kZeroMeanDisparity, "mean disparity must be > 0");
  }
  double sx = 0.0;
  double sy = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dn = disparity(x, y) / mean;
      if (x + 1 < w) {
        sx += std::abs(disparity(x + 1, y) / mean - dn) *
              edge_weight(image, x, y, 1, 0);
      }
      if (y + 1 < h) {
        sy += std::abs(disparity(x, y + 1) / mean - dn) *
              edge_weight(image, x, y, 0, 1);
      }
    }
  }
  const double nx = static_cast<double>(w - 1) * h;
  const double ny = static_cast<double>(h - 1) * w;
  return (nx > 0.0 ? sx / nx : 0.0) + (ny > 0.0 ? sy / ny : 0.0);
}

ScoreMap ssim(const Image& a, const Image& b, const Mask* valid) {
  if (!a.same_shape(b) || (valid && !a.same_shape(*valid))) {
    throw Error(ErrorCode::kDimensionMismatch, "SSIM inputs differ in shape");
  }
  const int w = a.width();
  const int h = a.height();
  const int channels = a.channels();
  ScoreMap out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int c = 0; c < channels; ++c) {
        double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
        int n = 0;
        for (int v = std::max(0, y - 1); v <= std::min(h - 1, y + 1); ++v) {
          for (int u = std::max(0, x - 1); u <= std::min(w - 1, x + 1); ++u) {
            if (valid && !(*valid)(u, v)) continue;
            const double pa = a(u, v, c);
            const double pb = b(u, v, c);
            sa += pa;
            sb += pb;
            saa += pa * pa;
            sbb += pb * pb;
            sab += pa * pb;
            ++n;
          }
        }
        if (n == 0) continue;
        const double mu_a = sa / n;
        const double mu_b = sb / n;
        const double var_a = saa / n - mu_a * mu_a;
        const double var_b = sbb / n - mu_b * mu_b;
        const double cov = sab / n - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
        const double den =
            (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
        acc += num / den;
      }
      out(x, y) = acc / channels;
    }
  }
  return out;
}

Image warp_image(const Image& image_b, const FlowField& flow_ab, Mask* valid) {
  if (!image_b.same_shape(flow_ab)) {
    throw Error(ErrorCode::kDimensionMismatch, "image and flow differ in size");
  }
  const int w = flow_ab.width();
  const int h = flow_ab.height();
  Image out(w, h, image_b.channels(), 0.0);
  if (valid) *valid = Mask(w, h, 0);
  std::vector<double> px(image_b.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d q = Eigen::Vector2d(x, y) + flow_ab(x, y);
      if (!sample_image(image_b, q.x(), q.y(), px)) continue;
      for (int c = 0; c < image_b.channels(); ++c) out(x, y, c) = px[c];
      if (valid) (*valid)(x, y) = 1;
    }
  }
  return out;
}

ReprojectionLoss flow_photometric_loss(const Image& image_a,
                                       const Image& image_b,
                                       const FlowField& flow_ab,
                                       const ScoreMap& occlusion) {
  if (!image_a.same_shape(image_b) || !image_a.same_shape(flow_ab) ||
      !image_a.same_shape(occlusion)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "photometric loss inputs differ in size");
  }
  const int w = image_a.width();
  const int h = image_a.height();
  const int channels = image_a.channels();
  Mask in_bounds;
  const Image warped = warp_image(image_b, flow_ab, &in_bounds);
  const ScoreMap structure = ssim(image_a, warped, &in_bounds);

  double photometric = 0.0;
  double mass = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = occlusion(x, y);
      if (!(m > 0.0) || !in_bounds(x, y)) continue;
      double l1 = 0.0;
      for (int c = 0; c < channels; ++c) {
        l1 += std::abs(image_a(x, y, c) - warped(x, y, c));
      }
      l1 /= channels;
      photometric += m * ((1.0 - kPhotometricAlpha) * l1 +
                          0.5 * kPhotometricAlpha * (1.0 - structure(x, y)));
      mass += m;
      ++count;
    }
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kEmptyMask, "no visible in-bounds pixel");
  }

  // Edge-aware first-order flow smoothness.
  double sx = 0.0;
  double sy = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) {
        sx += (flow_ab(x + 1, y) - flow_ab(x, y)).lpNorm<1>() *
              edge_weight(image_a, x, y, 1, 0);
      }
      if (y + 1 < h) {
        sy += (flow_ab(x, y + 1) - flow_ab(x, y)).lpNorm<1>() *
              edge_weight(image_a, x, y, 0, 1);
      }
    }
  }
  const double nx = static_cast<double>(w - 1) * h;
  const double ny = static_cast<double>(h - 1) * w;
  const double smooth = (nx > 0.0 ? sx / nx : 0.0) + (ny > 0.0 ? sy / ny : 0.0);

  return {photometric / mass + kFlowSmoothnessBeta * smooth, count};
}

LossReport total_loss(const LossInputs& in, const LossWeights& weights) {
  weights.validate();
  LossReport report;

  const DepthLoss dl = depth_loss(in.depth_a, in.tri);
  report.depth = dl.value;
  report.scale = dl.scale;
  report.depth_samples = dl.count;

  DepthMap scaled_a = in.depth_a;
  DepthMap scaled_b = in.depth_b;
  for (double& d : scaled_a.values()) d *= dl.scale;
  for (double& d : scaled_b.values()) d *= dl.scale;

  const ReprojectionLoss pf =
      flow_reprojection_loss(in.flow_ab, scaled_a, in.pose_ab, in.K,
                             in.inlier_score, in.epipolar_distance);
  report.flow_reprojection = pf.value;
  report.flow_reprojection_pixels = pf.count;

  const ReprojectionLoss pd = depth_reprojection_loss(
      scaled_a, scaled_b, in.pose_ab, in.K, in.occlusion, in.inlier_score);
  report.depth_reprojection = pd.value;
  report.depth_reprojection_pixels = pd.count;

  ScoreMap disparity(in.depth_a.width(), in.depth_a.height(), 0.0);
  for (int y = 0; y < disparity.height(); ++y) {
    for (int x = 0; x < disparity.width(); ++x) {
      if (in.depth_a.is_valid(x, y)) disparity(x, y) = 1.0 / in.depth_a(x, y);
    }
  }
  report.smoothness = smoothness_loss(disparity, in.image_a);

  const ReprojectionLoss lf =
      flow_photometric_loss(in.image_a, in.image_b, in.flow_ab, in.occlusion);
  report.flow = lf.value;
  report.photometric_pixels = lf.count;

  report.total = weights.w1 * report.flow + weights.w2 * report.depth +
                 weights.w3 * (weights.w31 * report.flow_reprojection +
                               weights.w32 * report.depth_reprojection) +
                 weights.w4 * report.smoothness;
  return report;
}

double disparity_to_depth(double sigma, double min_depth, double max_depth) {
  if (!(min_depth > 0.0) || !(max_depth > min_depth)) {
    throw Error(ErrorCode::kInvalidArgument,
                "need 0 < min_depth < max_depth");
  }
  const double a = 1.0 / max_depth;
  const double b = 1.0 / min_depth - 1.0 / max_depth;
  const double denom = a + b * sigma;
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "disparity maps to no depth");
  }
  return 1.0 / denom;
}

}  // namespace flowpose
