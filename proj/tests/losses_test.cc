#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "flowpose/epipolar.h"
#include "flowpose/flow.h"
#include "flowpose/losses.h"
#include "flowpose/synthetic.h"
#include "flowpose/triangulation.h"
#include "flowpose/vo.h"
#include "support.h"

namespace flowpose {
namespace {

using testing::expect_code;

double fit_objective(std::span<const double> d, std::span<const double> t, double s) {
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double e = (t[i] - s * d[i]) / t[i];
    sum += e * e;
  }
  return sum / d.size();
}

DepthMap random_depth(int w, int h, CounterRng& rng, double lo = 2.0, double hi = 10.0) {
  DepthMap d(w, h);
  for (double& v : d.values()) v = rng.uniform(lo, hi);
  return d;
}

ScoreMap random_map(int w, int h, CounterRng& rng, double lo, double hi) {
  ScoreMap m(w, h);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

FlowField random_flow(int w, int h, CounterRng& rng, double amplitude) {
  FlowField f(w, h);
  for (auto& v : f.values()) v = {rng.uniform(-amplitude, amplitude), rng.uniform(-amplitude, amplitude)};
  return f;
}

Image random_image(int w, int h, int channels, CounterRng& rng) {
  Image im(w, h, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) im(x, y, c) = rng.uniform();
  return im;
}

// Fronto-parallel plane, no rotation, linear texture: every bilinear lookup
// in the pipeline is exact, so consistent inputs give exact zeros.
DenseScene exact_plane_scene(std::uint64_t seed) {
  DenseSceneOptions opts;
  opts.seed = seed;
  opts.num_bumps = 0;
  opts.rotation = 0.0;
  opts.texture = TextureKind::kLinear;
  return generate_dense_scene(opts);
}

TEST(FitScale, ConstantRatio) {
  const std::vector<double> pred{2, 4, 6}, tri{1, 2, 3};
  EXPECT_EQ(fit_scale(pred, tri), 0.5);
  CounterRng rng(1, "test.fit");
  for (int i = 0; i < 100; ++i) {
    const double c = std::exp(rng.uniform(-5, 5));
    std::vector<double> t(50), d(50);
    for (std::size_t k = 0; k < t.size(); ++k) {
      t[k] = rng.uniform(0.5, 50);
      d[k] = c * t[k];
    }
    EXPECT_NEAR(fit_scale(d, t) * c, 1.0, 1e-12);
  }
}

TEST(FitScale, RandomProbesNeverBeatIt) {
  CounterRng rng(2, "test.fit");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d(30), t(30);
    for (std::size_t k = 0; k < d.size(); ++k) {
      d[k] = rng.uniform(0.1, 20);
      t[k] = rng.uniform(0.1, 20);
    }
    const double s = fit_scale(d, t);
    EXPECT_GT(s, 0.0);
    const double best = fit_objective(d, t, s);
    for (int probe = 0; probe < 1000; ++probe) {
      const double c = s * std::exp(rng.uniform(-3, 3));
      EXPECT_LE(best, fit_objective(d, t, c));
    }
  }
}

TEST(FitScale, Errors) {
  expect_code(ErrorCode::kEmptySamples, [] { fit_scale({}, {}); });
  const std::vector<double> bad{1, -1}, ok{1, 1};
  expect_code(ErrorCode::kNonPositiveDepth, [&] { fit_scale(bad, ok); });
  expect_code(ErrorCode::kNonPositiveDepth, [&] { fit_scale(ok, bad); });
}

TriangulatedSet samples_at(const std::vector<Eigen::Vector2d>& where,
                           const std::vector<double>& depths) {
  TriangulatedSet set;
  for (std::size_t i = 0; i < where.size(); ++i) {
    TriangulatedSample s;
    s.p_a = where[i];
    s.depth_a = s.depth_b = depths[i];
    s.point = {0, 0, depths[i]};
    set.samples.push_back(s);
  }
  return set;
}

TEST(DepthLoss, ScaleInvariantZero) {
  CounterRng rng(3, "test.dl");
  const DepthMap tri_depth = random_depth(20, 15, rng);
  std::vector<Eigen::Vector2d> where;
  std::vector<double> d;
  for (int i = 0; i < 40; ++i) {
    const int x = static_cast<int>(rng.uniform_index(20)), y = static_cast<int>(rng.uniform_index(15));
    where.emplace_back(x, y);
    d.push_back(tri_depth(x, y));
  }
  const TriangulatedSet tri = samples_at(where, d);
  for (double c : {0.01, 1.0, 3.0, 250.0}) {
    DepthMap pred = tri_depth;
    for (double& v : pred.values()) v *= c;
    const DepthLoss dl = depth_loss(pred, tri);
    EXPECT_LT(dl.value, 1e-28);
    EXPECT_NEAR(dl.scale * c, 1.0, 1e-14);
    EXPECT_EQ(dl.count, 40u);
  }
}

TEST(DepthLoss, SingleSample) {
  const DepthMap one(2, 2, 1.0);
  const DepthLoss dl = depth_loss(one, samples_at({{0, 0}}, {1.0}));
  EXPECT_EQ(dl.scale, 1.0);
  EXPECT_EQ(dl.value, 0.0);
}

TEST(DepthLoss, MatchesDirectFormula) {
  CounterRng rng(4, "test.dl");
  const int w = 30, h = 20;
  std::vector<Eigen::Vector2d> where;
  std::vector<double> tri;
  DepthMap pred(w, h, 0.0);
  for (int i = 0; i < 200; ++i) {
    const int x = static_cast<int>(rng.uniform_index(w)), y = static_cast<int>(rng.uniform_index(h));
    const double t = rng.uniform(1, 30);
    pred(x, y) = 2.5 * t * (1.0 + 0.1 * rng.gaussian());
    where.emplace_back(x, y);
    tri.push_back(t);
  }
  // Re-read the map so duplicate pixels carry the last written value.
  std::vector<double> d;
  for (const auto& p : where) d.push_back(pred(static_cast<int>(p.x()), static_cast<int>(p.y())));
  const double s = fit_scale(d, tri);
  double ref = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    ref += std::pow((tri[i] - s * d[i]) / tri[i], 2);
  }
  ref /= d.size();
  const DepthLoss dl = depth_loss(pred, samples_at(where, tri));
  EXPECT_NEAR(dl.value, ref, 1e-12);
  EXPECT_EQ(dl.scale, s);
}

TEST(DepthLoss, SkipsInvalidSamples) {
  DepthMap pred(4, 4, 2.0);
  pred(3, 3) = 0.0;
  TriangulatedSet tri = samples_at({{0, 0}, {1, 1}, {3, 3}}, {1.0, 1.0, 1.0});
  tri.samples[1].status = TriangulationStatus::kNegativeDepth;
  EXPECT_EQ(depth_loss(pred, tri).count, 1u);
  tri.samples[0].status = TriangulationStatus::kSmallAngle;
  expect_code(ErrorCode::kEmptySamples, [&] { depth_loss(pred, tri); });
}

TEST(DepthLoss, GradientMatchesFiniteDifferences) {
  CounterRng rng(5, "test.dlgrad");
  const int w = 16, h = 12;
  for (int trial = 0; trial < 20; ++trial) {
    const DepthMap pred = random_depth(w, h, rng);
    std::vector<Eigen::Vector2d> where;
    std::vector<double> tri;
    for (int i = 0; i < 60; ++i) {
      where.emplace_back(rng.uniform(0, w - 1), rng.uniform(0, h - 1));
      tri.push_back(rng.uniform(1, 12));
    }
    const TriangulatedSet set = samples_at(where, tri);
    const ScoreMap grad = depth_loss_gradient(pred, set);
    const ScoreMap dir = random_map(w, h, rng, -1, 1);
    const double eps = 1e-6;
    DepthMap plus = pred, minus = pred;
    double analytic = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      plus[i] += eps * dir[i];
      minus[i] -= eps * dir[i];
      analytic += grad[i] * dir[i];
    }
    const double numeric =
        (depth_loss(plus, set).value - depth_loss(minus, set).value) / (2 * eps);
    EXPECT_LT(std::abs(analytic - numeric), 1e-5 * std::abs(numeric));
  }
}

TEST(RigidFlow, IdentityIsZero) {
  CounterRng rng(6, "test.rigid");
  const RigidFlow r = rigid_flow(random_depth(20, 10, rng), RigidPose::identity(),
                                 testing::test_camera());
  for (const auto& f : r.flow.values()) EXPECT_LT(f.norm(), 1e-12);
  for (auto v : r.valid.values()) EXPECT_EQ(v, 1);
}

TEST(RigidFlow, LateralTranslation) {
  const CameraIntrinsics K = testing::test_camera();
  const double d = 4.0, tx = 0.5;
  RigidPose pose;
  pose.translation = {-tx, 0, 0};  // camera moves +x
  const RigidFlow r = rigid_flow(DepthMap(12, 9, d), pose, K);
  for (const auto& f : r.flow.values()) {
    EXPECT_NEAR(f.x(), -K.fx * tx / d, 1e-12);
    EXPECT_NEAR(f.y(), 0.0, 1e-12);
  }
}

TEST(RigidFlow, MasksPointsBehindCamera) {
  RigidPose pose;
  pose.translation = {0, 0, -5};
  DepthMap depth(4, 1, 3.0);
  depth(0, 0) = 8.0;
  depth(1, 0) = 0.0;
  const RigidFlow r = rigid_flow(depth, pose, testing::test_camera());
  EXPECT_EQ(r.valid(0, 0), 1);
  EXPECT_EQ(r.valid(1, 0), 0);
  EXPECT_EQ(r.valid(2, 0), 0);
  EXPECT_DOUBLE_EQ(r.depth_b(0, 0), 3.0);
}

TEST(RigidFlow, ReproducesRenderedFlow) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DenseScene scene = generate_dense_scene({.seed = seed});
    const DenseObservations obs = render_observations(scene, 0, 1);
    const RigidFlow r = rigid_flow(obs.depth_i, obs.pose_ij, scene.K);
    for (int y = 0; y < scene.K.height; ++y) {
      for (int x = 0; x < scene.K.width; ++x) {
        if (!obs.depth_i.is_valid(x, y)) continue;
        ASSERT_EQ(r.valid(x, y), 1);
        EXPECT_LT((r.flow(x, y) - obs.flow_fwd(x, y)).norm(), 1e-9);
      }
    }
  }
}

// Scalar-loop reference for the flow reprojection loss.
double flow_reprojection_reference(const FlowField& flow, const DepthMap& depth,
                                   const RigidPose& pose, const CameraIntrinsics& K,
                                   const ScoreMap& mr, const ScoreMap& depi) {
  double num = 0, den = 0, epi = 0;
  int n = 0;
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const double d = depth(x, y);
      if (!(d > 0)) continue;
      const double X = (x - K.cx) / K.fx * d, Y = (y - K.cy) / K.fy * d, Z = d;
      const Eigen::Matrix3d& R = pose.rotation;
      const double xb = R(0, 0) * X + R(0, 1) * Y + R(0, 2) * Z + pose.translation(0);
      const double yb = R(1, 0) * X + R(1, 1) * Y + R(1, 2) * Z + pose.translation(1);
      const double zb = R(2, 0) * X + R(2, 1) * Y + R(2, 2) * Z + pose.translation(2);
      if (!(zb > 0)) continue;
      const double u = K.fx * xb / zb + K.cx, v = K.fy * yb / zb + K.cy;
      const double fu = x + flow(x, y).x(), fv = y + flow(x, y).y();
      num += mr(x, y) * (std::abs(u - fu) + std::abs(v - fv));
      den += mr(x, y);
      epi += std::abs(depi(x, y));
      ++n;
    }
  }
  return num / den + epi / n;
}

TEST(FlowReprojection, ConsistentInputsGiveZero) {
  const DenseScene scene = generate_dense_scene({.seed = 1});
  const DenseObservations obs = render_observations(scene, 0, 1);
  const ScoreMap ones(scene.K.width, scene.K.height, 1.0);
  const ScoreMap zeros(scene.K.width, scene.K.height, 0.0);
  EXPECT_LT(flow_reprojection_loss(obs.flow_fwd, obs.depth_i, obs.pose_ij, scene.K,
                                   ones, zeros).value,
            1e-9);
}

TEST(FlowReprojection, SinglePixelHandArithmetic) {
  const CameraIntrinsics K = testing::test_camera();
  RigidPose pose;
  pose.translation = {-0.5, 0, 0};
  const DepthMap depth(5, 4, 4.0);
  FlowField flow = rigid_flow(depth, pose, K).flow;
  flow(2, 1) += Eigen::Vector2d(-1, 1);
  ScoreMap mr(5, 4, 0.0);
  mr(2, 1) = 0.7;
  const auto loss = flow_reprojection_loss(flow, depth, pose, K, mr, ScoreMap(5, 4, 0.0));
  EXPECT_NEAR(loss.value, 2.0, 1e-12);
  EXPECT_EQ(loss.count, 20u);
  expect_code(ErrorCode::kEmptyMask, [&] {
    flow_reprojection_loss(flow, depth, pose, K, ScoreMap(5, 4, 0.0), mr);
  });
}

TEST(FlowReprojection, MatchesLoopReference) {
  CounterRng rng(7, "test.lpf");
  const CameraIntrinsics K{60, 55, 15.5, 11.5, 32, 24};
  for (int trial = 0; trial < 20; ++trial) {
    const DepthMap depth = random_depth(32, 24, rng, 0.5, 10);
    const RigidPose pose = testing::random_pose(rng, 0.2, 2.0);
    const FlowField flow = random_flow(32, 24, rng, 5);
    const ScoreMap mr = random_map(32, 24, rng, 0, 1);
    const ScoreMap depi = random_map(32, 24, rng, -2, 2);
    EXPECT_NEAR(flow_reprojection_loss(flow, depth, pose, K, mr, depi).value,
                flow_reprojection_reference(flow, depth, pose, K, mr, depi),
                1e-12 * flow_reprojection_reference(flow, depth, pose, K, mr, depi));
  }
}

TEST(FlowReprojection, GradientMatchesFiniteDifferences) {
  CounterRng rng(8, "test.lpfgrad");
  const CameraIntrinsics K{60, 55, 15.5, 11.5, 32, 24};
  for (int trial = 0; trial < 20; ++trial) {
    const DepthMap depth = random_depth(32, 24, rng, 2, 10);
    const RigidPose pose = testing::random_pose(rng, 0.1, 1.0);
    // Offsets of at least 0.5 px keep every L1 kink far from the probe.
    FlowField flow = rigid_flow(depth, pose, K).flow;
    for (auto& f : flow.values()) {
      f += Eigen::Vector2d((rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.5, 2),
                           (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.5, 2));
    }
    const ScoreMap mr = random_map(32, 24, rng, 0, 1);
    const ScoreMap depi = random_map(32, 24, rng, 0, 1);
    const ScoreMap grad = flow_reprojection_loss_gradient(flow, depth, pose, K, mr, depi);
    const ScoreMap dir = random_map(32, 24, rng, -1, 1);
    const double eps = 1e-6;
    DepthMap plus = depth, minus = depth;
    double analytic = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      plus[i] += eps * dir[i];
      minus[i] -= eps * dir[i];
      analytic += grad[i] * dir[i];
    }
    const double numeric =
        (flow_reprojection_loss(flow, plus, pose, K, mr, depi).value -
         flow_reprojection_loss(flow, minus, pose, K, mr, depi).value) / (2 * eps);
    EXPECT_LT(std::abs(analytic - numeric), 1e-5 * std::abs(numeric));
  }
}

double bilinear_reference(const DepthMap& d, double x, double y) {
  const int x0 = std::min(static_cast<int>(x), d.width() - 2);
  const int y0 = std::min(static_cast<int>(y), d.height() - 2);
  const double ax = x - x0, ay = y - y0;
  return (1 - ax) * (1 - ay) * d(x0, y0) + ax * (1 - ay) * d(x0 + 1, y0) +
         (1 - ax) * ay * d(x0, y0 + 1) + ax * ay * d(x0 + 1, y0 + 1);
}

double depth_reprojection_reference(const DepthMap& da, const DepthMap& db,
                                    const RigidPose& pose, const CameraIntrinsics& K,
                                    const ScoreMap& mo, const ScoreMap& mr) {
  double num = 0, den = 0;
  for (int y = 0; y < da.height(); ++y) {
    for (int x = 0; x < da.width(); ++x) {
      const double w = mo(x, y) * mr(x, y);
      if (w <= 0 || !(da(x, y) > 0)) continue;
      const Eigen::Vector3d Xb = pose * Eigen::Vector3d((x - K.cx) / K.fx * da(x, y),
                                                        (y - K.cy) / K.fy * da(x, y), da(x, y));
      if (Xb.z() <= 0) continue;
      const double u = K.fx * Xb.x() / Xb.z() + K.cx, v = K.fy * Xb.y() / Xb.z() + K.cy;
      if (u < 0 || v < 0 || u > da.width() - 1 || v > da.height() - 1) continue;
      num += w * std::abs(1.0 - Xb.z() / bilinear_reference(db, u, v));
      den += w;
    }
  }
  return num / den;
}

TEST(DepthReprojection, ConsistentPairIsZero) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DenseScene scene = exact_plane_scene(seed);
    const DenseObservations obs = render_observations(scene, 0, 1);
    const ScoreMap ones(scene.K.width, scene.K.height, 1.0);
    EXPECT_LT(depth_reprojection_loss(obs.depth_i, obs.depth_j, obs.pose_ij, scene.K,
                                      obs.occlusion, ones).value,
              1e-10);
  }
}

TEST(DepthReprojection, MatchesLoopReference) {
  CounterRng rng(9, "test.lpd");
  const CameraIntrinsics K{60, 55, 15.5, 11.5, 32, 24};
  for (int trial = 0; trial < 20; ++trial) {
    const DepthMap da = random_depth(32, 24, rng, 2, 10);
    const DepthMap db = random_depth(32, 24, rng, 2, 10);
    const RigidPose pose = testing::random_pose(rng, 0.1, 0.5);
    const ScoreMap mo = random_map(32, 24, rng, 0, 1);
    const ScoreMap mr = random_map(32, 24, rng, 0, 1);
    EXPECT_NEAR(depth_reprojection_loss(da, db, pose, K, mo, mr).value,
                depth_reprojection_reference(da, db, pose, K, mo, mr), 1e-12);
  }
}

TEST(DepthReprojection, EmptyMask) {
  const DepthMap d(4, 4, 1.0);
  const ScoreMap zeros(4, 4, 0.0), ones(4, 4, 1.0);
  expect_code(ErrorCode::kEmptyMask, [&] {
    depth_reprojection_loss(d, d, RigidPose::identity(), testing::test_camera(), zeros, ones);
  });
}

double smoothness_reference(const ScoreMap& d, const Image& im) {
  double mean = 0;
  for (double v : d.values()) mean += v;
  mean /= d.size();
  double sx = 0, sy = 0;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x + 1 < d.width(); ++x) {
      double g = 0;
      for (int c = 0; c < im.channels(); ++c) g += std::abs(im(x + 1, y, c) - im(x, y, c));
      sx += std::abs(d(x + 1, y) / mean - d(x, y) / mean) * std::exp(-g / im.channels());
    }
  }
  for (int y = 0; y + 1 < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      double g = 0;
      for (int c = 0; c < im.channels(); ++c) g += std::abs(im(x, y + 1, c) - im(x, y, c));
      sy += std::abs(d(x, y + 1) / mean - d(x, y) / mean) * std::exp(-g / im.channels());
    }
  }
  return sx / ((d.width() - 1) * d.height()) + sy / ((d.height() - 1) * d.width());
}

TEST(Smoothness, ConstantIsZeroAndScaleFree) {
  CounterRng rng(10, "test.smooth");
  const Image im = random_image(20, 15, 3, rng);
  EXPECT_EQ(smoothness_loss(ScoreMap(20, 15, 0.3), im), 0.0);
  const ScoreMap d = random_map(20, 15, rng, 0.1, 1);
  const double base = smoothness_loss(d, im);
  for (double c : {1e-3, 7.0, 1e4}) {
    ScoreMap scaled = d;
    for (double& v : scaled.values()) v *= c;
    EXPECT_NEAR(smoothness_loss(scaled, im), base, 1e-12 * base);
  }
}

TEST(Smoothness, MatchesLoopReference) {
  CounterRng rng(11, "test.smooth");
  for (int trial = 0; trial < 20; ++trial) {
    const Image im = random_image(17, 13, trial % 2 ? 3 : 1, rng);
    const ScoreMap d = random_map(17, 13, rng, 0.01, 2);
    EXPECT_NEAR(smoothness_loss(d, im), smoothness_reference(d, im), 1e-12);
  }
  expect_code(ErrorCode::kZeroMeanDisparity,
              [] { smoothness_loss(ScoreMap(4, 4, 0.0), Image(4, 4, 1)); });
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
  CounterRng rng(12, "test.ssim");
  for (int channels : {1, 3}) {
    const Image im = random_image(23, 17, channels, rng);
    const ScoreMap s = ssim(im, im);
    for (double v : s.values()) EXPECT_EQ(v, 1.0);
  }
  const ScoreMap flat = ssim(Image(5, 5, 1, 0.0), Image(5, 5, 1, 0.0));
  for (double v : flat.values()) EXPECT_EQ(v, 1.0);
}

TEST(Ssim, BoundedAndSymmetric) {
  CounterRng rng(13, "test.ssim");
  const Image a = random_image(15, 11, 3, rng), b = random_image(15, 11, 3, rng);
  const ScoreMap ab = ssim(a, b), ba = ssim(b, a);
  for (std::size_t i = 0; i < ab.size(); ++i) {
    EXPECT_LE(std::abs(ab[i]), 1.0);
    EXPECT_NEAR(ab[i], ba[i], 1e-15);
  }
}

TEST(Photometric, IdentityIsZero) {
  CounterRng rng(14, "test.photo");
  const Image im = random_image(16, 12, 3, rng);
  const FlowField zero(16, 12, Eigen::Vector2d::Zero());
  const auto loss = flow_photometric_loss(im, im, zero, ScoreMap(16, 12, 1.0));
  EXPECT_EQ(loss.value, 0.0);
  EXPECT_EQ(loss.count, 16u * 12u);
}

TEST(Photometric, TermWeights) {
  const double e = 0.2, a = 0.4, b = a + e;
  const Image ia(2, 2, 1, a), ib(2, 2, 1, b);
  const FlowField zero(2, 2, Eigen::Vector2d::Zero());
  const double structure = (2 * a * b + kSsimC1) / (a * a + b * b + kSsimC1);
  const double value = flow_photometric_loss(ia, ib, zero, ScoreMap(2, 2, 1.0)).value;
  EXPECT_NEAR(value - 0.425 * (1.0 - structure), 0.15 * e, 1e-13);

  // A constant flow gradient adds beta times the smoothness term.
  FlowField ramp(2, 2);
  ramp(0, 0) = {0, 0};
  ramp(1, 0) = {0.5, 0};
  ramp(0, 1) = {0, 0};
  ramp(1, 1) = {0.5, 0};
  const Image flat(2, 2, 1, 0.5);
  // Only pixels whose target stays in the bilinear domain count: x = 0.
  EXPECT_NEAR(flow_photometric_loss(flat, flat, ramp, ScoreMap(2, 2, 1.0)).value,
              0.1 * 0.5, 1e-15);
}

TEST(Photometric, EmptyMask) {
  const Image im(4, 4, 1, 0.5);
  expect_code(ErrorCode::kEmptyMask, [&] {
    flow_photometric_loss(im, im, FlowField(4, 4, Eigen::Vector2d::Zero()), ScoreMap(4, 4, 0.0));
  });
}

TEST(Warp, BilinearOfLinearImageIsExact) {
  Image b(10, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) b(x, y, 0) = 0.1 + 0.05 * x + 0.03 * y;
  const FlowField flow(10, 8, Eigen::Vector2d(0.25, 0.5));
  Mask valid;
  const Image w = warp_image(b, flow, &valid);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 10; ++x) {
      if (x + 0.25 > 9 || y + 0.5 > 7) {
        EXPECT_EQ(valid(x, y), 0);
        continue;
      }
      EXPECT_EQ(valid(x, y), 1);
      EXPECT_NEAR(w(x, y, 0), 0.1 + 0.05 * (x + 0.25) + 0.03 * (y + 0.5), 1e-15);
    }
  }
}

// Lateral motion over the plane keeps the flow constant, so the flow
// smoothness term vanishes too.
DenseScene lateral_plane_scene(std::uint64_t seed) {
  DenseScene scene = exact_plane_scene(seed);
  CounterRng rng(seed, "test.lateral");
  const double heading = rng.uniform(0.0, 2.0 * M_PI);
  RigidPose t01;
  t01.translation = {0.8 * std::cos(heading), 0.8 * std::sin(heading), 0.0};
  scene.cameras[1] = invert(t01);
  return scene;
}

// Ground-truth pose, masks and triangulation. A translating plane is a
// degenerate configuration for the fundamental matrix, so nothing here goes
// through RANSAC.
LossInputs consistent_inputs(std::uint64_t seed) {
  const DenseScene scene = lateral_plane_scene(seed);
  const DenseObservations obs = render_observations(scene, 0, 1);
  RigidPose pose = obs.pose_ij;
  pose.translation.normalize();
  const EpipolarMaps maps =
      epipolar_residual_maps(fundamental_from_pose(pose, scene.K), obs.flow_fwd);
  ScoreMap mask = obs.occlusion;
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] *= maps.inlier_score[i];
  const PoseRecoveryOptions po;
  const CorrespondenceSet samples = sample_correspondences(
      obs.flow_fwd, maps.inlier_score, mask, po.top_frac, po.num_samples, seed, "tri");
  LossInputs in;
  in.image_a = obs.image_i;
  in.image_b = obs.image_j;
  in.flow_ab = obs.flow_fwd;
  in.depth_a = obs.depth_i;
  in.depth_b = obs.depth_j;
  in.pose_ab = pose;
  in.K = scene.K;
  in.occlusion = obs.occlusion;
  in.inlier_score = maps.inlier_score;
  in.epipolar_distance = maps.distance;
  in.tri = midpoint_triangulate(samples, pose, scene.K);
  return in;
}

TEST(TotalLoss, ConsistentInputsAreZero) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LossReport r = total_loss(consistent_inputs(seed));
    EXPECT_LT(r.flow, 1e-8);
    EXPECT_LT(r.depth, 1e-8);
    EXPECT_LT(r.flow_reprojection, 1e-8);
    EXPECT_LT(r.depth_reprojection, 1e-8);
    EXPECT_LT(r.smoothness, 1e-8);
    EXPECT_LT(r.total, 1e-8);
    EXPECT_GT(r.depth_samples, 0u);
  }
}

TEST(TotalLoss, WeightsCombineLinearly) {
  LossInputs in = consistent_inputs(3);
  // Perturb so that every term is nonzero.
  CounterRng rng(15, "test.total");
  for (double& d : in.depth_a.values()) d *= 1.0 + 0.05 * rng.gaussian();
  for (auto& f : in.flow_ab.values()) f += Eigen::Vector2d(0.1 * rng.gaussian(), 0.1 * rng.gaussian());
  const LossReport r = total_loss(in);
  for (double term : {r.flow, r.depth, r.flow_reprojection, r.depth_reprojection, r.smoothness}) {
    EXPECT_GT(term, 0.0);
  }
  EXPECT_EQ(r.total, 1.0 * r.flow + 1.0 * r.depth +
                         1.0 * (1.0 * r.flow_reprojection + 1.0 * r.depth_reprojection) +
                         0.1 * r.smoothness);
  EXPECT_EQ(total_loss(in, {0, 0, 0, 0, 0, 0}).total, 0.0);
  struct Case {
    LossWeights w;
    double expected;
  };
  for (const Case& c : {Case{{2.5, 0, 0, 0, 1, 1}, 2.5 * r.flow},
                        Case{{0, 3, 0, 0, 1, 1}, 3 * r.depth},
                        Case{{0, 0, 1, 0, 4, 0}, 4 * r.flow_reprojection},
                        Case{{0, 0, 2, 0, 0, 1}, 2 * r.depth_reprojection},
                        Case{{0, 0, 0, 7, 1, 1}, 7 * r.smoothness}}) {
    EXPECT_EQ(total_loss(in, c.w).total, c.expected);
  }
  expect_code(ErrorCode::kInvalidArgument, [&] { total_loss(in, {-1, 1, 1, 1, 1, 1}); });
}

// Scaling depths and translation together leaves the geometric terms unchanged.
TEST(TotalLoss, JointScaleInvariance) {
  const DenseScene scene = generate_dense_scene({.seed = 6});
  RenderOptions noisy;
  noisy.noise_px = 0.3;
  const DenseObservations obs = render_observations(scene, 0, 1, noisy);
  CounterRng rng(16, "test.scale");
  DepthMap da = obs.depth_i, db = obs.depth_j;
  for (double& d : da.values()) d *= 1.0 + 0.03 * rng.gaussian();
  const PairGeometry geo = pair_geometry(obs.flow_fwd, obs.flow_bwd, scene.K);
  const RigidPose pose = geo.recovery.hypothesis.pose;
  const ScoreMap& mr = geo.recovery.inlier_score;
  const ScoreMap& depi = geo.recovery.epipolar_distance;
  const ScoreMap& mo = geo.recovery.occlusion;
  const double ld = depth_loss(da, geo.triangulated).value;
  const double lpf = flow_reprojection_loss(obs.flow_fwd, da, pose, scene.K, mr, depi).value;
  const double lpd = depth_reprojection_loss(da, db, pose, scene.K, mo, mr).value;
  for (double c : {1e-2, 1.0, 1e2, 3.3}) {
    DepthMap sa = da, sb = db;
    for (double& d : sa.values()) d *= c;
    for (double& d : sb.values()) d *= c;
    RigidPose sp = pose;
    sp.translation *= c;
    TriangulationOptions to;
    to.max_depth = 1e4 * c;
    const TriangulatedSet tri = midpoint_triangulate(geo.tri_samples, sp, scene.K, to);
    EXPECT_NEAR(depth_loss(sa, tri).value, ld, 1e-10);
    EXPECT_NEAR(flow_reprojection_loss(obs.flow_fwd, sa, sp, scene.K, mr, depi).value, lpf, 1e-10);
    EXPECT_NEAR(depth_reprojection_loss(sa, sb, sp, scene.K, mo, mr).value, lpd, 1e-10);
  }
}

TEST(DisparityToDepth, SpansRange) {
  EXPECT_NEAR(disparity_to_depth(0.0), 100.0, 1e-12);
  EXPECT_NEAR(disparity_to_depth(1.0), 0.1, 1e-15);
  double previous = disparity_to_depth(0.0);
  for (int i = 1; i <= 100; ++i) {
    const double d = disparity_to_depth(i / 100.0);
    EXPECT_LT(d, previous);
    previous = d;
  }
  EXPECT_NEAR(disparity_to_depth(0.5, 1.0, 3.0), 1.5, 1e-15);
  expect_code(ErrorCode::kInvalidArgument, [] { disparity_to_depth(0.5, 2.0, 1.0); });
}

}  // namespace
}  // namespace flowpose
