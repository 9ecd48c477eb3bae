#include <cstring>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "flowpose/config.h"
#include "flowpose/io.h"
#include "support.h"

namespace flowpose {
namespace {

using testing::expect_code;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

// Values that survive float32 exactly.
FlowField float_flow(int w, int h, std::uint64_t seed) {
  CounterRng rng(seed, "test.io");
  FlowField f(w, h);
  for (auto& v : f.values()) {
    v = {static_cast<float>(rng.uniform(-50, 50)), static_cast<float>(rng.uniform(-50, 50))};
  }
  return f;
}

TEST(Flo, RoundTripAndMagic) {
  const fs::path dir = testing::scratch_dir("flo");
  const FlowField f = float_flow(13, 7, 1);
  write_flow(dir / "a.flo", f);
  EXPECT_EQ(read_flow(dir / "a.flo"), f);
  const std::string bytes = slurp(dir / "a.flo");
  ASSERT_EQ(bytes.size(), 12u + 13 * 7 * 8);
  float magic;
  std::memcpy(&magic, bytes.data(), 4);
  EXPECT_EQ(magic, 202021.25f);

  // Arbitrary doubles are rounded once, after which the file is a fixed point.
  CounterRng rng(2, "test.io");
  FlowField g(5, 4);
  for (auto& v : g.values()) v = {rng.gaussian(), rng.gaussian()};
  write_flow(dir / "b.flo", g);
  const FlowField once = read_flow(dir / "b.flo");
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LT((once[i] - g[i]).norm(), 1e-6);
  write_flow(dir / "c.flo", once);
  EXPECT_EQ(slurp(dir / "b.flo"), slurp(dir / "c.flo"));
}

TEST(Flo, Errors) {
  const fs::path dir = testing::scratch_dir("flo_errors");
  write_flow(dir / "a.flo", float_flow(4, 4, 3));
  std::string bytes = slurp(dir / "a.flo");
  std::string bad = bytes;
  bad[0] = 'X';
  spit(dir / "magic.flo", bad);
  expect_code(ErrorCode::kBadMagic, [&] { read_flow(dir / "magic.flo"); });
  spit(dir / "short.flo", bytes.substr(0, bytes.size() - 3));
  expect_code(ErrorCode::kTruncatedFile, [&] { read_flow(dir / "short.flo"); });
  spit(dir / "header.flo", bytes.substr(0, 6));
  expect_code(ErrorCode::kTruncatedFile, [&] { read_flow(dir / "header.flo"); });
  expect_code(ErrorCode::kIoError, [&] { read_flow(dir / "missing.flo"); });
}

TEST(Depth, PfmRoundTrip) {
  const fs::path dir = testing::scratch_dir("pfm");
  CounterRng rng(4, "test.io");
  DepthMap d(17, 9);
  for (double& v : d.values()) v = rng.uniform() < 0.1 ? 0.0 : static_cast<float>(rng.uniform(0.1, 90));
  write_depth(dir / "d.pfm", d);
  EXPECT_EQ(read_depth(dir / "d.pfm"), d);
  EXPECT_EQ(read_depth(dir / "d.pfm", DepthFormat::kPfm), d);
  EXPECT_EQ(slurp(dir / "d.pfm").substr(0, 3), "Pf\n");
}

TEST(Depth, PfmErrors) {
  const fs::path dir = testing::scratch_dir("pfm_errors");
  write_depth(dir / "d.pfm", DepthMap(4, 3, 2.0));
  const std::string bytes = slurp(dir / "d.pfm");
  spit(dir / "magic.pfm", "P5" + bytes.substr(2));
  expect_code(ErrorCode::kBadMagic, [&] { read_depth(dir / "magic.pfm"); });
  spit(dir / "colour.pfm", "PF" + bytes.substr(2));
  expect_code(ErrorCode::kUnsupportedFormat, [&] { read_depth(dir / "colour.pfm"); });
  spit(dir / "short.pfm", bytes.substr(0, bytes.size() - 1));
  expect_code(ErrorCode::kTruncatedFile, [&] { read_depth(dir / "short.pfm"); });
  expect_code(ErrorCode::kUnsupportedFormat, [&] { read_depth(dir / "d.exr"); });
}

TEST(Depth, Png16Convention) {
  const fs::path dir = testing::scratch_dir("png16");
  DepthMap d(4, 2, 0.0);
  d(0, 0) = 100.0;
  d(1, 0) = 1.0 / 256.0;
  d(2, 0) = 300.0;  // beyond 65535 / 256, clamped
  d(3, 0) = 12.5;
  write_depth(dir / "d.png", d);
  const DepthMap back = read_depth(dir / "d.png");
  EXPECT_EQ(back(0, 0), 100.0);  // stored as 25600
  EXPECT_EQ(back(1, 0), 1.0 / 256.0);
  EXPECT_EQ(back(2, 0), 65535.0 / 256.0);
  EXPECT_EQ(back(3, 0), 12.5);
  for (int x = 0; x < 4; ++x) {
    EXPECT_EQ(back(x, 1), 0.0);
    EXPECT_FALSE(back.is_valid(x, 1));
  }
  spit(dir / "junk.png", "not a png at all");
  expect_code(ErrorCode::kUnsupportedFormat, [&] { read_depth(dir / "junk.png"); });
}

TEST(Image, Png16RoundTrip) {
  const fs::path dir = testing::scratch_dir("image");
  for (int channels : {1, 3}) {
    Image im(6, 5, channels);
    CounterRng rng(5, "test.io");
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x)
        for (int c = 0; c < channels; ++c) im(x, y, c) = std::round(rng.uniform() * 65535) / 65535;
    write_image(dir / "i.png", im);
    EXPECT_EQ(read_image(dir / "i.png"), im);
  }
}

Trajectory sample_trajectory() {
  CounterRng rng(6, "test.io");
  Trajectory t;
  for (int i = 0; i < 10; ++i) {
    RigidPose p;
    p.rotation = testing::random_rotation(rng, 3.0);
    p.translation = 20.0 * testing::random_unit(rng);
    t.push_back(0.1 * i + 1e9, p);
  }
  return t;
}

TEST(Trajectory, IdentityRows) {
  Trajectory t;
  t.push_back(0.0, RigidPose::identity());
  std::ostringstream kitti, tum;
  format_trajectory(kitti, t, TrajectoryFormat::kKitti);
  format_trajectory(tum, t, TrajectoryFormat::kTum);
  EXPECT_EQ(kitti.str(), "1 0 0 0 0 1 0 0 0 0 1 0\n");
  EXPECT_EQ(tum.str(), "0.000000 0 0 0 0 0 0 1\n");
}

TEST(Trajectory, RoundTrips) {
  const Trajectory t = sample_trajectory();
  for (auto format : {TrajectoryFormat::kKitti, TrajectoryFormat::kTum}) {
    std::stringstream s;
    format_trajectory(s, t, format);
    const Trajectory back = parse_trajectory(s, format);
    ASSERT_EQ(back.size(), t.size());
    const double tol = format == TrajectoryFormat::kKitti ? 1e-12 : 1e-9;
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_LT((back.poses[i].rotation - t.poses[i].rotation).cwiseAbs().maxCoeff(), tol);
      EXPECT_LT((back.poses[i].translation - t.poses[i].translation).cwiseAbs().maxCoeff(),
                tol * 20);
      if (format == TrajectoryFormat::kKitti) {
        EXPECT_EQ(back.timestamps[i], static_cast<double>(i));
      } else {
        EXPECT_NEAR(back.timestamps[i], t.timestamps[i], 1e-6);
      }
    }
  }
  const fs::path dir = testing::scratch_dir("trajectory");
  write_trajectory(dir / "t.tum", t, TrajectoryFormat::kTum);
  EXPECT_EQ(read_trajectory(dir / "t.tum", trajectory_format_for(dir / "t.tum")).size(), 10u);
  EXPECT_EQ(trajectory_format_for("x.txt"), TrajectoryFormat::kKitti);
  expect_code(ErrorCode::kUnsupportedFormat, [] { trajectory_format_for("x.csv"); });
}

TEST(Trajectory, ParseErrorsNameTheLine) {
  const auto line_of = [](const std::string& text, TrajectoryFormat f) {
    std::istringstream in(text);
    try {
      parse_trajectory(in, f);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError);
      return std::string(e.what());
    }
    ADD_FAILURE() << "no error";
    return std::string();
  };
  EXPECT_NE(line_of("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1\n", TrajectoryFormat::kKitti)
                .find("line 2"),
            std::string::npos);
  EXPECT_NE(line_of("# c\n0 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 0\n", TrajectoryFormat::kTum)
                .find("line 3"),
            std::string::npos);
  EXPECT_NE(line_of("1 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n", TrajectoryFormat::kTum).find("line 2"),
            std::string::npos);
  EXPECT_NE(line_of("1 0 0 x 0 1 0 0 0 0 1 0\n", TrajectoryFormat::kKitti).find("line 1"),
            std::string::npos);
}

TEST(Intrinsics, ParseAndRoundTrip) {
  const CameraIntrinsics K = parse_intrinsics("718.856 718.856 607.1928 185.2157 1241 376\n");
  EXPECT_EQ(K.fx, 718.856);
  EXPECT_EQ(K.cy, 185.2157);
  EXPECT_EQ(K.width, 1241);
  EXPECT_EQ(parse_intrinsics("1 2 3 4").width, 0);
  expect_code(ErrorCode::kParseError, [] { parse_intrinsics("1 2 3"); });
  expect_code(ErrorCode::kParseError, [] { parse_intrinsics("1 2 3 4 5.5 6"); });
  const fs::path dir = testing::scratch_dir("intrinsics");
  write_intrinsics(dir / "k.txt", K);
  const CameraIntrinsics back = read_intrinsics(dir / "k.txt");
  EXPECT_EQ(back.fx, K.fx);
  EXPECT_EQ(back.cx, K.cx);
  EXPECT_EQ(back.height, K.height);
}

TEST(Manifest, RoundTripAndValidation) {
  const fs::path dir = testing::scratch_dir("manifest");
  write_intrinsics(dir / "k.txt", {100, 100, 10, 8, 21, 17});
  for (int i = 0; i < 3; ++i) {
    write_depth(dir / ("d" + std::to_string(i) + ".pfm"), DepthMap(21, 17, 3.0));
    write_flow(dir / ("f" + std::to_string(i) + ".flo"), float_flow(21, 17, i));
  }
  SequenceManifest m;
  m.intrinsics = dir / "k.txt";
  for (int i = 0; i < 3; ++i) {
    SequenceManifest::Frame f;
    if (i < 2) f.flow_fwd = f.flow_bwd = dir / ("f" + std::to_string(i) + ".flo");
    f.depth = dir / ("d" + std::to_string(i) + ".pfm");
    f.timestamp = 0.5 * i;
    m.frames.push_back(f);
  }
  write_manifest(dir / "m.txt", m);
  const std::string text = slurp(dir / "m.txt");
  EXPECT_EQ(text.substr(0, 17), "intrinsics k.txt\n");
  EXPECT_NE(text.find("frame - - d2.pfm 1.000000"), std::string::npos);
  const SequenceManifest back = read_manifest(dir / "m.txt");
  ASSERT_EQ(back.frames.size(), 3u);
  EXPECT_EQ(back.frames[1].flow_fwd, dir / "f1.flo");
  EXPECT_TRUE(back.frames[2].flow_fwd.empty());
  EXPECT_EQ(back.frames[2].timestamp, 1.0);

  spit(dir / "bad.txt", "intrinsics k.txt\nframe f0.flo f0.flo d0.pfm\nbogus line\n");
  try {
    read_manifest(dir / "bad.txt");
    ADD_FAILURE() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  spit(dir / "missing.txt", "intrinsics k.txt\nframe f0.flo f0.flo d0.pfm\nframe - - nope.pfm\n");
  expect_code(ErrorCode::kIoError, [&] { read_manifest(dir / "missing.txt"); });
  spit(dir / "gap.txt", "intrinsics k.txt\nframe - - d0.pfm\nframe - - d1.pfm\n");
  expect_code(ErrorCode::kParseError, [&] { read_manifest(dir / "gap.txt"); });
}

TEST(Config, DefaultsOverridesAndErrors) {
  const Settings defaults;
  EXPECT_EQ(defaults.vo.pose.ransac.threshold, 0.1);
  EXPECT_EQ(defaults.vo.pose.ransac.confidence, 0.99);
  EXPECT_EQ(defaults.vo.pose.num_samples, 6000u);
  EXPECT_EQ(defaults.vo.pose.top_frac, 0.2);
  EXPECT_EQ(defaults.vo.min_flow_px, 2.0);
  EXPECT_EQ(defaults.weights.w4, 0.1);

  const Settings s = parse_config(
      "# tuned\nransac.threshold = 0.25\nloss.w4=0.5  # inline\neval.odom_lengths = 1,2,3\n"
      "eval.median_scaling = false\n");
  EXPECT_EQ(s.vo.pose.ransac.threshold, 0.25);
  EXPECT_EQ(s.weights.w4, 0.5);
  EXPECT_EQ(s.odometry.lengths, (std::vector<double>{1, 2, 3}));
  EXPECT_FALSE(s.depth_eval.median_scaling);
  EXPECT_EQ(parse_config(format_config(s)).vo.pose.ransac.threshold, 0.25);
  EXPECT_EQ(format_config(parse_config(format_config(s))), format_config(s));

  for (const char* bad : {"nonsense.key = 1\n", "ransac.threshold\n", "\nsample.n = -3\n",
                          "ransac.threshold = abc\n"}) {
    try {
      parse_config(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << bad;
      EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << bad;
    }
  }
}

TEST(Ply, WritesValidSamplesOnly) {
  TriangulatedSet set;
  set.samples.resize(3);
  set.samples[0].point = {1, 2, 3};
  set.samples[1].status = TriangulationStatus::kNegativeDepth;
  set.samples[2].point = {0.5, -1, 4};
  const fs::path dir = testing::scratch_dir("ply");
  write_ply(dir / "p.ply", set);
  EXPECT_EQ(slurp(dir / "p.ply"),
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\n"
            "property double z\nend_header\n1 2 3\n0.5 -1 4\n");
}

}  // namespace
}  // namespace flowpose
