#include "cli.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "flowpose/config.h"
#include "flowpose/epipolar.h"
#include "flowpose/error.h"
#include "flowpose/evaluation.h"
#include "flowpose/io.h"
#include "flowpose/losses.h"
#include "flowpose/synthetic.h"
#include "flowpose/vo.h"

namespace flowpose {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 0;
  std::string intrinsics;
  std::string config;
  std::string output;
};

struct PairArgs {
  std::string flow_fwd;
  std::string flow_bwd;
  std::string depth_a;
  std::string depth_b;
  std::string image_a;
  std::string image_b;
};

struct EvalArgs {
  std::string estimate;
  std::string groundtruth;
  std::string format;
  std::string association = "index";
  bool se3 = false;
  bool csv = false;
  std::string pred;
  std::string gt;
  std::string noc;
  double cap = 0.0;
  bool no_median = false;
};

struct SynthArgs {
  std::size_t frames = 10;
  int width = 160;
  int height = 120;
  double focal = 150.0;
  double noise = 0.0;
};

Settings load_settings(const Globals& g) {
  return g.config.empty() ? Settings{} : read_config(g.config);
}

CameraIntrinsics require_intrinsics(const Globals& g) {
  if (g.intrinsics.empty()) {
    throw CLI::RequiredError("--intrinsics");
  }
  return read_intrinsics(g.intrinsics);
}

// Writes to --output when given, else to `out`.
void emit(const Globals& g, std::ostream& out, const std::string& text) {
  if (g.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(g.output, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + g.output);
  f << text;
}

Json matrix_json(const Eigen::Matrix3d& m) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

TrajectoryFormat pick_format(const std::string& flag, const fs::path& path) {
  if (flag == "kitti") return TrajectoryFormat::kKitti;
  if (flag == "tum") return TrajectoryFormat::kTum;
  return trajectory_format_for(path);
}

Association pick_association(const std::string& s) {
  return s == "timestamp" ? Association::kTimestamp : Association::kIndex;
}

std::string render_report(const MetricReport& report, bool csv) {
  return csv ? format_csv(report) : format_table(report);
}

int cmd_pose(const Globals& g, const PairArgs& a, std::ostream& out) {
  const CameraIntrinsics K = require_intrinsics(g);
  Settings s = load_settings(g);
  s.vo.seed = g.seed;
  const FlowField fwd = read_flow(a.flow_fwd);
  const FlowField bwd = read_flow(a.flow_bwd);
  Json j;
  if (a.depth_a.empty()) {
    PoseRecoveryOptions opts = s.vo.pose;
    opts.seed = g.seed;
    const PoseRecovery rec = recover_pose(fwd, bwd, K, opts);
    std::size_t inliers = 0;
    for (char c : rec.ransac_inliers) inliers += c != 0;
    j["method"] = "epipolar";
    j["rotation"] = matrix_json(rec.hypothesis.pose.rotation);
    const Eigen::Vector3d& t = rec.hypothesis.pose.translation;
    j["translation"] = {t.x(), t.y(), t.z()};
    j["scaled"] = false;
    j["samples"] = rec.samples.items.size();
    j["ransac_inliers"] = inliers;
    j["cheirality_support"] = rec.hypothesis.support;
    j["fundamental"] = matrix_json(rec.F.matrix);
  } else {
    const DepthMap depth = read_depth(a.depth_a);
    const PairEstimate est = pair_pose_scaled(fwd, bwd, depth, K, s.vo);
    j["method"] = pair_method_name(est.method);
    j["rotation"] = matrix_json(est.pose.rotation);
    const Eigen::Vector3d& t = est.pose.translation;
    j["translation"] = {t.x(), t.y(), t.z()};
    j["scaled"] = true;
    j["scale"] = est.scale;
    j["cheirality_support"] = est.ransac_inliers;
    j["triangulated_valid"] = est.triangulated_valid;
  }
  emit(g, out, j.dump(2) + "\n");
  return 0;
}

int cmd_triangulate(const Globals& g, const PairArgs& a, std::ostream& out) {
  const CameraIntrinsics K = require_intrinsics(g);
  if (g.output.empty()) throw CLI::RequiredError("--output");
  Settings s = load_settings(g);
  s.vo.seed = g.seed;
  const PairGeometry geo =
      pair_geometry(read_flow(a.flow_fwd), read_flow(a.flow_bwd), K, s.vo);
  write_ply(g.output, geo.triangulated);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& smp : geo.triangulated.samples) {
    ++counts[static_cast<int>(smp.status)];
  }
  out << "samples " << geo.triangulated.samples.size() << "\n"
      << "valid " << counts[0] << "\n"
      << "small_angle " << counts[1] << "\n"
      << "negative_depth " << counts[2] << "\n"
      << "out_of_bounds " << counts[3] << "\n";
  return 0;
}

int cmd_vo(const Globals& g, const std::string& manifest_path,
           const std::string& format, std::ostream& out) {
  if (g.output.empty()) throw CLI::RequiredError("--output");
  Settings s = load_settings(g);
  s.vo.seed = g.seed;
  const SequenceManifest m = read_manifest(manifest_path);
  const CameraIntrinsics K =
      g.intrinsics.empty() ? read_intrinsics(m.intrinsics) : read_intrinsics(g.intrinsics);
  const std::size_t n = m.frames.size();
  auto load = [&](std::size_t i) {
    const auto& f = m.frames[i];
    FrameData d;
    d.depth = read_depth(f.depth);
    if (i + 1 < n) {
      d.flow_fwd = read_flow(f.flow_fwd);
      d.flow_bwd = read_flow(f.flow_bwd);
    }
    d.timestamp = f.timestamp.value_or(static_cast<double>(i));
    return d;
  };
  const SequenceResult res = run_sequence(n, load, K, s.vo);
  write_trajectory(g.output, res.trajectory, pick_format(format, g.output));
  std::size_t flagged = 0;
  for (std::size_t k = 0; k < res.pairs.size(); ++k) {
    const PairEstimate& p = res.pairs[k];
    flagged += p.flagged;
    out << "pair " << k << " " << pair_method_name(p.method) << " flow "
        << format_fixed(p.mean_flow, 3) << " scale " << format_number(p.scale);
    if (p.flagged) out << " flagged " << p.failure;
    out << "\n";
  }
  out << "frames " << n << " flagged " << flagged << "\n";
  return 0;
}

int cmd_eval_traj(const Globals& g, const EvalArgs& a, bool ate,
                  std::ostream& out) {
  const Trajectory est =
      read_trajectory(a.estimate, pick_format(a.format, a.estimate));
  const Trajectory gt =
      read_trajectory(a.groundtruth, pick_format(a.format, a.groundtruth));
  MetricReport report;
  if (ate) {
    const Alignment al =
        sim3_align(est, gt, pick_association(a.association), !a.se3);
    report = {{"ate_rmse", "m", al.rmse},
              {"scale", "", al.transform.scale},
              {"pairs", "count", static_cast<double>(al.matches.size())}};
  } else {
    const Settings s = load_settings(g);
    report = to_report(kitti_odometry_errors(est, gt, s.odometry));
  }
  emit(g, out, render_report(report, a.csv));
  return 0;
}

int cmd_eval_depth(const Globals& g, const EvalArgs& a, std::ostream& out) {
  Settings s = load_settings(g);
  if (a.cap > 0.0) s.depth_eval.cap = a.cap;
  if (a.no_median) s.depth_eval.median_scaling = false;
  const DepthMetrics m =
      depth_metrics(read_depth(a.pred), read_depth(a.gt), s.depth_eval);
  emit(g, out, render_report(to_report(m), a.csv));
  return 0;
}

Mask flow_validity(const FlowField& f) {
  Mask m(f.width(), f.height(), 0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    m[i] = f[i].allFinite() && f[i].cwiseAbs().maxCoeff() < 1e9 ? 1 : 0;
  }
  return m;
}

int cmd_eval_flow(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const FlowField pred = read_flow(a.pred);
  const FlowField gt = read_flow(a.gt);
  const Mask valid = flow_validity(gt);
  Mask noc;
  if (!a.noc.empty()) {
    noc = flow_validity(read_flow(a.noc));
    for (std::size_t i = 0; i < noc.size(); ++i) noc[i] &= valid[i];
  }
  emit(g, out, render_report(to_report(flow_metrics(pred, gt, valid, noc)), a.csv));
  return 0;
}

int cmd_losses(const Globals& g, const PairArgs& a, std::ostream& out) {
  const CameraIntrinsics K = require_intrinsics(g);
  Settings s = load_settings(g);
  s.vo.seed = g.seed;
  const FlowField fwd = read_flow(a.flow_fwd);
  const FlowField bwd = read_flow(a.flow_bwd);
  const PairGeometry geo = pair_geometry(fwd, bwd, K, s.vo);
  const LossInputs in =
      make_loss_inputs(geo, read_image(a.image_a), read_image(a.image_b), fwd,
                       read_depth(a.depth_a), read_depth(a.depth_b), K);
  const LossReport r = total_loss(in, s.weights);
  std::ostringstream text;
  text << "L_f=" << format_number(r.flow) << "\n"
       << "L_d=" << format_number(r.depth) << "\n"
       << "L_pf=" << format_number(r.flow_reprojection) << "\n"
       << "L_pd=" << format_number(r.depth_reprojection) << "\n"
       << "L_s=" << format_number(r.smoothness) << "\n"
       << "total=" << format_number(r.total) << "\n"
       << "scale=" << format_number(r.scale) << "\n"
       << "depth_samples=" << r.depth_samples << "\n"
       << "flow_reprojection_pixels=" << r.flow_reprojection_pixels << "\n"
       << "depth_reprojection_pixels=" << r.depth_reprojection_pixels << "\n"
       << "photometric_pixels=" << r.photometric_pixels << "\n";
  emit(g, out, text.str());
  return 0;
}

std::string frame_name(const char* stem, std::size_t k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu%s", stem, k, ext);
  return buf;
}

int cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
  if (g.output.empty()) throw CLI::RequiredError("--output");
  if (a.frames < 2) throw Error(ErrorCode::kInvalidArgument, "need >= 2 frames");
  const fs::path dir = g.output;
  fs::create_directories(dir);
  SequenceSceneOptions opts;
  opts.seed = g.seed;
  opts.frames = a.frames;
  opts.width = a.width;
  opts.height = a.height;
  opts.focal = a.focal;
  const DenseScene scene = generate_sequence_scene(opts);

  SequenceManifest m;
  m.intrinsics = dir / "intrinsics.txt";
  m.groundtruth = dir / "groundtruth.txt";
  write_intrinsics(m.intrinsics, scene.K);
  write_trajectory(*m.groundtruth, groundtruth_trajectory(scene),
                   TrajectoryFormat::kKitti);

  FrameRender current = render_frame(scene, 0);
  for (std::size_t k = 0; k < a.frames; ++k) {
    SequenceManifest::Frame f;
    f.depth = dir / frame_name("depth", k, ".pfm");
    write_depth(f.depth, current.depth);
    write_image(dir / frame_name("image", k, ".png"), current.image);
    if (k + 1 < a.frames) {
      FrameRender next = render_frame(scene, k + 1);
      RenderOptions ro;
      ro.noise_px = a.noise;
      ro.seed = g.seed + k;
      const DenseObservations obs = render_observations(scene, current, next, ro);
      f.flow_fwd = dir / frame_name("flow_fwd", k, ".flo");
      f.flow_bwd = dir / frame_name("flow_bwd", k, ".flo");
      write_flow(f.flow_fwd, obs.flow_fwd);
      write_flow(f.flow_bwd, obs.flow_bwd);
      current = std::move(next);
    }
    m.frames.push_back(std::move(f));
  }
  write_manifest(dir / "manifest.txt", m);
  out << "wrote " << a.frames << " frames to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Two-view geometry and visual odometry from dense flow",
               "flowpose"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_option("--intrinsics", g.intrinsics, "Intrinsics file 'fx fy cx cy [w h]'");
  app.add_option("--config", g.config, "key=value settings file");
  app.add_option("--output,-o", g.output, "Output file or directory");

  PairArgs pair;
  auto add_flows = [&](CLI::App* sub) {
    sub->add_option("--flow-fwd", pair.flow_fwd, "Flow a->b (.flo)")->required();
    sub->add_option("--flow-bwd", pair.flow_bwd, "Flow b->a (.flo)")->required();
  };

  auto* pose = app.add_subcommand("pose", "Relative pose of an image pair as JSON");
  add_flows(pose);
  pose->add_option("--depth", pair.depth_a, "Depth of frame a; scales the translation");

  auto* tri = app.add_subcommand("triangulate", "Triangulate a pair into a PLY file");
  add_flows(tri);

  std::string manifest, traj_format;
  auto* vo = app.add_subcommand("vo", "Run visual odometry over a manifest");
  vo->add_option("--manifest", manifest, "Sequence manifest")->required();
  vo->add_option("--format", traj_format, "kitti or tum (default: by extension)")
      ->check(CLI::IsMember({"kitti", "tum"}));

  EvalArgs ev;
  auto add_traj = [&](CLI::App* sub) {
    sub->add_option("--estimate", ev.estimate, "Estimated trajectory")->required();
    sub->add_option("--groundtruth", ev.groundtruth, "Groundtruth trajectory")->required();
    sub->add_option("--format", ev.format, "kitti or tum (default: by extension)")
        ->check(CLI::IsMember({"kitti", "tum"}));
    sub->add_flag("--csv", ev.csv, "CSV instead of a table");
  };
  auto* odom = app.add_subcommand("eval-odom", "KITTI t_err / r_err");
  add_traj(odom);
  auto* ate = app.add_subcommand("eval-ate", "Absolute trajectory error after alignment");
  add_traj(ate);
  ate->add_option("--association", ev.association, "index or timestamp")
      ->check(CLI::IsMember({"index", "timestamp"}));
  ate->add_flag("--se3", ev.se3, "Rigid alignment without scale");

  auto* edepth = app.add_subcommand("eval-depth", "Monocular depth metrics");
  edepth->add_option("--pred", ev.pred, "Predicted depth (.pfm/.png)")->required();
  edepth->add_option("--gt", ev.gt, "Groundtruth depth (.pfm/.png)")->required();
  edepth->add_option("--cap", ev.cap, "Depth cap in metres");
  edepth->add_flag("--no-median-scaling", ev.no_median, "Disable median scaling");
  edepth->add_flag("--csv", ev.csv, "CSV instead of a table");

  auto* eflow = app.add_subcommand("eval-flow", "Flow EPE and Fl");
  eflow->add_option("--pred", ev.pred, "Predicted flow (.flo)")->required();
  eflow->add_option("--gt", ev.gt, "Groundtruth flow (.flo)")->required();
  eflow->add_option("--noc", ev.noc, "Non-occluded groundtruth flow (.flo)");
  eflow->add_flag("--csv", ev.csv, "CSV instead of a table");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Write a synthetic sequence");
  synth->add_option("--frames", sy.frames, "Frame count");
  synth->add_option("--width", sy.width, "Image width");
  synth->add_option("--height", sy.height, "Image height");
  synth->add_option("--focal", sy.focal, "Focal length in pixels");
  synth->add_option("--noise", sy.noise, "Gaussian flow noise in pixels");

  auto* losses = app.add_subcommand("losses", "Evaluate every training loss term");
  add_flows(losses);
  losses->add_option("--depth-a", pair.depth_a, "Predicted depth of a")->required();
  losses->add_option("--depth-b", pair.depth_b, "Predicted depth of b")->required();
  losses->add_option("--image-a", pair.image_a, "Image a (.png)")->required();
  losses->add_option("--image-b", pair.image_b, "Image b (.png)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "flowpose: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*pose) return cmd_pose(g, pair, out);
    if (*tri) return cmd_triangulate(g, pair, out);
    if (*vo) return cmd_vo(g, manifest, traj_format, out);
    if (*odom) return cmd_eval_traj(g, ev, false, out);
    if (*ate) return cmd_eval_traj(g, ev, true, out);
    if (*edepth) return cmd_eval_depth(g, ev, out);
    if (*eflow) return cmd_eval_flow(g, ev, out);
    if (*synth) return cmd_synth(g, sy, out);
    if (*losses) return cmd_losses(g, pair, out);
  } catch (const CLI::ParseError& e) {
    err << "flowpose: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "flowpose: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace flowpose
