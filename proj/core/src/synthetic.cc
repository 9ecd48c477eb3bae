#include "flowpose/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowpose/error.h"
#include "flowpose/random.h"

namespace flowpose {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Vector3d random_unit(CounterRng& rng) {
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
  } while (v.norm() < 1e-6);
  return v.normalized();
}

Eigen::Vector2d uniform_pixel(CounterRng& rng, const CameraIntrinsics& K) {
  return {rng.uniform(0.0, K.width), rng.uniform(0.0, K.height)};
}

bool inside_image(const Eigen::Vector2d& p, const CameraIntrinsics& K) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < K.width && p.y() < K.height;
}

std::vector<Bump> random_waves(CounterRng& rng, int count, double amplitude,
                               double min_wavelength, double max_wavelength) {
  std::vector<Bump> out;
  for (int i = 0; i < count; ++i) {
    const double wavelength = rng.uniform(min_wavelength, max_wavelength);
    const double heading = rng.uniform(0.0, kTwoPi);
    Bump b;
    b.amplitude = amplitude * rng.uniform(0.6, 1.0);
    b.kx = kTwoPi / wavelength * std::cos(heading);
    b.ky = kTwoPi / wavelength * std::sin(heading);
    b.phase = rng.uniform(0.0, kTwoPi);
    out.push_back(b);
  }
  return out;
}

double wave_sum(const std::vector<Bump>& waves, double x, double y) {
  double v = 0.0;
  for (const auto& w : waves) v += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
  return v;
}

Eigen::Vector3d object_offset(const MovingObject& obj, std::size_t frame) {
  return obj.velocity * static_cast<double>(frame);
}

// First root of o.z + l d.z - f(o.xy + l d.xy) along the ray.
std::optional<double> intersect_surface(const HeightField& surface,
                                        const Eigen::Vector3d& o,
                                        const Eigen::Vector3d& d) {
  if (!(d.z() > 1e-12)) return std::nullopt;
  const double dev = surface.max_deviation();
  if (dev == 0.0) {
    const double l = (surface.z0 - o.z()) / d.z();
    if (!(l > 0.0)) return std::nullopt;
    return l;
  }
  auto g = [&](double l) {
    return o.z() + l * d.z() - surface(o.x() + l * d.x(), o.y() + l * d.y());
  };
  const double lo = std::max(0.0, (surface.z0 - dev - o.z()) / d.z());
  const double hi = (surface.z0 + dev - o.z()) / d.z();
  if (!(hi > lo)) return std::nullopt;
  if (g(lo) >= 0.0) return std::nullopt;

  constexpr int kMarch = 24;
  double a = lo;
  double ga = g(lo);
  double b = hi;
  double gb = g(hi);
  for (int k = 1; k <= kMarch; ++k) {
    const double l = lo + (hi - lo) * k / kMarch;
    const double gl = g(l);
    if (gl >= 0.0) {
      b = l;
      gb = gl;
      break;
    }
    a = l;
    ga = gl;
  }
  if (gb < 0.0) return std::nullopt;

  double x = a - ga * (b - a) / (gb - ga);
  for (int iter = 0; iter < 100; ++iter) {
    const double gx = g(x);
    if (gx == 0.0) break;
    if (gx < 0.0) a = x; else b = x;
    const Eigen::Vector3d p = o + x * d;
    const double slope = d.z() - surface.gradient(p.x(), p.y()).dot(d.head<2>());
    double next = x - gx / slope;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 1e-15 * std::abs(x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double texture_value(const DenseScene& scene, const Eigen::Vector3d& world,
                     bool on_object, std::size_t frame) {
  Eigen::Vector3d p = world;
  if (on_object && scene.object) p -= object_offset(*scene.object, frame);
  if (scene.texture == TextureKind::kLinear) {
    return 0.5 + 0.02 * p.x() + 0.015 * p.y() + (on_object ? 0.1 : 0.0);
  }
  return 0.5 + wave_sum(scene.texture_waves, p.x() + (on_object ? 0.37 : 0.0),
                        p.y());
}

}  // namespace

double HeightField::operator()(double x, double y) const {
  return z0 + wave_sum(bumps, x, y);
}

Eigen::Vector2d HeightField::gradient(double x, double y) const {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (const auto& b : bumps) {
    const double c = b.amplitude * std::cos(b.kx * x + b.ky * y + b.phase);
    g += c * Eigen::Vector2d(b.kx, b.ky);
  }
  return g;
}

double HeightField::max_deviation() const {
  double d = 0.0;
  for (const auto& b : bumps) d += std::abs(b.amplitude);
  return d;
}

SparseScene generate_scene(const SparseSceneOptions& options) {
  options.K.validate();
  if (options.n_points < 8) {
    throw Error(ErrorCode::kInvalidArgument, "a scene needs >= 8 points");
  }
  if (!(options.min_depth > 0.0) || !(options.max_depth >= options.min_depth)) {
    throw Error(ErrorCode::kInvalidArgument, "bad depth range");
  }
  if (!std::isfinite(options.baseline) || !std::isfinite(options.rotation) ||
      options.outlier_frac < 0.0 || options.outlier_frac > 1.0 ||
      options.noise_px < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "bad scene magnitudes");
  }
  if (options.K.width <= 0 || options.K.height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "scene intrinsics need a size");
  }

  SparseScene scene;
  scene.seed = options.seed;
  scene.K = options.K;
  CounterRng pose_rng(options.seed, "scene.pose");
  scene.pose_ab.rotation =
      exp_so3(options.rotation * random_unit(pose_rng));
  scene.pose_ab.translation = options.baseline * random_unit(pose_rng);

  CounterRng point_rng(options.seed, "scene.points");
  scene.exact.width = scene.observed.width = options.K.width;
  scene.exact.height = scene.observed.height = options.K.height;
  for (std::size_t i = 0; i < options.n_points; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const Eigen::Vector2d pa = uniform_pixel(point_rng, options.K);
      const double z = point_rng.uniform(options.min_depth, options.max_depth);
      const Eigen::Vector3d X = unproject(pa, z, options.K);
      const Eigen::Vector3d Xb = scene.pose_ab * X;
      if (!(Xb.z() > 0.0)) continue;
      // Difference of projections, so a static camera gives exactly p_a.
      const Eigen::Vector2d pb = pa + (project(Xb, options.K) - project(X, options.K));
      if (!inside_image(pb, options.K)) continue;
      scene.points.push_back(X);
      scene.exact.items.push_back({pa, pb, 1.0});
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::kInfeasibleFrustum,
                  "no placement visible in both cameras");
    }
  }

  scene.observed.items = scene.exact.items;
  scene.is_outlier.assign(options.n_points, 0);
  CounterRng noise_rng(options.seed, "scene.noise");
  if (options.noise_px > 0.0) {
    for (auto& c : scene.observed.items) {
      c.p_b.x() += options.noise_px * noise_rng.gaussian();
      c.p_b.y() += options.noise_px * noise_rng.gaussian();
    }
  }
  const auto n_out = static_cast<std::size_t>(
      std::llround(options.outlier_frac * static_cast<double>(options.n_points)));
  CounterRng outlier_rng(options.seed, "scene.outliers");
  for (std::size_t idx :
       sample_without_replacement(options.n_points, n_out, outlier_rng)) {
    scene.observed.items[idx].p_b = uniform_pixel(outlier_rng, options.K);
    scene.is_outlier[idx] = 1;
  }
  return scene;
}

DenseScene generate_dense_scene(const DenseSceneOptions& options) {
  DenseScene scene;
  scene.seed = options.seed;
  scene.K = {options.focal, options.focal, 0.5 * (options.width - 1),
             0.5 * (options.height - 1), options.width, options.height};
  scene.K.validate();
  scene.texture = options.texture;
  CounterRng rng(options.seed, "dense.surface");
  scene.surface.z0 = options.z0;
  scene.surface.bumps =
      random_waves(rng, options.num_bumps,
                   options.bump_amplitude /
                       std::sqrt(static_cast<double>(std::max(1, options.num_bumps))),
                   0.4 * options.z0, 0.8 * options.z0);
  CounterRng tex_rng(options.seed, "dense.texture");
  scene.texture_waves = random_waves(tex_rng, 3, 0.14, 0.5, 2.0);

  CounterRng pose_rng(options.seed, "dense.pose");
  RigidPose t01;
  t01.rotation = exp_so3(options.rotation * random_unit(pose_rng));
  const double heading = pose_rng.uniform(0.0, kTwoPi);
  const Eigen::Vector3d dir(std::cos(heading), std::sin(heading),
                            pose_rng.uniform(-0.3, 0.3));
  t01.translation = options.baseline * dir.normalized();
  scene.cameras = {RigidPose::identity(), invert(t01)};

  if (options.moving_object) {
    MovingObject obj;
    obj.z = 0.6 * options.z0;
    const double half = 0.2 * obj.z * options.width / options.focal;
    obj.x0 = -half;
    obj.x1 = half;
    obj.y0 = -0.75 * half;
    obj.y1 = 0.75 * half;
    obj.velocity = Eigen::Vector3d(0.4 * options.baseline,
                                   0.3 * options.baseline, 0.0);
    scene.object = obj;
  }
  return scene;
}

DenseScene generate_sequence_scene(const SequenceSceneOptions& options) {
  DenseScene scene;
  scene.seed = options.seed;
  scene.K = {options.focal, options.focal, 0.5 * (options.width - 1),
             0.5 * (options.height - 1), options.width, options.height};
  scene.K.validate();
  CounterRng rng(options.seed, "sequence.surface");
  scene.surface.z0 = options.z0;
  scene.surface.bumps = random_waves(rng, 4, 0.9, 3.0, 8.0);
  CounterRng tex_rng(options.seed, "sequence.texture");
  scene.texture_waves = random_waves(tex_rng, 3, 0.14, 0.4, 1.5);
  // Every offset vanishes at k = 0, so the first camera is the identity.
  for (std::size_t k = 0; k < options.frames; ++k) {
    const double s = static_cast<double>(k);
    RigidPose c;
    c.translation = Eigen::Vector3d(options.step * s, 0.3 * std::sin(0.15 * s),
                                    0.5 * std::sin(0.2 * s));
    const double yaw = 0.05 * std::sin(0.1 * s);
    const double pitch = 0.02 * std::sin(0.13 * s);
    c.rotation = exp_so3(Eigen::Vector3d(0.0, yaw, 0.0)) *
                 exp_so3(Eigen::Vector3d(pitch, 0.0, 0.0));
    scene.cameras.push_back(c);
  }
  return scene;
}

std::optional<RayHit> cast_ray(const DenseScene& scene, std::size_t frame,
                               const Eigen::Vector2d& pixel) {
  const RigidPose& cam = scene.cameras.at(frame);
  const Eigen::Vector3d o = cam.translation;
  const Eigen::Vector3d d = cam.rotation * pixel_ray(pixel, scene.K);
  std::optional<RayHit> hit;
  if (const auto l = intersect_surface(scene.surface, o, d)) {
    hit = RayHit{*l, o + *l * d, false};
  }
  if (scene.object && d.z() > 1e-12) {
    const MovingObject& obj = *scene.object;
    const Eigen::Vector3d off = object_offset(obj, frame);
    const double l = (obj.z + off.z() - o.z()) / d.z();
    if (l > 0.0 && (!hit || l < hit->depth)) {
      const Eigen::Vector3d p = o + l * d - off;
      if (p.x() >= obj.x0 && p.x() <= obj.x1 && p.y() >= obj.y0 &&
          p.y() <= obj.y1) {
        hit = RayHit{l, o + l * d, true};
      }
    }
  }
  return hit;
}

FrameRender render_frame(const DenseScene& scene, std::size_t frame,
                         bool with_image) {
  const int w = scene.K.width;
  const int h = scene.K.height;
  FrameRender out;
  out.frame = frame;
  out.depth = DepthMap(w, h, 0.0);
  out.world.assign(static_cast<std::size_t>(w) * h, Eigen::Vector3d::Zero());
  out.on_object = Mask(w, h, 0);
  if (with_image) out.image = Image(w, h, 1, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto hit = cast_ray(scene, frame, Eigen::Vector2d(x, y));
      if (!hit) continue;
      out.depth(x, y) = hit->depth;
      out.world[out.depth.index(x, y)] = hit->world;
      out.on_object(x, y) = hit->on_object ? 1 : 0;
      if (with_image) {
        out.image(x, y, 0) = texture_value(scene, hit->world, hit->on_object, frame);
      }
    }
  }
  return out;
}

DepthMap render_depth(const DenseScene& scene, std::size_t frame) {
  return render_frame(scene, frame, false).depth;
}

Image render_image(const DenseScene& scene, std::size_t frame) {
  return render_frame(scene, frame, true).image;
}

RigidPose relative_pose(const DenseScene& scene, std::size_t i, std::size_t j) {
  return compose(invert(scene.cameras.at(j)), scene.cameras.at(i));
}

namespace {

// Flow from `from` into frame `to` plus its visibility map.
void transfer_flow(const DenseScene& scene, const FrameRender& from,
                   const FrameRender& to, FlowField& flow, ScoreMap& visible) {
  const int w = scene.K.width;
  const int h = scene.K.height;
  flow = FlowField(w, h, Eigen::Vector2d::Zero());
  visible = ScoreMap(w, h, 0.0);
  const RigidPose world_to_cam = invert(scene.cameras.at(to.frame));
  const RigidPose world_to_from = invert(scene.cameras.at(from.frame));
  const double dt = static_cast<double>(to.frame) - static_cast<double>(from.frame);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!from.depth.is_valid(x, y)) continue;
      const Eigen::Vector3d X0 = from.world[from.depth.index(x, y)];
      Eigen::Vector3d X = X0;
      if (from.on_object(x, y)) X += scene.object->velocity * dt;
      const Eigen::Vector3d Xc = world_to_cam * X;
      if (!(Xc.z() > 0.0)) continue;
      // Difference of projections: exactly zero for a static point seen
      // from the same camera.
      flow(x, y) = project(Xc, scene.K) - project(world_to_from * X0, scene.K);
      const Eigen::Vector2d q = Eigen::Vector2d(x, y) + flow(x, y);
      const auto d = sample_depth(to.depth, q.x(), q.y());
      if (d && std::abs(*d - Xc.z()) <= 1e-3 * Xc.z()) visible(x, y) = 1.0;
    }
  }
}

void corrupt(FlowField& flow, const CameraIntrinsics& K,
             const RenderOptions& options, std::string_view purpose) {
  const std::string base(purpose);
  if (options.noise_px > 0.0) {
    CounterRng rng(options.seed, base + ".noise");
    for (auto& f : flow.values()) {
      f.x() += options.noise_px * rng.gaussian();
      f.y() += options.noise_px * rng.gaussian();
    }
  }
  if (options.outlier_frac > 0.0) {
    CounterRng rng(options.seed, base + ".outliers");
    const auto n = static_cast<std::size_t>(
        std::llround(options.outlier_frac * static_cast<double>(flow.size())));
    for (std::size_t idx : sample_without_replacement(flow.size(), n, rng)) {
      const int x = static_cast<int>(idx % flow.width());
      const int y = static_cast<int>(idx / flow.width());
      flow[idx] = uniform_pixel(rng, K) - Eigen::Vector2d(x, y);
    }
  }
}

}  // namespace

DenseObservations render_observations(const DenseScene& scene,
                                      const FrameRender& fi,
                                      const FrameRender& fj,
                                      const RenderOptions& options) {
  DenseObservations out;
  transfer_flow(scene, fi, fj, out.flow_fwd, out.occlusion);
  transfer_flow(scene, fj, fi, out.flow_bwd, out.occlusion_bwd);
  corrupt(out.flow_fwd, scene.K, options, "render.fwd");
  corrupt(out.flow_bwd, scene.K, options, "render.bwd");
  out.depth_i = fi.depth;
  out.depth_j = fj.depth;
  out.object_mask = fi.on_object;
  out.image_i = fi.image;
  out.image_j = fj.image;
  out.pose_ij = relative_pose(scene, fi.frame, fj.frame);
  return out;
}

DenseObservations render_observations(const DenseScene& scene, std::size_t i,
                                      std::size_t j,
                                      const RenderOptions& options) {
  return render_observations(scene, render_frame(scene, i),
                             render_frame(scene, j), options);
}

Trajectory groundtruth_trajectory(const DenseScene& scene) {
  Trajectory t;
  for (std::size_t k = 0; k < scene.cameras.size(); ++k) {
    t.push_back(static_cast<double>(k), scene.cameras[k]);
  }
  return t;
}

}  // namespace flowpose
