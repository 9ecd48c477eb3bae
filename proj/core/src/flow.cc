#include "flowpose/flow.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowpose/error.h"
#include "flowpose/random.h"

namespace flowpose {

bool target_in_image(const FlowField& flow_ab, int x, int y) {
  const Eigen::Vector2d& f = flow_ab(x, y);
  return in_bilinear_domain(flow_ab.width(), flow_ab.height(), x + f.x(),
                            y + f.y());
}

ForwardBackwardScore fb_distance_and_score(const FlowField& flow_ab,
                                           const FlowField& flow_ba) {
  if (!flow_ab.same_shape(flow_ba)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "forward and backward flows differ in size");
  }
  const int w = flow_ab.width();
  const int h = flow_ab.height();
  ForwardBackwardScore out{ScoreMap(w, h), ScoreMap(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d& f = flow_ab(x, y);
      double d = kForwardBackwardCap;
      if (const auto back = sample_bilinear(flow_ba, x + f.x(), y + f.y())) {
        d = (f + *back).norm();
      }
      out.distance(x, y) = d;
      out.score(x, y) = 1.0 / (0.1 + d);
    }
  }
  return out;
}

ScoreMap range_map(const FlowField& flow_ba) {
  const int w = flow_ba.width();
  const int h = flow_ba.height();
  ScoreMap mass(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tx = x + flow_ba(x, y).x();
      const double ty = y + flow_ba(x, y).y();
      const double fx = std::floor(tx);
      const double fy = std::floor(ty);
      // Skip targets too far away to touch the image at all.
      if (!(fx >= -1.0 && fy >= -1.0 && fx <= w - 1 && fy <= h - 1)) continue;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const double ax = tx - fx;
      const double ay = ty - fy;
      const double weights[4] = {(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay),
                                 (1.0 - ax) * ay, ax * ay};
      const int dx[4] = {0, 1, 0, 1};
      const int dy[4] = {0, 0, 1, 1};
      for (int k = 0; k < 4; ++k) {
        if (mass.contains(x0 + dx[k], y0 + dy[k])) {
          mass(x0 + dx[k], y0 + dy[k]) += weights[k];
        }
      }
    }
  }
  return mass;
}

ScoreMap occlusion_mask(const FlowField& flow_ba, double threshold) {
  ScoreMap mask = range_map(flow_ba);
  for (double& m : mask.values()) m = m >= threshold ? 1.0 : 0.0;
  return mask;
}

CorrespondenceSet sample_correspondences(const FlowField& flow_ab,
                                         const ScoreMap& score,
                                         const ScoreMap& mask, double top_frac,
                                         std::size_t n, std::uint64_t seed,
                                         std::string_view purpose) {
  if (!flow_ab.same_shape(score) || !flow_ab.same_shape(mask)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "flow, score and mask must share dimensions");
  }
  if (!(top_frac > 0.0 && top_frac <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "top_frac must be in (0, 1]");
  }
  if (n < 8) {
    throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 8");
  }

  std::vector<std::size_t> pool;
  pool.reserve(flow_ab.size());
  for (int y = 0; y < flow_ab.height(); ++y) {
    for (int x = 0; x < flow_ab.width(); ++x) {
      const std::size_t i = flow_ab.index(x, y);
      if (mask[i] > 0.0 && score[i] > 0.0 && std::isfinite(score[i]) &&
          target_in_image(flow_ab, x, y)) {
        pool.push_back(i);
      }
    }
  }
  if (pool.size() < 8) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                std::to_string(pool.size()) + " pixels survive masking");
  }

  std::size_t keep = static_cast<std::size_t>(
      std::ceil(top_frac * static_cast<double>(pool.size())));
  keep = std::clamp<std::size_t>(keep, 8, pool.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  };
  std::partial_sort(pool.begin(), pool.begin() + keep, pool.end(), better);
  pool.resize(keep);

  CounterRng rng(seed, purpose);
  const std::vector<std::size_t> picks =
      sample_without_replacement(pool.size(), n, rng);

  CorrespondenceSet set;
  set.width = flow_ab.width();
  set.height = flow_ab.height();
  set.items.reserve(picks.size());
  for (const std::size_t k : picks) {
    const std::size_t i = pool[k];
    const int x = static_cast<int>(i % flow_ab.width());
    const int y = static_cast<int>(i / flow_ab.width());
    const Eigen::Vector2d p_a(x, y);
    set.items.push_back({p_a, p_a + flow_ab[i], score[i]});
  }
  return set;
}

double mean_flow_magnitude(const FlowField& flow_ab) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < flow_ab.height(); ++y) {
    for (int x = 0; x < flow_ab.width(); ++x) {
      if (!target_in_image(flow_ab, x, y)) continue;
      sum += flow_ab(x, y).norm();
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace flowpose
