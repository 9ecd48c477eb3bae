#ifndef FLOWPOSE_FLOW_H_
#define FLOWPOSE_FLOW_H_

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "flowpose/grid.h"

namespace flowpose {

struct Correspondence {
  Eigen::Vector2d p_a;
  Eigen::Vector2d p_b;
  double weight = 1.0;
};

// Sampled pixel pairs. p_a values are integer pixel centres of image A;
// p_b = p_a + F_ab(p_a). width/height are the size of the source images.
struct CorrespondenceSet {
  std::vector<Correspondence> items;
  int width = 0;
  int height = 0;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  const Correspondence& operator[](std::size_t i) const { return items[i]; }
};

// Forward targets that leave the image get this distance.
inline constexpr double kForwardBackwardCap = 1e3;
inline constexpr double kOcclusionMassThreshold = 0.75;

struct ForwardBackwardScore {
  ScoreMap distance;  // D_fb
  ScoreMap score;     // M_s = 1 / (0.1 + D_fb), in (0, 10]
};

// D_fb(p) = ||F_ab(p) + F_ba(p + F_ab(p))|| with a bilinear lookup of F_ba.
ForwardBackwardScore fb_distance_and_score(const FlowField& flow_ab,
                                           const FlowField& flow_ba);

// Mass received by each pixel of image A when every pixel of B splats 1 to
// p + F_ba(p) with bilinear weights.
ScoreMap range_map(const FlowField& flow_ba);

// Binary visibility: 1 where range_map >= threshold, else 0.
ScoreMap occlusion_mask(const FlowField& flow_ba,
                        double threshold = kOcclusionMassThreshold);

// Restricts to pixels with mask > 0, score > 0 and an in-image forward
// target, keeps the best ceil(top_frac * pool) by (score desc, row-major
// index asc), then draws min(n, kept) of them without replacement from the
// (seed, purpose) stream. Throws kInsufficientCorrespondences when fewer
// than 8 pixels survive the masking.
CorrespondenceSet sample_correspondences(const FlowField& flow_ab,
                                         const ScoreMap& score,
                                         const ScoreMap& mask, double top_frac,
                                         std::size_t n, std::uint64_t seed,
                                         std::string_view purpose = "pose");

// Mean ||F_ab(p)|| over pixels whose forward target stays inside the image
// (0 when there are none).
double mean_flow_magnitude(const FlowField& flow_ab);

bool target_in_image(const FlowField& flow_ab, int x, int y);

}  // namespace flowpose

#endif  // FLOWPOSE_FLOW_H_
