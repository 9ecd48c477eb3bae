#ifndef FLOWPOSE_GRID_H_
#define FLOWPOSE_GRID_H_

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flowpose/error.h"

namespace flowpose {

// Dense row-major 2D array. Pixel (x, y) addresses column x, row y.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T())
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::kInvalidArgument, "negative grid dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool operator==(const Grid& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ScoreMap = Grid<double>;
using Mask = Grid<unsigned char>;
// Per-pixel displacement (u toward +x, v toward +y) in pixels.
using FlowField = Grid<Eigen::Vector2d>;

// Depth in length units; a pixel is valid iff its value is finite and > 0.
// Invalid pixels are stored as 0.
class DepthMap : public Grid<double> {
 public:
  using Grid<double>::Grid;
  DepthMap(Grid<double> g) : Grid<double>(std::move(g)) {}  // NOLINT

  bool is_valid(int x, int y) const {
    const double d = (*this)(x, y);
    return std::isfinite(d) && d > 0.0;
  }
  std::size_t valid_count() const;
};

// Multi-channel image with channel-interleaved storage, values nominally
// in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }

  double& operator()(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double operator()(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  template <typename U>
  bool same_shape(const Grid<U>& g) const {
    return width_ == g.width() && height_ == g.height();
  }
  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ &&
           channels_ == o.channels_;
  }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Bilinear lookups are defined on [0, W-1] x [0, H-1]; anything outside is
// reported as absent and must be masked by the caller.
inline bool in_bilinear_domain(int width, int height, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
}

struct BilinearStencil {
  int x0, y0;
  double ax, ay;  // weight of the +1 neighbour along each axis
};

// Requires in_bilinear_domain. Exact on integer coordinates, including the
// last row/column.
BilinearStencil bilinear_stencil(int width, int height, double x, double y);

template <typename T>
std::optional<T> sample_bilinear(const Grid<T>& g, double x, double y) {
  if (g.width() < 2 || g.height() < 2 ||
      !in_bilinear_domain(g.width(), g.height(), x, y)) {
    return std::nullopt;
  }
  const BilinearStencil s = bilinear_stencil(g.width(), g.height(), x, y);
  const T top = (1.0 - s.ax) * g(s.x0, s.y0) + s.ax * g(s.x0 + 1, s.y0);
  const T bottom =
      (1.0 - s.ax) * g(s.x0, s.y0 + 1) + s.ax * g(s.x0 + 1, s.y0 + 1);
  return T((1.0 - s.ay) * top + s.ay * bottom);
}

// Depth lookup; every neighbour with nonzero weight must be valid.
std::optional<double> sample_depth(const DepthMap& depth, double x, double y);

// Per-channel bilinear sample of an image into `out` (size channels()).
bool sample_image(const Image& image, double x, double y,
                  std::span<double> out);

}  // namespace flowpose

#endif  // FLOWPOSE_GRID_H_
