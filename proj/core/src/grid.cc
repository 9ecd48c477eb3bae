#include "flowpose/grid.h"

#include <algorithm>

namespace flowpose {

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      n += is_valid(x, y) ? 1 : 0;
    }
  }
  return n;
}

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad image dimensions");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

BilinearStencil bilinear_stencil(int width, int height, double x, double y) {
  BilinearStencil s;
  s.x0 = std::min(static_cast<int>(std::floor(x)), width - 2);
  s.y0 = std::min(static_cast<int>(std::floor(y)), height - 2);
  s.ax = x - s.x0;
  s.ay = y - s.y0;
  return s;
}

std::optional<double> sample_depth(const DepthMap& depth, double x, double y) {
  if (depth.width() < 2 || depth.height() < 2 ||
      !in_bilinear_domain(depth.width(), depth.height(), x, y)) {
    return std::nullopt;
  }
  const BilinearStencil s = bilinear_stencil(depth.width(), depth.height(), x, y);
  const double w[4] = {(1.0 - s.ax) * (1.0 - s.ay), s.ax * (1.0 - s.ay),
                       (1.0 - s.ax) * s.ay, s.ax * s.ay};
  const int dx[4] = {0, 1, 0, 1};
  const int dy[4] = {0, 0, 1, 1};
  for (int k = 0; k < 4; ++k) {
    if (w[k] != 0.0 && !depth.is_valid(s.x0 + dx[k], s.y0 + dy[k])) {
      return std::nullopt;
    }
  }
  // Same association order as sample_bilinear so integer lookups are exact.
  auto at = [&](int k) {
    return w[k] != 0.0 ? depth(s.x0 + dx[k], s.y0 + dy[k]) : 0.0;
  };
  const double top = (1.0 - s.ax) * at(0) + s.ax * at(1);
  const double bottom = (1.0 - s.ax) * at(2) + s.ax * at(3);
  return (1.0 - s.ay) * top + s.ay * bottom;
}

bool sample_image(const Image& image, double x, double y,
                  std::span<double> out) {
  if (image.width() < 2 || image.height() < 2 ||
      !in_bilinear_domain(image.width(), image.height(), x, y)) {
    return false;
  }
  const BilinearStencil s = bilinear_stencil(image.width(), image.height(), x, y);
  for (int c = 0; c < image.channels(); ++c) {
    const double top = (1.0 - s.ax) * image(s.x0, s.y0, c) +
                       s.ax * image(s.x0 + 1, s.y0, c);
    const double bottom = (1.0 - s.ax) * image(s.x0, s.y0 + 1, c) +
                          s.ax * image(s.x0 + 1, s.y0 + 1, c);
    out[c] = (1.0 - s.ay) * top + s.ay * bottom;
  }
  return true;
}

}  // namespace flowpose
