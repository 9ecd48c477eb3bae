#include "flowpose/io.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "flowpose/error.h"

namespace flowpose {
namespace fs = std::filesystem;
namespace {

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p, bool little = true) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(p[i]));
    v |= little ? byte << (8 * i) : byte << (8 * (3 - i));
  }
  return v;
}

void put_f32(std::string& buf, double v) {
  put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

float get_f32(const char* p, bool little = true) {
  return std::bit_cast<float>(get_u32(p, little));
}

double parse_double(std::string_view token, const std::string& where) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw Error(ErrorCode::kParseError,
                where + ": bad number '" + std::string(token) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string lowercase_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// PNG access through libpng's classic interface so 16-bit samples are
// passed through without gamma handling.
struct PngPixels {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;
};

PngPixels read_png(const fs::path& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    std::fclose(fp);
    throw Error(ErrorCode::kUnsupportedFormat, path.string() + " is not a PNG");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::kIoError, "libpng initialisation failed");
  }
  PngPixels out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::kTruncatedFile, "corrupt PNG " + path.string());
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = out.bit_depth == 16
                         ? static_cast<std::uint16_t>((buffer[2 * i] << 8) |
                                                      buffer[2 * i + 1])
                         : buffer[i];
  }
  return out;
}

void write_png16(const fs::path& path, int width, int height, int channels,
                 const std::vector<std::uint16_t>& samples) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::kIoError, "libpng initialisation failed");
  }
  std::vector<unsigned char> buffer(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    buffer[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
    buffer[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xff);
  }
  std::vector<png_bytep> rows(height);
  const std::size_t stride = static_cast<std::size_t>(width) * channels * 2;
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::kIoError, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 16,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

DepthMap read_pfm(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.data() + start, pos - start);
  };
  const std::string magic = token();
  if (magic == "PF") {
    throw Error(ErrorCode::kUnsupportedFormat, "colour PFM is not a depth map");
  }
  if (magic != "Pf") {
    throw Error(ErrorCode::kBadMagic, path.string() + " is not a PFM file");
  }
  const std::string w_str = token();
  const std::string h_str = token();
  const std::string s_str = token();
  if (s_str.empty()) throw Error(ErrorCode::kTruncatedFile, "PFM header cut short");
  ++pos;  // single whitespace byte before the raster
  const double w = parse_double(w_str, path.string());
  const double h = parse_double(h_str, path.string());
  const double scale = parse_double(s_str, path.string());
  if (!(w >= 0) || !(h >= 0) || w != std::floor(w) || h != std::floor(h) ||
      scale == 0.0) {
    throw Error(ErrorCode::kParseError, "bad PFM header in " + path.string());
  }
  const int width = static_cast<int>(w);
  const int height = static_cast<int>(h);
  const bool little = scale < 0.0;
  const std::size_t need = static_cast<std::size_t>(width) * height * 4;
  if (pos > bytes.size() || bytes.size() - pos < need) {
    throw Error(ErrorCode::kTruncatedFile, "PFM raster cut short");
  }
  DepthMap depth(width, height, 0.0);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      const float v = get_f32(bytes.data() + pos, little);
      pos += 4;
      depth(x, y) = std::isfinite(v) && v > 0.0f ? static_cast<double>(v) : 0.0;
    }
  }
  return depth;
}

void write_pfm(const fs::path& path, const DepthMap& depth) {
  std::string buf = "Pf\n" + std::to_string(depth.width()) + " " +
                    std::to_string(depth.height()) + "\n-1\n";
  buf.reserve(buf.size() + depth.size() * 4);
  for (int row = 0; row < depth.height(); ++row) {
    const int y = depth.height() - 1 - row;
    for (int x = 0; x < depth.width(); ++x) {
      put_f32(buf, depth.is_valid(x, y) ? depth(x, y) : 0.0);
    }
  }
  auto out = open_out(path, true);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v + 0.0);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[512];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v + 0.0, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

FlowField read_flow(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  if (bytes.size() < 12) throw Error(ErrorCode::kTruncatedFile, "flow header cut short");
  if (get_f32(bytes.data()) != kFloMagic) {
    throw Error(ErrorCode::kBadMagic, path.string() + " has no .flo magic");
  }
  const auto w = static_cast<std::int32_t>(get_u32(bytes.data() + 4));
  const auto h = static_cast<std::int32_t>(get_u32(bytes.data() + 8));
  if (w < 0 || h < 0) throw Error(ErrorCode::kParseError, "negative flow size");
  const std::size_t need = static_cast<std::size_t>(w) * h * 8;
  if (bytes.size() - 12 < need) {
    throw Error(ErrorCode::kTruncatedFile, "flow raster cut short");
  }
  FlowField flow(w, h);
  const char* p = bytes.data() + 12;
  for (std::size_t i = 0; i < flow.size(); ++i, p += 8) {
    flow[i] = Eigen::Vector2d(get_f32(p), get_f32(p + 4));
  }
  return flow;
}

void write_flow(const fs::path& path, const FlowField& flow) {
  std::string buf;
  buf.reserve(12 + flow.size() * 8);
  put_u32(buf, std::bit_cast<std::uint32_t>(kFloMagic));
  put_u32(buf, static_cast<std::uint32_t>(flow.width()));
  put_u32(buf, static_cast<std::uint32_t>(flow.height()));
  for (const auto& f : flow.values()) {
    put_f32(buf, f.x());
    put_f32(buf, f.y());
  }
  auto out = open_out(path, true);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

static DepthFormat depth_format_for(const fs::path& path) {
  const std::string ext = lowercase_extension(path);
  if (ext == ".pfm") return DepthFormat::kPfm;
  if (ext == ".png") return DepthFormat::kPng16;
  throw Error(ErrorCode::kUnsupportedFormat,
              "unknown depth extension '" + ext + "'");
}

DepthMap read_depth(const fs::path& path) {
  return read_depth(path, depth_format_for(path));
}

void write_depth(const fs::path& path, const DepthMap& depth) {
  write_depth(path, depth, depth_format_for(path));
}

DepthMap read_depth(const fs::path& path, DepthFormat format) {
  if (format == DepthFormat::kPfm) return read_pfm(path);
  const PngPixels png = read_png(path);
  if (png.channels != 1 || png.bit_depth != 16) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "depth PNG must be 16-bit grayscale");
  }
  DepthMap depth(png.width, png.height, 0.0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    depth[i] = png.samples[i] / 256.0;
  }
  return depth;
}

void write_depth(const fs::path& path, const DepthMap& depth,
                 DepthFormat format) {
  if (format == DepthFormat::kPfm) {
    write_pfm(path, depth);
    return;
  }
  std::vector<std::uint16_t> samples(depth.size(), 0);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double v = std::round(depth(x, y) * 256.0);
      samples[depth.index(x, y)] =
          static_cast<std::uint16_t>(std::clamp(v, 1.0, 65535.0));
    }
  }
  write_png16(path, depth.width(), depth.height(), 1, samples);
}

Image read_image(const fs::path& path) {
  const PngPixels png = read_png(path);
  Image image(png.width, png.height, png.channels, 0.0);
  const double full = png.bit_depth == 16 ? 65535.0 : 255.0;
  std::size_t i = 0;
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      for (int c = 0; c < png.channels; ++c) image(x, y, c) = png.samples[i++] / full;
    }
  }
  return image;
}

void write_image(const fs::path& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw Error(ErrorCode::kUnsupportedFormat, "PNG images need 1 or 3 channels");
  }
  std::vector<std::uint16_t> samples;
  samples.reserve(static_cast<std::size_t>(image.width()) * image.height() *
                  image.channels());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        const double v = std::clamp(image(x, y, c), 0.0, 1.0);
        samples.push_back(static_cast<std::uint16_t>(std::lround(v * 65535.0)));
      }
    }
  }
  write_png16(path, image.width(), image.height(), image.channels(), samples);
}

Trajectory parse_trajectory(std::istream& in, TrajectoryFormat format) {
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    std::vector<double> v;
    for (auto t : tokens) v.push_back(parse_double(t, where));
    RigidPose pose;
    double stamp = 0.0;
    if (format == TrajectoryFormat::kKitti) {
      if (v.size() != 12) {
        throw Error(ErrorCode::kParseError, where + ": expected 12 values");
      }
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose.rotation(r, c) = v[4 * r + c];
        pose.translation(r) = v[4 * r + 3];
      }
      stamp = static_cast<double>(traj.size());
    } else {
      if (v.size() != 8) {
        throw Error(ErrorCode::kParseError, where + ": expected 8 values");
      }
      stamp = v[0];
      pose.translation = Eigen::Vector3d(v[1], v[2], v[3]);
      Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
      if (!(q.norm() > 0.0)) {
        throw Error(ErrorCode::kParseError, where + ": zero quaternion");
      }
      pose.rotation = q.normalized().toRotationMatrix();
    }
    if (!traj.empty() && !(stamp > traj.timestamps.back())) {
      throw Error(ErrorCode::kParseError, where + ": timestamps must increase");
    }
    traj.push_back(stamp, pose);
  }
  return traj;
}

void format_trajectory(std::ostream& out, const Trajectory& traj,
                       TrajectoryFormat format) {
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const RigidPose& p = traj.poses[i];
    std::string line;
    if (format == TrajectoryFormat::kKitti) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
          if (!line.empty()) line += ' ';
          line += format_number(c < 3 ? p.rotation(r, c) : p.translation(r));
        }
      }
    } else {
      Eigen::Quaterniond q(p.rotation);
      q.normalize();
      if (q.w() < 0.0) q.coeffs() = -q.coeffs();
      line = format_fixed(traj.timestamps[i], 6);
      for (double v : {p.translation.x(), p.translation.y(), p.translation.z(),
                       q.x(), q.y(), q.z(), q.w()}) {
        line += ' ';
        line += format_number(v);
      }
    }
    out << line << '\n';
  }
}

Trajectory read_trajectory(const fs::path& path, TrajectoryFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return parse_trajectory(in, format);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kParseError) throw;
    throw Error(ErrorCode::kParseError, path.string() + " " + e.what());
  }
}

void write_trajectory(const fs::path& path, const Trajectory& traj,
                      TrajectoryFormat format) {
  auto out = open_out(path, false);
  format_trajectory(out, traj, format);
}

TrajectoryFormat trajectory_format_for(const fs::path& path) {
  const std::string ext = lowercase_extension(path);
  if (ext == ".tum") return TrajectoryFormat::kTum;
  if (ext == ".txt" || ext == ".kitti") return TrajectoryFormat::kKitti;
  throw Error(ErrorCode::kUnsupportedFormat,
              "unknown trajectory extension '" + ext + "'");
}

CameraIntrinsics parse_intrinsics(const std::string& text) {
  const auto tokens = split_ws(text);
  if (tokens.size() != 4 && tokens.size() != 6) {
    throw Error(ErrorCode::kParseError,
                "intrinsics need 'fx fy cx cy [width height]'");
  }
  std::vector<double> v;
  for (auto t : tokens) v.push_back(parse_double(t, "intrinsics"));
  CameraIntrinsics K{v[0], v[1], v[2], v[3], 0, 0};
  if (v.size() == 6) {
    if (v[4] != std::floor(v[4]) || v[5] != std::floor(v[5])) {
      throw Error(ErrorCode::kParseError, "image size must be integral");
    }
    K.width = static_cast<int>(v[4]);
    K.height = static_cast<int>(v[5]);
  }
  K.validate();
  return K;
}

CameraIntrinsics read_intrinsics(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  return parse_intrinsics(std::string(bytes.begin(), bytes.end()));
}

void write_intrinsics(const fs::path& path, const CameraIntrinsics& K) {
  auto out = open_out(path, false);
  out << format_number(K.fx) << ' ' << format_number(K.fy) << ' '
      << format_number(K.cx) << ' ' << format_number(K.cy);
  if (K.width > 0 && K.height > 0) out << ' ' << K.width << ' ' << K.height;
  out << '\n';
}

SequenceManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](std::string_view p) {
    const fs::path q{std::string(p)};
    return q.is_absolute() ? q : base / q;
  };
  SequenceManifest m;
  std::string line;
  std::size_t line_no = 0;
  bool have_intrinsics = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (tok[0] == "intrinsics" && tok.size() == 2) {
      m.intrinsics = resolve(tok[1]);
      have_intrinsics = true;
    } else if (tok[0] == "groundtruth" && tok.size() == 2) {
      m.groundtruth = resolve(tok[1]);
    } else if (tok[0] == "frame" && (tok.size() == 4 || tok.size() == 5)) {
      SequenceManifest::Frame f;
      if (tok[1] != "-") f.flow_fwd = resolve(tok[1]);
      if (tok[2] != "-") f.flow_bwd = resolve(tok[2]);
      f.depth = resolve(tok[3]);
      if (tok.size() == 5) f.timestamp = parse_double(tok[4], where);
      m.frames.push_back(std::move(f));
    } else {
      throw Error(ErrorCode::kParseError,
                  where + ": unrecognised directive '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_intrinsics) {
    throw Error(ErrorCode::kParseError, path.string() + ": no intrinsics line");
  }
  if (m.frames.size() < 2) {
    throw Error(ErrorCode::kParseError, path.string() + ": needs >= 2 frames");
  }
  auto require = [](const fs::path& p) {
    if (!fs::exists(p)) throw Error(ErrorCode::kIoError, "missing file " + p.string());
  };
  require(m.intrinsics);
  if (m.groundtruth) require(*m.groundtruth);
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    require(f.depth);
    const bool last = i + 1 == m.frames.size();
    if (!last && (f.flow_fwd.empty() || f.flow_bwd.empty())) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ": only the last frame may omit flows");
    }
    if (!f.flow_fwd.empty()) require(f.flow_fwd);
    if (!f.flow_bwd.empty()) require(f.flow_bwd);
  }
  return m;
}

void write_manifest(const fs::path& path, const SequenceManifest& m) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) -> std::string {
    if (p.empty()) return "-";
    return p.lexically_relative(base.empty() ? fs::path(".") : base).generic_string();
  };
  auto out = open_out(path, false);
  out << "intrinsics " << rel(m.intrinsics) << '\n';
  if (m.groundtruth) out << "groundtruth " << rel(*m.groundtruth) << '\n';
  for (const auto& f : m.frames) {
    out << "frame " << rel(f.flow_fwd) << ' ' << rel(f.flow_bwd) << ' '
        << rel(f.depth);
    if (f.timestamp) out << ' ' << format_fixed(*f.timestamp, 6);
    out << '\n';
  }
}

void write_ply(const fs::path& path, const TriangulatedSet& set) {
  auto out = open_out(path, false);
  out << "ply\nformat ascii 1.0\nelement vertex " << set.valid_count()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
         "end_header\n";
  for (const auto& s : set.samples) {
    if (!s.valid()) continue;
    out << format_number(s.point.x()) << ' ' << format_number(s.point.y())
        << ' ' << format_number(s.point.z()) << '\n';
  }
}

}  // namespace flowpose
