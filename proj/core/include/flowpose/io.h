#ifndef FLOWPOSE_IO_H_
#define FLOWPOSE_IO_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowpose/camera.h"
#include "flowpose/grid.h"
#include "flowpose/trajectory.h"
#include "flowpose/triangulation.h"

namespace flowpose {

inline constexpr float kFloMagic = 202021.25f;

// Middlebury .flo. Values pass through float32.
FlowField read_flow(const std::filesystem::path& path);
void write_flow(const std::filesystem::path& path, const FlowField& flow);

enum class DepthFormat { kPfm, kPng16 };

// Picks the format from the extension (.pfm or .png). Invalid pixels are
// stored as 0 in both formats.
DepthMap read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path, DepthFormat format);
void write_depth(const std::filesystem::path& path, const DepthMap& depth,
                 DepthFormat format);

// 8- or 16-bit grayscale/RGB PNG scaled to [0, 1]. Written as 16-bit.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

enum class TrajectoryFormat { kKitti, kTum };

// KITTI rows carry no clock, so frame indices become the timestamps.
Trajectory parse_trajectory(std::istream& in, TrajectoryFormat format);
void format_trajectory(std::ostream& out, const Trajectory& trajectory,
                       TrajectoryFormat format);
Trajectory read_trajectory(const std::filesystem::path& path,
                           TrajectoryFormat format);
void write_trajectory(const std::filesystem::path& path,
                      const Trajectory& trajectory, TrajectoryFormat format);

// "fx fy cx cy [width height]".
CameraIntrinsics parse_intrinsics(const std::string& text);
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path,
                      const CameraIntrinsics& K);

// Text manifest, one directive per line:
//   intrinsics <path>
//   groundtruth <path>            (optional, KITTI or TUM by extension)
//   frame <fwd.flo> <bwd.flo> <depth> [timestamp]
// The last frame may use "-" for both flows. Relative paths resolve against
// the manifest's directory.
struct SequenceManifest {
  struct Frame {
    std::filesystem::path flow_fwd;
    std::filesystem::path flow_bwd;
    std::filesystem::path depth;
    std::optional<double> timestamp;
  };
  std::filesystem::path intrinsics;
  std::optional<std::filesystem::path> groundtruth;
  std::vector<Frame> frames;
};

// Throws kParseError for malformed lines and kIoError for missing files.
SequenceManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const SequenceManifest& manifest);

// Trajectory format implied by an extension: .txt/.kitti -> KITTI,
// .tum -> TUM.
TrajectoryFormat trajectory_format_for(const std::filesystem::path& path);

// ASCII PLY of the valid samples.
void write_ply(const std::filesystem::path& path, const TriangulatedSet& set);

// Locale-independent number formatting used by every text writer.
std::string format_number(double v);
std::string format_fixed(double v, int digits);

}  // namespace flowpose

#endif  // FLOWPOSE_IO_H_
