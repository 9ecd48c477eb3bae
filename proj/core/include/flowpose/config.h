#ifndef FLOWPOSE_CONFIG_H_
#define FLOWPOSE_CONFIG_H_

#include <filesystem>
#include <map>
#include <string>

#include "flowpose/evaluation.h"
#include "flowpose/losses.h"
#include "flowpose/vo.h"

namespace flowpose {

// Every tunable of the pipeline, initialised to the documented defaults.
struct Settings {
  VoOptions vo;
  LossWeights weights;
  DepthMetricOptions depth_eval;
  OdometryOptions odometry;
};

// Flat "key = value" lines; '#' starts a comment. Throws kParseError with a
// line number on malformed lines, unknown keys or bad values.
Settings parse_config(const std::string& text, Settings base = {});
Settings read_config(const std::filesystem::path& path, Settings base = {});

// All keys with their current values, one per line, in key order.
std::string format_config(const Settings& settings);

}  // namespace flowpose

#endif  // FLOWPOSE_CONFIG_H_
