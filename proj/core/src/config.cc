#include "flowpose/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "flowpose/error.h"
#include "flowpose/io.h"

namespace flowpose {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("not a number");
  }
  return out;
}

long long to_integer(const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("not an integer");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

struct Key {
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

#define FLOWPOSE_REAL(expr)                                               \
  Key {                                                                   \
    [](Settings& s, const std::string& v) { s.expr = to_double(v); },     \
        [](const Settings& s) { return format_number(s.expr); }           \
  }
#define FLOWPOSE_COUNT(expr, type)                                        \
  Key {                                                                   \
    [](Settings& s, const std::string& v) {                               \
      const long long n = to_integer(v);                                  \
      if (n < 0) throw std::invalid_argument("negative count");           \
      s.expr = static_cast<type>(n);                                      \
    },                                                                    \
        [](const Settings& s) { return std::to_string(s.expr); }          \
  }

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = {
      {"cheirality.ambiguity_ratio", FLOWPOSE_REAL(vo.pose.cheirality.ambiguity_ratio)},
      {"cheirality.max_depth", FLOWPOSE_REAL(vo.pose.cheirality.max_depth)},
      {"eval.depth_cap", FLOWPOSE_REAL(depth_eval.cap)},
      {"eval.depth_min", FLOWPOSE_REAL(depth_eval.min_depth)},
      {"eval.median_scaling",
       Key{[](Settings& s, const std::string& v) {
             s.depth_eval.median_scaling = to_bool(v);
           },
           [](const Settings& s) {
             return std::string(s.depth_eval.median_scaling ? "true" : "false");
           }}},
      {"eval.odom_lengths",
       Key{[](Settings& s, const std::string& v) { s.odometry.lengths = to_list(v); },
           [](const Settings& s) {
             std::string out;
             for (double l : s.odometry.lengths) {
               if (!out.empty()) out += ",";
               out += format_number(l);
             }
             return out;
           }}},
      {"eval.odom_step", FLOWPOSE_COUNT(odometry.step, std::size_t)},
      {"loss.w1", FLOWPOSE_REAL(weights.w1)},
      {"loss.w2", FLOWPOSE_REAL(weights.w2)},
      {"loss.w3", FLOWPOSE_REAL(weights.w3)},
      {"loss.w31", FLOWPOSE_REAL(weights.w31)},
      {"loss.w32", FLOWPOSE_REAL(weights.w32)},
      {"loss.w4", FLOWPOSE_REAL(weights.w4)},
      {"occlusion.threshold", FLOWPOSE_REAL(vo.pose.occlusion_threshold)},
      {"pnp.confidence", FLOWPOSE_REAL(vo.pnp.confidence)},
      {"pnp.max_iters", FLOWPOSE_COUNT(vo.pnp.max_iters, int)},
      {"pnp.min_flow_px", FLOWPOSE_REAL(vo.min_flow_px)},
      {"pnp.samples", FLOWPOSE_COUNT(vo.pnp_samples, std::size_t)},
      {"pnp.threshold", FLOWPOSE_REAL(vo.pnp.threshold)},
      {"ransac.confidence", FLOWPOSE_REAL(vo.pose.ransac.confidence)},
      {"ransac.max_iters", FLOWPOSE_COUNT(vo.pose.ransac.max_iters, int)},
      {"ransac.threshold", FLOWPOSE_REAL(vo.pose.ransac.threshold)},
      {"sample.n", FLOWPOSE_COUNT(vo.pose.num_samples, std::size_t)},
      {"sample.top_frac", FLOWPOSE_REAL(vo.pose.top_frac)},
      {"triangulation.max_depth", FLOWPOSE_REAL(vo.triangulation.max_depth)},
      {"triangulation.min_cosine", FLOWPOSE_REAL(vo.triangulation.min_cosine)},
  };
  return table;
}

#undef FLOWPOSE_REAL
#undef FLOWPOSE_COUNT

}  // namespace

Settings parse_config(const std::string& text, Settings base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kParseError, where + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys().find(key);
    if (it == keys().end()) {
      throw Error(ErrorCode::kParseError, where + ": unknown key '" + key + "'");
    }
    try {
      it->second.set(base, value);
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorCode::kParseError,
                  where + ": bad value '" + value + "' for " + key + " (" +
                      e.what() + ")");
    }
  }
  try {
    base.weights.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  return base;
}

Settings read_config(const std::filesystem::path& path, Settings base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const Settings& settings) {
  std::string out;
  for (const auto& [key, k] : keys()) out += key + "=" + k.get(settings) + "\n";
  return out;
}

}  // namespace flowpose
