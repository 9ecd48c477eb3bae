#include "flowpose/trajectory.h"

#include <algorithm>

#include "flowpose/error.h"

namespace flowpose {

void Trajectory::validate() const {
  if (timestamps.size() != poses.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "trajectory timestamps and poses differ in count");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "trajectory timestamps must increase strictly");
    }
  }
}

double Trajectory::path_length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < size(); ++i) {
    len += (position(i) - position(i - 1)).norm();
  }
  return len;
}

double Trajectory::span() const {
  double best = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) {
      best = std::max(best, (position(i) - position(j)).norm());
    }
  }
  return best;
}

}  // namespace flowpose
