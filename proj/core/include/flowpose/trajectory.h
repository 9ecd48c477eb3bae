#ifndef FLOWPOSE_TRAJECTORY_H_
#define FLOWPOSE_TRAJECTORY_H_

#include <vector>

#include "flowpose/pose.h"

namespace flowpose {

// Camera-to-world poses with strictly increasing timestamps (frame indices
// when no clock is available).
struct Trajectory {
  std::vector<double> timestamps;
  std::vector<RigidPose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  void push_back(double timestamp, const RigidPose& pose) {
    timestamps.push_back(timestamp);
    poses.push_back(pose);
  }
  const Eigen::Vector3d& position(std::size_t i) const {
    return poses[i].translation;
  }
  // Throws kInvalidArgument on size mismatch or non-increasing timestamps.
  void validate() const;
  // Sum of consecutive position distances.
  double path_length() const;
  // Largest pairwise distance between positions.
  double span() const;
};

}  // namespace flowpose

#endif  // FLOWPOSE_TRAJECTORY_H_
