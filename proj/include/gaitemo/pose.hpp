#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gaitemo/skeleton.hpp"

namespace gaitemo {

// Frames x joints x 3 joint positions, stored contiguously (frame-major).
class PoseSequence {
 public:
  PoseSequence() = default;
  explicit PoseSequence(std::size_t frames, std::size_t joints = kNumJoints)
      : frames_(frames), joints_(joints), data_(frames * joints * 3, 0.0) {}

  std::size_t frames() const { return frames_; }
  std::size_t joints() const { return joints_; }
  bool empty() const { return frames_ == 0; }

  Eigen::Map<Vec3> at(std::size_t t, std::size_t j) { return Eigen::Map<Vec3>(ptr(t, j)); }
  Eigen::Map<const Vec3> at(std::size_t t, std::size_t j) const {
    return Eigen::Map<const Vec3>(ptr(t, j));
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const PoseSequence&) const = default;

 private:
  double* ptr(std::size_t t, std::size_t j) { return data_.data() + (t * joints_ + j) * 3; }
  const double* ptr(std::size_t t, std::size_t j) const {
    return data_.data() + (t * joints_ + j) * 3;
  }

  std::size_t frames_ = 0;
  std::size_t joints_ = 0;
  std::vector<double> data_;
};

}  // namespace gaitemo
