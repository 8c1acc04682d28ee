#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gaitemo/pose.hpp"
#include "gaitemo/skeleton.hpp"

namespace gaitemo {

inline constexpr double kDegenerateEps = 1e-8;

struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }
  static Quat from_axis_angle(const Vec3& axis, double angle);

  Quat operator-() const { return {-w, -x, -y, -z}; }
  Quat operator*(const Quat& o) const;
  Quat conjugate() const { return {w, -x, -y, -z}; }
  Vec3 rotate(const Vec3& v) const;
  Eigen::Matrix3d to_matrix() const;  // assumes unit norm

  bool operator==(const Quat&) const = default;
};

double quat_norm(const Quat& q);

// Minimal rotation taking direction u onto direction v. Degenerate (near-zero)
// inputs give the identity; antipodal inputs rotate by pi about an axis
// orthogonal to u chosen from the global up (0,1,0), or (1,0,0) when u is
// vertical.
Quat shortest_arc(const Vec3& u, const Vec3& v);

// Intrinsic X-Y-Z angles (R = Rx(rx) Ry(ry) Rz(rz)), each in [0, 2pi). The
// quaternion is normalized first; the zero quaternion throws
// DegenerateQuatError. At gimbal lock the convention rz = 0 applies.
using EulerAngles = std::array<double, 3>;
EulerAngles quat_to_euler(const Quat& q);

// Same conversion plus d(angles)/d(w,x,y,z) for the raw (unnormalized)
// quaternion components. Used by the reconstruction loss.
struct EulerWithJacobian {
  EulerAngles angles;
  Eigen::Matrix<double, 3, 4> jacobian;
};
EulerWithJacobian quat_to_euler_with_jacobian(const Quat& q);

Eigen::Matrix3d euler_to_matrix(const EulerAngles& angles);

// Per-joint, per-frame rotations from the first frame, stored frame-major:
// element (t, j) occupies values[(t * joints + j) * 4 .. +4) as (w, x, y, z).
class RotationTensor {
 public:
  RotationTensor() = default;
  RotationTensor(std::size_t joints, std::size_t frames)
      : joints_(joints), frames_(frames), values_(joints * frames * 4, 0.0) {}

  std::size_t joints() const { return joints_; }
  std::size_t frames() const { return frames_; }

  Quat at(std::size_t j, std::size_t t) const;
  void set(std::size_t j, std::size_t t, const Quat& q);

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const RotationTensor&) const = default;

 private:
  std::size_t joints_ = 0;
  std::size_t frames_ = 0;
  std::vector<double> values_;
};

// q_j^t = shortest_arc(bone_j(first frame), bone_j(frame t)), hemisphere
// normalized to w >= 0.
RotationTensor extract_rotations(const PoseSequence& positions,
                                 const Skeleton& skel = canonical_skeleton());

}  // namespace gaitemo
