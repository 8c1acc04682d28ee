#include "gaitemo/rotation.hpp"

#include <cmath>
#include <numbers>

#include "gaitemo/errors.hpp"

namespace gaitemo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Forward-mode dual number carrying derivatives w.r.t. the four quaternion
// components.
struct Dual {
  double v = 0.0;
  Eigen::Matrix<double, 1, 4> d = Eigen::Matrix<double, 1, 4>::Zero();
};

Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + b.d * a.v}; }
Dual operator*(double s, const Dual& a) { return {s * a.v, s * a.d}; }
Dual operator-(double s, const Dual& a) { return {s - a.v, -a.d}; }
Dual operator/(const Dual& a, const Dual& b) {
  return {a.v / b.v, (a.d * b.v - b.d * a.v) / (b.v * b.v)};
}
Dual sqrt(const Dual& a) {
  const double r = std::sqrt(a.v);
  return {r, r > 0.0 ? Eigen::Matrix<double, 1, 4>(a.d / (2.0 * r))
                     : Eigen::Matrix<double, 1, 4>::Zero()};
}
Dual atan2(const Dual& y, const Dual& x) {
  const double den = x.v * x.v + y.v * y.v;
  if (den == 0.0) return {0.0, Eigen::Matrix<double, 1, 4>::Zero()};
  return {std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / den};
}

double value_of(double x) { return x; }
double value_of(const Dual& x) { return x.v; }
double sqrt(double x) { return std::sqrt(x); }
double atan2(double y, double x) { return std::atan2(y, x); }

double wrap_positive(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

// Generic over double and Dual so the same code yields values and the
// Jacobian.
template <typename S>
std::array<S, 3> euler_from_components(S w, S x, S y, S z) {
  const S n = sqrt(w * w + x * x + y * y + z * z);
  w = w / n;
  x = x / n;
  y = y / n;
  z = z / n;
  const S r00 = 1.0 - 2.0 * (y * y + z * z);
  const S r01 = 2.0 * (x * y - w * z);
  const S r02 = 2.0 * (x * z + w * y);
  const S r11 = 1.0 - 2.0 * (x * x + z * z);
  const S r12 = 2.0 * (y * z - w * x);
  const S r21 = 2.0 * (y * z + w * x);
  const S r22 = 1.0 - 2.0 * (x * x + y * y);

  const S cos_b = sqrt(r00 * r00 + r01 * r01);
  const S b = atan2(r02, cos_b);
  S a, c;
  if (value_of(cos_b) < 1e-9) {
    a = atan2(r21, r11);
    c = S{};
  } else {
    a = atan2(-r12, r22);
    c = atan2(-r01, r00);
  }
  return {a, b, c};
}

}  // namespace

Quat Quat::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n < kDegenerateEps) return identity();
  const Vec3 a = axis / n * std::sin(angle / 2.0);
  return {std::cos(angle / 2.0), a.x(), a.y(), a.z()};
}

Quat Quat::operator*(const Quat& o) const {
  return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
          w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
}

Vec3 Quat::rotate(const Vec3& v) const {
  const Quat r = (*this) * Quat{0.0, v.x(), v.y(), v.z()} * conjugate();
  return {r.x, r.y, r.z};
}

Eigen::Matrix3d Quat::to_matrix() const {
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),  //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

double quat_norm(const Quat& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

Quat shortest_arc(const Vec3& u, const Vec3& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu < kDegenerateEps || nv < kDegenerateEps) return Quat::identity();
  const Vec3 a = u / nu;
  const Vec3 b = v / nv;
  const double d = a.dot(b);
  if (1.0 + d < 1e-12) {
    Vec3 axis = a.cross(Vec3::UnitY());
    if (axis.norm() < kDegenerateEps) axis = a.cross(Vec3::UnitX());
    axis.normalize();
    return {0.0, axis.x(), axis.y(), axis.z()};
  }
  const Vec3 c = a.cross(b);
  Quat q{1.0 + d, c.x(), c.y(), c.z()};
  const double n = quat_norm(q);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

EulerAngles quat_to_euler(const Quat& q) {
  if (quat_norm(q) == 0.0) throw DegenerateQuatError("cannot convert the zero quaternion");
  const auto e = euler_from_components(q.w, q.x, q.y, q.z);
  return {wrap_positive(e[0]), wrap_positive(e[1]), wrap_positive(e[2])};
}

EulerWithJacobian quat_to_euler_with_jacobian(const Quat& q) {
  if (quat_norm(q) == 0.0) throw DegenerateQuatError("cannot convert the zero quaternion");
  auto seed = [](double v, int k) {
    Dual d{v, Eigen::Matrix<double, 1, 4>::Zero()};
    d.d(k) = 1.0;
    return d;
  };
  const auto e = euler_from_components(seed(q.w, 0), seed(q.x, 1), seed(q.y, 2), seed(q.z, 3));
  EulerWithJacobian out;
  for (int i = 0; i < 3; ++i) {
    out.angles[i] = wrap_positive(e[i].v);
    out.jacobian.row(i) = e[i].d;
  }
  return out;
}

Eigen::Matrix3d euler_to_matrix(const EulerAngles& angles) {
  return (Eigen::AngleAxisd(angles[0], Vec3::UnitX()) *
          Eigen::AngleAxisd(angles[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(angles[2], Vec3::UnitZ()))
      .toRotationMatrix();
}

Quat RotationTensor::at(std::size_t j, std::size_t t) const {
  const double* p = values_.data() + (t * joints_ + j) * 4;
  return {p[0], p[1], p[2], p[3]};
}

void RotationTensor::set(std::size_t j, std::size_t t, const Quat& q) {
  double* p = values_.data() + (t * joints_ + j) * 4;
  p[0] = q.w;
  p[1] = q.x;
  p[2] = q.y;
  p[3] = q.z;
}

RotationTensor extract_rotations(const PoseSequence& positions, const Skeleton& skel) {
  const std::size_t joints = skel.num_joints();
  if (positions.joints() != joints)
    throw ShapeError("positions have " + std::to_string(positions.joints()) +
                     " joints, skeleton has " + std::to_string(joints));
  RotationTensor out(joints, positions.frames());
  if (positions.empty()) return out;
  for (std::size_t j = 0; j < joints; ++j) {
    const auto [from, to] = skel.bone(j);
    const Vec3 first = positions.at(0, to) - positions.at(0, from);
    for (std::size_t t = 0; t < positions.frames(); ++t) {
      const Vec3 cur = positions.at(t, to) - positions.at(t, from);
      Quat q = t == 0 ? Quat::identity() : shortest_arc(first, cur);
      if (q.w < 0.0) q = -q;
      out.set(j, t, q);
    }
  }
  return out;
}

}  // namespace gaitemo
