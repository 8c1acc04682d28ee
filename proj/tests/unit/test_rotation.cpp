#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "gaitemo/errors.hpp"
#include "gaitemo/gait_io.hpp"
#include "gaitemo/rotation.hpp"
#include "test_support.hpp"

using namespace gaitemo;
using std::numbers::pi;

namespace {

// Independent oracles: the textbook quaternion matrix and the product of
// elementary rotations.
Eigen::Matrix3d oracle_quat_matrix(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n, x /= n, y /= n, z /= n;
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

Eigen::Matrix3d oracle_euler_matrix(double a, double b, double c) {
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
  rz << std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c), 0, 0, 0, 1;
  return rx * ry * rz;
}

Vec3 oracle_rotate(const Quat& q, const Vec3& v) {
  return oracle_quat_matrix(q.w, q.x, q.y, q.z) * v;
}

}  // namespace

TEST_CASE("quat_norm examples") {
  CHECK(quat_norm({1, 0, 0, 0}) == 1.0);
  CHECK(quat_norm({0, 0, 0, 0}) == 0.0);
  CHECK(quat_norm({1, 1, 1, 1}) == 2.0);
}

TEST_CASE("shortest arc examples") {
  CHECK(shortest_arc({0, 0, 1}, {0, 0, 1}) == Quat::identity());
  CHECK(shortest_arc({0, 0, 0}, {1, 0, 0}) == Quat::identity());
  CHECK(shortest_arc({1, 0, 0}, {0, 0, 1e-9}) == Quat::identity());

  const Quat q = shortest_arc({1, 0, 0}, {0, 1, 0});
  CHECK(q.w == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(q.x == doctest::Approx(0.0));
  CHECK(q.y == doctest::Approx(0.0));
  CHECK(q.z == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK((oracle_rotate(q, {1, 0, 0}) - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("shortest arc maps u onto v with w >= 0") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 u = test::random_vec(rng), v = test::random_vec(rng);
    const Quat q = shortest_arc(u, v);
    CHECK(std::abs(quat_norm(q) - 1.0) < 1e-12);
    CHECK(q.w >= 0.0);
    CHECK((oracle_rotate(q, u.normalized()) - v.normalized()).norm() < 1e-9);
    // Minimal angle: the rotation angle equals the angle between u and v.
    const double angle = 2 * std::acos(std::min(1.0, q.w));
    const double between = std::acos(std::clamp(u.normalized().dot(v.normalized()), -1.0, 1.0));
    CHECK(angle == doctest::Approx(between).epsilon(1e-7));
  }
}

TEST_CASE("antipodal shortest arc is a half turn with w = 0") {
  for (const Vec3& u : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.3, -0.2, 0.9)}) {
    const Quat q = shortest_arc(u, -u);
    CHECK(std::abs(q.w) < 1e-12);
    CHECK((oracle_rotate(q, u.normalized()) + u.normalized()).norm() < 1e-9);
  }
}

TEST_CASE("quat_to_euler examples") {
  const auto id = quat_to_euler(Quat::identity());
  CHECK(id[0] == 0.0);
  CHECK(id[1] == 0.0);
  CHECK(id[2] == 0.0);

  const double h = std::sqrt(0.5);
  const auto e = quat_to_euler({h, h, 0, 0});
  CHECK(e[0] == doctest::Approx(pi / 2).epsilon(1e-12));
  CHECK(std::abs(e[1]) < 1e-12);
  CHECK(std::abs(e[2]) < 1e-12);
  CHECK((oracle_euler_matrix(e[0], e[1], e[2]) - oracle_quat_matrix(h, h, 0, 0)).cwiseAbs().maxCoeff() <
        1e-9);

  CHECK_THROWS_AS(quat_to_euler({0, 0, 0, 0}), DegenerateQuatError);
}

TEST_CASE("q and -q give the same Euler triple; angles in [0, 2pi)") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Quat q = test::random_unit_quat(rng);
    const auto a = quat_to_euler(q), b = quat_to_euler(-q);
    for (int k = 0; k < 3; ++k) {
      CHECK(a[k] == b[k]);
      CHECK(a[k] >= 0.0);
      CHECK(a[k] < 2 * pi);
    }
  }
}

TEST_CASE("Euler round trip at the matrix level") {
  std::mt19937_64 rng(5);
  int tested = 0;
  while (tested < 1000) {
    const Quat q = test::random_unit_quat(rng);
    if (q.w <= 1e-3) continue;
    const auto e = quat_to_euler(q);
    if (std::abs(std::cos(e[1])) < 1e-3) continue;
    const double err = (oracle_euler_matrix(e[0], e[1], e[2]) - oracle_quat_matrix(q.w, q.x, q.y, q.z))
                           .cwiseAbs()
                           .maxCoeff();
    CHECK(err < 1e-6);
    CHECK((euler_to_matrix(e) - oracle_euler_matrix(e[0], e[1], e[2])).cwiseAbs().maxCoeff() < 1e-12);
    ++tested;
  }
}

TEST_CASE("gimbal lock uses rz = 0 and still reproduces the rotation") {
  const Quat q = Quat::from_axis_angle({1, 0, 0}, 0.4) * Quat::from_axis_angle({0, 1, 0}, pi / 2) *
                 Quat::from_axis_angle({0, 0, 1}, 0.3);
  const auto e = quat_to_euler(q);
  CHECK(e[1] == doctest::Approx(pi / 2).epsilon(1e-7));
  CHECK(e[2] == 0.0);
  CHECK((oracle_euler_matrix(e[0], e[1], e[2]) - oracle_quat_matrix(q.w, q.x, q.y, q.z)).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("Euler Jacobian matches finite differences") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    Quat q = test::random_unit_quat(rng);
    const double s = 0.5 + (i % 5) * 0.3;  // unnormalized input
    q = {q.w * s, q.x * s, q.y * s, q.z * s};
    const auto ej = quat_to_euler_with_jacobian(q);
    const auto plain = quat_to_euler(q);
    for (int k = 0; k < 3; ++k) CHECK(ej.angles[k] == doctest::Approx(plain[k]).epsilon(1e-12));
    const double h = 1e-6;
    for (int c = 0; c < 4; ++c) {
      std::array<double, 4> up{q.w, q.x, q.y, q.z}, dn = up;
      up[c] += h;
      dn[c] -= h;
      const auto eu = quat_to_euler({up[0], up[1], up[2], up[3]});
      const auto ed = quat_to_euler({dn[0], dn[1], dn[2], dn[3]});
      for (int k = 0; k < 3; ++k) {
        double d = eu[k] - ed[k];
        if (d > pi) d -= 2 * pi;
        if (d < -pi) d += 2 * pi;
        CHECK(ej.jacobian(k, c) == doctest::Approx(d / (2 * h)).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("shortest arc there and back composes to identity") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 u = test::random_vec(rng).normalized(), v = test::random_vec(rng).normalized();
    if (u.dot(v) < -0.999) continue;
    const Quat c = shortest_arc(v, u) * shortest_arc(u, v);
    const Quat id = c.w < 0 ? -c : c;
    CHECK(std::abs(id.w - 1) < 1e-9);
    CHECK(std::abs(id.x) < 1e-9);
    CHECK(std::abs(id.y) < 1e-9);
    CHECK(std::abs(id.z) < 1e-9);
  }
}

TEST_CASE("static gait gives identity rotations") {
  const Dataset ds = generate_synthetic(1, 0, 3);
  PoseSequence frozen(48);
  for (std::size_t t = 0; t < 48; ++t)
    for (std::size_t j = 0; j < kNumJoints; ++j) frozen.at(t, j) = ds.samples[0].positions.at(0, j);
  const RotationTensor r = extract_rotations(frozen);
  for (std::size_t t = 0; t < 48; ++t)
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      const Quat q = r.at(j, t);
      CHECK(std::abs(q.w - 1.0) < 1e-12);
      CHECK(Vec3(q.x, q.y, q.z).norm() < 1e-7);
    }
}

TEST_CASE("rigid 30 degree turn about the vertical") {
  // A shortest arc only sees the bone direction, so the oracle is the angle
  // between each bone and its turned copy: exactly 30 degrees with a vertical
  // axis when the bone is horizontal, less otherwise.
  const Dataset ds = generate_synthetic(1, 0, 4);
  const auto& src = ds.samples[0].positions;
  const Eigen::Matrix3d yaw = Eigen::AngleAxisd(pi / 6, Vec3::UnitY()).toRotationMatrix();
  PoseSequence seq(2);
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    seq.at(0, j) = src.at(0, j);
    seq.at(1, j) = yaw * src.at(0, j) + Vec3(0.3, 0.0, -1.0);
  }
  const RotationTensor r = extract_rotations(seq);
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const Quat q = r.at(j, 1);
    const auto [from, to] = canonical_skeleton().bone(j);
    const Vec3 b = (src.at(0, to) - src.at(0, from)).normalized();
    const double expected = std::acos(std::clamp(b.dot(yaw * b), -1.0, 1.0));
    CHECK(2 * std::acos(std::min(1.0, q.w)) == doctest::Approx(expected).epsilon(1e-7).scale(1.0));
    CHECK((oracle_rotate(q, b) - yaw * b).norm() < 1e-9);
  }

  PoseSequence flat(2);
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    flat.at(0, j) = Vec3(double(j), 0.0, 0.5 * double(j % 3));
    flat.at(1, j) = yaw * flat.at(0, j);
  }
  const RotationTensor rf = extract_rotations(flat);
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const auto [from, to] = canonical_skeleton().bone(j);
    if ((flat.at(0, to) - flat.at(0, from)).norm() < 1e-6) continue;
    const Quat q = rf.at(j, 1);
    CHECK(2 * std::acos(std::min(1.0, q.w)) == doctest::Approx(pi / 6).epsilon(1e-9));
    CHECK(std::abs(Vec3(q.x, q.y, q.z).normalized().dot(Vec3::UnitY())) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("zero padded frames give identity; output is unit with w >= 0") {
  const Dataset ds = generate_synthetic(1, 0, 5);
  PoseSequence seq(20);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t j = 0; j < kNumJoints; ++j) seq.at(t, j) = ds.samples[0].positions.at(t, j);
  const PoseSequence padded = preprocess_temporal(seq);  // frames 4.. are zero
  const RotationTensor r = extract_rotations(padded);
  CHECK(r.frames() == 48);
  for (std::size_t t = 0; t < 48; ++t)
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      const Quat q = r.at(j, t);
      CHECK(std::abs(quat_norm(q) - 1.0) < 1e-6);
      CHECK(q.w >= 0.0);
      if (t >= 4) CHECK(q == Quat::identity());
    }
  for (std::size_t j = 0; j < kNumJoints; ++j) CHECK(r.at(j, 0) == Quat::identity());
}
