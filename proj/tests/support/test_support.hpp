#pragma once

#include <random>

#include <Eigen/Core>

#include "gaitemo/rotation.hpp"

namespace gaitemo::test {

inline Quat random_unit_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q{n(rng), n(rng), n(rng), n(rng)};
  const double s = quat_norm(q);
  q = {q.w / s, q.x / s, q.y / s, q.z / s};
  if (q.w < 0) q = -q;
  return q;
}

// frames x 4*joints array of hemisphere-normalized unit quaternions.
inline Eigen::MatrixXd random_unit_quats(std::mt19937_64& rng, std::size_t frames,
                                         std::size_t joints) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(4 * joints));
  for (Eigen::Index t = 0; t < m.rows(); ++t)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(joints); ++j) {
      const Quat q = random_unit_quat(rng);
      m.row(t).segment(4 * j, 4) << q.w, q.x, q.y, q.z;
    }
  return m;
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng)};
}

}  // namespace gaitemo::test
