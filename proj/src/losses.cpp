#include "gaitemo/losses.hpp"

#include <cmath>
#include <numbers>

#include "gaitemo/errors.hpp"
#include "gaitemo/rotation.hpp"

namespace gaitemo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Quat quat_at(const Eigen::MatrixXd& m, Eigen::Index row, Eigen::Index k) {
  return {m(row, 4 * k), m(row, 4 * k + 1), m(row, 4 * k + 2), m(row, 4 * k + 3)};
}

void require_quat_array(const Eigen::MatrixXd& m, const char* what) {
  if (m.cols() % 4 != 0) throw ShapeError(std::string(what) + ": width must be a multiple of 4");
}

}  // namespace

double wrap_angle(double d) { return d - kTwoPi * std::ceil((d - std::numbers::pi) / kTwoPi); }

double loss_classifier(const MultiHotLabel& y, std::span<const double> y_hat,
                       const ClassWeights& w) {
  if (y_hat.size() != kNumClasses) throw ShapeError("classifier loss: expected 4 probabilities");
  double loss = 0.0;
  for (std::size_t l = 0; l < kNumClasses; ++l)
    if (y[l]) loss -= w.w[l] * std::log(std::max(y_hat[l], kProbClamp));
  return loss;
}

double loss_quat(const Eigen::MatrixXd& recon) {
  require_quat_array(recon, "quaternion loss");
  const Eigen::Index per_row = recon.cols() / 4;
  const Eigen::Index n = recon.rows() * per_row;
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index r = 0; r < recon.rows(); ++r)
    for (Eigen::Index k = 0; k < per_row; ++k) {
      const double d = recon.row(r).segment(4 * k, 4).norm() - 1.0;
      sum += d * d;
    }
  return sum / static_cast<double>(n);
}

Eigen::MatrixXd euler_array(const Eigen::MatrixXd& quats) {
  require_quat_array(quats, "euler_array");
  const Eigen::Index per_row = quats.cols() / 4;
  Eigen::MatrixXd out(quats.rows(), 3 * per_row);
  for (Eigen::Index r = 0; r < quats.rows(); ++r)
    for (Eigen::Index k = 0; k < per_row; ++k) {
      const EulerAngles e = quat_to_euler(quat_at(quats, r, k));
      for (int i = 0; i < 3; ++i) out(r, 3 * k + i) = e[static_cast<std::size_t>(i)];
    }
  return out;
}

double loss_angle(const Eigen::MatrixXd& input, const Eigen::MatrixXd& recon) {
  if (input.rows() != recon.rows() || input.cols() != recon.cols())
    throw ShapeError("angle loss: input and reconstruction differ in shape");
  const Eigen::MatrixXd a = euler_array(input);
  const Eigen::MatrixXd b = euler_array(recon);
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = wrap_angle(b(i) - a(i));
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double loss_affective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_hat) {
  if (a.rows() != a_hat.rows() || a.cols() != a_hat.cols())
    throw ShapeError("affective loss: shapes differ");
  if (a.size() == 0) return 0.0;
  return (a - a_hat).squaredNorm() / static_cast<double>(a.size());
}

double combine_autoencoder(const AutoencoderTerms& t, const LossWeights& lw) {
  return t.ang + lw.lambda_quat * t.quat + lw.lambda_aff * t.aff;
}

double loss_autoencoder(const Eigen::MatrixXd& input, const Eigen::MatrixXd& recon,
                        const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_hat,
                        const LossWeights& lw) {
  return combine_autoencoder({loss_angle(input, recon), loss_quat(recon), loss_affective(a, a_hat)},
                             lw);
}

double loss_total(std::span<const SampleTerms> batch, const ClassWeights& w,
                  const LossWeights& lw) {
  if (batch.empty()) throw EmptyError("total loss over an empty batch");
  double sum = 0.0;
  for (const SampleTerms& s : batch) {
    sum += loss_autoencoder(s.rotations, s.recon, s.affective, s.affective_hat, lw);
    if (s.label)
      sum += loss_classifier(*s.label, std::span<const double>(s.probs.data(), s.probs.size()), w);
  }
  return sum / static_cast<double>(batch.size());
}

// ---- differentiable versions -------------------------------------------------

namespace ad {

Var classifier_loss(Var probs, std::span<const std::optional<MultiHotLabel>> labels,
                    const ClassWeights& w) {
  const Matrix& p = probs.value();
  if (p.rows() != static_cast<Eigen::Index>(labels.size()) ||
      p.cols() != static_cast<Eigen::Index>(kNumClasses))
    throw ShapeError("classifier loss: probabilities must be batch x 4");
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  Matrix coef = Matrix::Zero(p.rows(), p.cols());  // d loss / d p
  double loss = 0.0;
  for (Eigen::Index b = 0; b < p.rows(); ++b) {
    const auto& y = labels[static_cast<std::size_t>(b)];
    if (!y) continue;
    for (Eigen::Index l = 0; l < p.cols(); ++l) {
      if (!(*y)[static_cast<std::size_t>(l)]) continue;
      const double wl = w.w[static_cast<std::size_t>(l)];
      loss -= wl * std::log(std::max(p(b, l), kProbClamp)) * inv_b;
      if (p(b, l) > kProbClamp) coef(b, l) = -wl / p(b, l) * inv_b;
    }
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  return probs.tape->record(std::move(out), {probs},
                            [probs, coef = std::move(coef)](Tape& t, const Matrix& g) {
                              t.accumulate(probs, coef * g(0, 0));
                            });
}

Var quat_loss(Var recon) {
  const Matrix& q = recon.value();
  require_quat_array(q, "quaternion loss");
  const Eigen::Index per_row = q.cols() / 4;
  const double n = static_cast<double>(q.rows() * per_row);
  Matrix grad = Matrix::Zero(q.rows(), q.cols());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    for (Eigen::Index k = 0; k < per_row; ++k) {
      const auto seg = q.row(r).segment(4 * k, 4);
      const double norm = seg.norm();
      sum += (norm - 1.0) * (norm - 1.0);
      if (norm > 0.0) grad.row(r).segment(4 * k, 4) = 2.0 * (norm - 1.0) / norm / n * seg;
    }
  Matrix out(1, 1);
  out(0, 0) = n > 0 ? sum / n : 0.0;
  return recon.tape->record(std::move(out), {recon},
                            [recon, grad = std::move(grad)](Tape& t, const Matrix& g) {
                              t.accumulate(recon, grad * g(0, 0));
                            });
}

Var angle_loss(Var recon, const Matrix& target_euler) {
  const Matrix& q = recon.value();
  require_quat_array(q, "angle loss");
  const Eigen::Index per_row = q.cols() / 4;
  if (target_euler.rows() != q.rows() || target_euler.cols() != 3 * per_row)
    throw ShapeError("angle loss: target Euler array shape");
  const double n = static_cast<double>(q.rows() * per_row * 3);
  Matrix grad = Matrix::Zero(q.rows(), q.cols());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    for (Eigen::Index k = 0; k < per_row; ++k) {
      const EulerWithJacobian e = quat_to_euler_with_jacobian(quat_at(q, r, k));
      Eigen::RowVector3d d;
      for (int i = 0; i < 3; ++i)
        d(i) = wrap_angle(e.angles[static_cast<std::size_t>(i)] - target_euler(r, 3 * k + i));
      sum += d.squaredNorm();
      grad.row(r).segment(4 * k, 4) = (2.0 / n) * d * e.jacobian;
    }
  Matrix out(1, 1);
  out(0, 0) = n > 0 ? sum / n : 0.0;
  return recon.tape->record(std::move(out), {recon},
                            [recon, grad = std::move(grad)](Tape& t, const Matrix& g) {
                              t.accumulate(recon, grad * g(0, 0));
                            });
}

Var affective_loss(Var a_hat, const Matrix& a) {
  if (a_hat.rows() != a.rows() || a_hat.cols() != a.cols())
    throw ShapeError("affective loss: shapes differ");
  Var diff = sub(a_hat, a_hat.tape->constant(a));
  return scale(sum_all(mul(diff, diff)), 1.0 / static_cast<double>(a.size()));
}

}  // namespace ad

}  // namespace gaitemo
