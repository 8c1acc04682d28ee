#pragma once

// Loss terms. Quaternion arrays use rows of 4J values (joint-major, w x y z),
// one row per time step (or per time step and sample); the Euler arrays that
// go with them are 3J wide.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gaitemo/autograd.hpp"
#include "gaitemo/labels.hpp"

namespace gaitemo {

struct LossWeights {
  double lambda_quat = 2.0;
  double lambda_aff = 2.0;
};

inline constexpr double kProbClamp = 1e-12;

// Maps an angle difference into (-pi, pi].
double wrap_angle(double d);

// -sum_l w_l y_l log(max(y_hat_l, 1e-12)).
double loss_classifier(const MultiHotLabel& y, std::span<const double> y_hat,
                       const ClassWeights& w);
// Mean of (|q| - 1)^2 over every quaternion.
double loss_quat(const Eigen::MatrixXd& recon);
// Mean squared wrapped difference between the Euler angles of input and
// reconstruction, over all 3 * (number of quaternions) entries.
double loss_angle(const Eigen::MatrixXd& input, const Eigen::MatrixXd& recon);
// Mean squared difference; throws ShapeError on mismatched shapes.
double loss_affective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_hat);

struct AutoencoderTerms {
  double ang = 0.0;
  double quat = 0.0;
  double aff = 0.0;
};
double combine_autoencoder(const AutoencoderTerms& terms, const LossWeights& lw);
double loss_autoencoder(const Eigen::MatrixXd& input, const Eigen::MatrixXd& recon,
                        const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_hat,
                        const LossWeights& lw);

// One sample's network outputs and targets, for the unbatched total loss.
struct SampleTerms {
  Eigen::MatrixXd rotations;      // T x 4J
  Eigen::MatrixXd recon;          // T x 4J
  Eigen::MatrixXd affective;      // A x T
  Eigen::MatrixXd affective_hat;  // A x T
  std::optional<MultiHotLabel> label;
  Eigen::VectorXd probs;          // C, used only when labeled
};
// Batch mean of (labeled ? C_CL : 0) + C_AE.
double loss_total(std::span<const SampleTerms> batch, const ClassWeights& w,
                  const LossWeights& lw);

// ---- differentiable versions -------------------------------------------------

namespace ad {

// probs: B x C. Sum of the labeled rows' weighted cross-entropy divided by B.
Var classifier_loss(Var probs, std::span<const std::optional<MultiHotLabel>> labels,
                    const ClassWeights& w);
Var quat_loss(Var recon);
// target_euler holds the input's Euler angles (quat_to_euler), one 3-wide
// block per quaternion of recon.
Var angle_loss(Var recon, const Matrix& target_euler);
Var affective_loss(Var a_hat, const Matrix& a);

}  // namespace ad

// Euler angles of every quaternion in a 4J-wide array, as a 3J-wide array.
Eigen::MatrixXd euler_array(const Eigen::MatrixXd& quats);

}  // namespace gaitemo
