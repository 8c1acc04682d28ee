#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gaitemo/errors.hpp"
#include "gaitemo/gait_io.hpp"
#include "gaitemo/losses.hpp"
#include "gaitemo/model.hpp"
#include "gaitemo/pipeline.hpp"
#include "gaitemo/training.hpp"
#include "test_support.hpp"

using namespace gaitemo;
using std::numbers::pi;

namespace {

MultiHotLabel bits(int a, int b, int c, int d) {
  MultiHotLabel m;
  m.bits = {std::uint8_t(a), std::uint8_t(b), std::uint8_t(c), std::uint8_t(d)};
  return m;
}

Eigen::MatrixXd random_quat_rows(std::mt19937_64& rng, int rows, int joints, double jitter) {
  std::normal_distribution<double> n(0.0, jitter);
  Eigen::MatrixXd m(rows, 4 * joints);
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < joints; ++j) {
      const Quat q = test::random_unit_quat(rng);
      m(r, 4 * j) = q.w + n(rng);
      m(r, 4 * j + 1) = q.x + n(rng);
      m(r, 4 * j + 2) = q.y + n(rng);
      m(r, 4 * j + 3) = q.z + n(rng);
    }
  return m;
}

// Scalar-loop oracles.
double oracle_quat(const Eigen::MatrixXd& m) {
  double s = 0.0;
  int n = 0;
  for (int r = 0; r < m.rows(); ++r)
    for (int j = 0; j < m.cols() / 4; ++j, ++n) {
      double sq = 0.0;
      for (int k = 0; k < 4; ++k) sq += m(r, 4 * j + k) * m(r, 4 * j + k);
      s += (std::sqrt(sq) - 1) * (std::sqrt(sq) - 1);
    }
  return s / n;
}

double oracle_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double s = 0.0;
  int n = 0;
  for (int r = 0; r < a.rows(); ++r)
    for (int j = 0; j < a.cols() / 4; ++j) {
      const auto ea = quat_to_euler({a(r, 4 * j), a(r, 4 * j + 1), a(r, 4 * j + 2), a(r, 4 * j + 3)});
      const auto eb = quat_to_euler({b(r, 4 * j), b(r, 4 * j + 1), b(r, 4 * j + 2), b(r, 4 * j + 3)});
      for (int k = 0; k < 3; ++k, ++n) {
        const double d = std::remainder(ea[k] - eb[k], 2 * pi);
        s += d * d;
      }
    }
  return s / n;
}

double oracle_cl(const MultiHotLabel& y, const Eigen::VectorXd& p, const ClassWeights& w) {
  double s = 0.0;
  for (int c = 0; c < 4; ++c)
    if (y[c]) s -= w.w[c] * std::log(std::max(p(c), 1e-12));
  return s;
}

}  // namespace

TEST_CASE("classifier loss examples") {
  const ClassWeights ones;
  const std::array<double, 4> p{0.5, 0.1, 0.25, 0.15};
  CHECK(loss_classifier(bits(0, 0, 0, 0), p, ones) == 0.0);
  const std::array<double, 4> sure{1, 0, 0, 0};
  CHECK(loss_classifier(bits(1, 0, 0, 0), sure, ones) == 0.0);
  CHECK(loss_classifier(bits(1, 0, 1, 0), p, ones) == doctest::Approx(2.0794).epsilon(1e-4));
  CHECK(loss_classifier(bits(1, 0, 1, 0), p, ones) ==
        doctest::Approx(-(std::log(0.5) + std::log(0.25))).epsilon(1e-14));
  const std::array<double, 4> zero{0, 1, 0, 0};
  CHECK(loss_classifier(bits(1, 0, 0, 0), zero, ones) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("quaternion loss examples") {
  Eigen::MatrixXd unit(2, 8);
  unit << 1, 0, 0, 0, 0, 0, 1, 0, 0.5, 0.5, 0.5, 0.5, 0, 0, 0, 1;
  CHECK(loss_quat(unit) == doctest::Approx(0.0));
  Eigen::MatrixXd two(1, 4);
  two << 2, 0, 0, 0;
  CHECK(loss_quat(two) == doctest::Approx(1.0));
  CHECK(loss_quat(Eigen::MatrixXd::Zero(3, 8)) == doctest::Approx(1.0));
}

TEST_CASE("angle loss examples") {
  std::mt19937_64 rng(51);
  const Eigen::MatrixXd in = random_quat_rows(rng, 3, 2, 0.0);
  CHECK(loss_angle(in, in) == 0.0);
  CHECK(loss_angle(in, -in) == doctest::Approx(0.0).scale(1.0));

  // Identity against a quarter turn about x: Euler triples (0,0,0) and
  // (pi/2,0,0) from the matrix oracle.
  Eigen::MatrixXd id(1, 4), quarter(1, 4);
  id << 1, 0, 0, 0;
  quarter << std::cos(pi / 4), std::sin(pi / 4), 0, 0;
  CHECK(loss_angle(id, quarter) == doctest::Approx((pi / 2) * (pi / 2) / 3).epsilon(1e-12));
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(pi) == doctest::Approx(pi));
  CHECK(wrap_angle(-pi) == doctest::Approx(pi));
  CHECK(wrap_angle(6.27 - 0.01) == doctest::Approx(6.26 - 2 * pi));
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng), w = wrap_angle(d);
    CHECK(w > -pi);
    CHECK(w <= pi + 1e-12);
    CHECK(std::abs(std::remainder(w - d, 2 * pi)) < 1e-9);
  }
}

TEST_CASE("affective loss examples") {
  std::mt19937_64 rng(53);
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(18, 48);
  CHECK(loss_affective(a, a) == 0.0);
  CHECK(loss_affective(a, (a.array() + 1).matrix()) == doctest::Approx(1.0));
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(18, 48);
  double s = 0.0;
  for (int i = 0; i < 18; ++i)
    for (int t = 0; t < 48; ++t) s += (a(i, t) - b(i, t)) * (a(i, t) - b(i, t));
  CHECK(loss_affective(a, b) == doctest::Approx(s / (18 * 48)).epsilon(1e-12));
  CHECK_THROWS_AS(loss_affective(a, Eigen::MatrixXd::Zero(18, 47)), ShapeError);
}

TEST_CASE("autoencoder combination") {
  CHECK(combine_autoencoder({1.0, 0.5, 0.25}, LossWeights{}) == doctest::Approx(2.5));
  CHECK(combine_autoencoder({1.0, 0.5, 0.25}, LossWeights{0.0, 0.0}) == doctest::Approx(1.0));
  std::mt19937_64 rng(54);
  const Eigen::MatrixXd in = random_quat_rows(rng, 4, 3, 0.0);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(18, 4);
  CHECK(loss_autoencoder(in, in, a, a, LossWeights{}) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("every term matches its scalar-loop oracle on random micro inputs") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd in = random_quat_rows(rng, 3, 2, 0.0);
    const Eigen::MatrixXd rec = random_quat_rows(rng, 3, 2, 0.2);
    CHECK(loss_quat(rec) == doctest::Approx(oracle_quat(rec)).epsilon(1e-6));
    CHECK(loss_angle(in, rec) == doctest::Approx(oracle_angle(in, rec)).epsilon(1e-6));

    Eigen::VectorXd p(4);
    for (int c = 0; c < 4; ++c) p(c) = u(rng);
    p /= p.sum();
    ClassWeights w;
    for (double& x : w.w) x = u(rng);
    const MultiHotLabel y = bits(trial % 2, (trial / 2) % 2, (trial / 4) % 2, 1);
    CHECK(loss_classifier(y, std::span<const double>(p.data(), 4), w) ==
          doctest::Approx(oracle_cl(y, p, w)).epsilon(1e-6));

    // The differentiable versions agree with the scalar ones.
    ad::Tape t;
    CHECK(ad::quat_loss(t.constant(rec)).value()(0, 0) == doctest::Approx(loss_quat(rec)).epsilon(1e-12));
    CHECK(ad::angle_loss(t.constant(rec), euler_array(in)).value()(0, 0) ==
          doctest::Approx(loss_angle(in, rec)).epsilon(1e-12));
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(3, 18), b = Eigen::MatrixXd::Random(3, 18);
    CHECK(ad::affective_loss(t.constant(b), a).value()(0, 0) ==
          doctest::Approx(loss_affective(a, b)).epsilon(1e-12));
    const std::vector<std::optional<MultiHotLabel>> labels{y};
    CHECK(ad::classifier_loss(t.constant(p.transpose()), labels, w).value()(0, 0) ==
          doctest::Approx(oracle_cl(y, p, w)).epsilon(1e-12));
  }
}

TEST_CASE("batched objective equals the per-sample loop over a mixed batch") {
  ModelConfig c = ModelConfig::standard();
  c.joint_features = 4;
  c.dropout = 0.0;
  GaitModel model(c, 9);
  Dataset ds = generate_synthetic(2, 2, 12);
  std::vector<PreparedSample> prepared;
  for (const auto& s : ds.samples) prepared.push_back(prepare_sample(s));
  std::swap(prepared[1], prepared[2]);  // labeled, unlabeled, labeled, unlabeled
  ClassWeights w;
  w.w = {0.6, 0.7, 0.8, 0.9};
  const LossWeights lw{1.5, 0.5};

  const std::vector<std::size_t> order{0, 1, 2, 3};
  const BatchTargets batch = make_batch(prepared, order);
  ad::Tape tape;
  ForwardOptions opt;  // eval mode, self-guided decoder
  const BatchLoss bl = batch_loss(tape, model, batch, w, lw, opt);

  std::vector<SampleTerms> terms;
  for (const auto& p : prepared) {
    RotationTensor r(c.joints, c.frames);
    for (std::size_t t = 0; t < c.frames; ++t)
      for (std::size_t j = 0; j < c.joints; ++j)
        r.set(j, t, {p.rotations(t, 4 * j), p.rotations(t, 4 * j + 1), p.rotations(t, 4 * j + 2),
                     p.rotations(t, 4 * j + 3)});
    const Eigen::MatrixXd e = model.encode(r);
    SampleTerms s;
    s.rotations = p.rotations;
    s.recon = model.decode(e);
    s.affective = p.affective.transpose();
    s.affective_hat = affective_slice(e);
    s.label = p.label;
    s.probs = model.classify(e);
    terms.push_back(s);
  }
  CHECK(bl.values.total == doctest::Approx(loss_total(terms, w, lw)).epsilon(1e-6));

  // No labels: the total is the mean autoencoder loss.
  for (auto& s : terms) s.label.reset();
  double ae = 0.0;
  for (const auto& s : terms) ae += loss_autoencoder(s.rotations, s.recon, s.affective, s.affective_hat, lw);
  CHECK(loss_total(terms, w, lw) == doctest::Approx(ae / 4).epsilon(1e-12));
}

TEST_CASE("all-labeled batch with perfect outputs has zero loss") {
  std::mt19937_64 rng(56);
  SampleTerms s;
  s.rotations = random_quat_rows(rng, 2, 2, 0.0);
  s.recon = s.rotations;
  s.affective = Eigen::MatrixXd::Random(18, 2);
  s.affective_hat = s.affective;
  s.label = bits(1, 0, 0, 0);
  s.probs = Eigen::Vector4d(1, 0, 0, 0);
  const std::vector<SampleTerms> batch{s, s};
  CHECK(loss_total(batch, ClassWeights{}, LossWeights{}) == doctest::Approx(0.0).scale(1.0));
}
