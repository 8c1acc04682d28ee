#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "gaitemo/gait_io.hpp"

namespace gaitemo {

namespace {

constexpr double kPi = std::numbers::pi;

// Walking style knobs; angles in radians, cycle length in raw frames.
struct GaitStyle {
  double arm_swing;
  double stride;
  double lean;           // forward pitch of the trunk above the lower back
  double shoulder_roll;  // shoulders rotated forward (slouch)
  double head_pitch;     // positive looks down
  double elbow_flex;
  double arm_abduct;
  double cycle;

  static constexpr std::size_t kCount = 8;
  double& operator[](std::size_t k) { return this->*kFields[k]; }
  double operator[](std::size_t k) const { return this->*kFields[k]; }

 private:
  static const std::array<double GaitStyle::*, kCount> kFields;
};

constexpr std::array<double GaitStyle::*, GaitStyle::kCount> GaitStyle::kFields = {
    &GaitStyle::arm_swing,  &GaitStyle::stride,     &GaitStyle::lean,
    &GaitStyle::shoulder_roll, &GaitStyle::head_pitch, &GaitStyle::elbow_flex,
    &GaitStyle::arm_abduct, &GaitStyle::cycle};

// Happy/angry swing their arms widely; sad walks short, slow and slouched;
// neutral sits in between. Happy and angry differ mostly in elbow flexion,
// abduction and head carriage.
constexpr std::array<GaitStyle, kNumClasses> kPrototypes = {{
    {0.60, 0.45, 0.00, 0.00, -0.15, 0.30, 0.10, 52.0},  // happy
    {0.12, 0.22, 0.30, 0.45, 0.50, 0.15, 0.03, 76.0},   // sad
    {0.55, 0.50, 0.12, 0.08, 0.10, 1.00, 0.28, 46.0},   // angry
    {0.32, 0.35, 0.05, 0.12, 0.12, 0.25, 0.06, 62.0},   // neutral
}};

// Annotator model: a primary class, and with some probability a second class
// that also clears the 1/C threshold. Tuned so label marginals land near
// 58% / 32% / 23% / 14% (happy / sad / angry / neutral).
constexpr std::array<double, kNumClasses> kPrimaryMix = {0.52, 0.26, 0.13, 0.09};
constexpr double kSecondaryRate = 0.27;
constexpr std::array<std::array<double, kNumClasses>, kNumClasses> kSecondaryMix = {{
    {0.0, 0.3, 0.6, 0.1},
    {0.3, 0.0, 0.2, 0.5},
    {0.9, 0.1, 0.0, 0.0},
    {0.5, 0.5, 0.0, 0.0},
}};
constexpr int kAnnotators = 10;

// Per-parameter noise, as a fraction of the spread of that parameter across
// the class prototypes. Controls class overlap.
constexpr double kStyleNoise = 0.15;
constexpr double kPositionNoise = 0.004;  // metres, before body scale
constexpr double kHeadingSpread = 0.2;    // radians

template <typename Rng>
std::size_t draw_index(Rng& rng, const std::array<double, kNumClasses>& weights) {
  std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
  return d(rng);
}

template <typename Rng>
LabelProbs draw_annotations(Rng& rng) {
  std::uniform_int_distribution<int> coin(0, 999);
  const std::size_t primary = draw_index(rng, kPrimaryMix);
  std::array<int, kNumClasses> votes{};
  if (coin(rng) < static_cast<int>(kSecondaryRate * 1000)) {
    const std::size_t secondary = draw_index(rng, kSecondaryMix[primary]);
    votes[secondary] = std::uniform_int_distribution<int>(3, 4)(rng);
    votes[primary] = std::uniform_int_distribution<int>(4, kAnnotators - votes[secondary])(rng);
  } else {
    votes[primary] = std::uniform_int_distribution<int>(6, kAnnotators)(rng);
  }
  // Remaining votes scatter over the untouched classes, at most 2 each so
  // they stay below the 1/C threshold.
  int left = kAnnotators;
  for (int v : votes) left -= v;
  std::vector<std::size_t> others;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (votes[c] == 0) others.push_back(c);
  std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
  while (left > 0) {
    const std::size_t c = others[pick(rng)];
    if (votes[c] < 2) {
      ++votes[c];
      --left;
    }
  }
  LabelProbs probs{};
  for (std::size_t c = 0; c < kNumClasses; ++c)
    probs[c] = static_cast<double>(votes[c]) / kAnnotators;
  return probs;
}

template <typename Rng>
GaitStyle draw_style(Rng& rng, const LabelProbs& mix) {
  GaitStyle style{};
  double total = 0.0;
  for (double p : mix) total += p;
  for (std::size_t k = 0; k < GaitStyle::kCount; ++k) {
    double lo = kPrototypes[0][k], hi = lo, v = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      lo = std::min(lo, kPrototypes[c][k]);
      hi = std::max(hi, kPrototypes[c][k]);
      v += mix[c] / total * kPrototypes[c][k];
    }
    std::normal_distribution<double> noise(0.0, kStyleNoise * (hi - lo));
    style[k] = v + noise(rng);
  }
  style.arm_swing = std::max(0.02, style.arm_swing);
  style.stride = std::max(0.05, style.stride);
  style.elbow_flex = std::max(0.0, style.elbow_flex);
  style.shoulder_roll = std::max(0.0, style.shoulder_roll);
  style.cycle = std::max(30.0, style.cycle);
  return style;
}

Vec3 rot_x(double a, const Vec3& v) { return Eigen::AngleAxisd(a, Vec3::UnitX()) * v; }

// Direction hanging straight down, pitched forward by `forward` radians.
Vec3 limb_dir(double forward) { return {0.0, -std::cos(forward), std::sin(forward)}; }

struct Body {
  double scale, arm, leg, shoulder_width;
};

// One pose of the walk, in the walker's local frame (+x left, +y up, +z
// forward) with the root at the origin. Posture knobs also pulse with the
// gait cycle in proportion to their size, so they show up in frame-to-frame
// motion and not only as a constant offset.
std::array<Vec3, kNumJoints> pose_at(const GaitStyle& base, const Body& body, double phase) {
  using namespace joint;
  std::array<Vec3, kNumJoints> p{};
  const double s = body.scale;
  const double sw = std::sin(phase);
  const double bob = std::sin(2.0 * phase);

  GaitStyle st = base;
  st.lean = base.lean * (1.0 + 0.5 * bob);
  st.shoulder_roll = base.shoulder_roll * (1.0 + 0.4 * bob);
  st.head_pitch = base.head_pitch * (1.0 + 0.5 * std::sin(2.0 * phase + 0.5));
  st.arm_abduct = base.arm_abduct * (1.0 + 0.6 * std::abs(sw));

  const Eigen::Matrix3d twist =
      Eigen::AngleAxisd(0.15 * st.stride * sw, Vec3::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d lean = Eigen::AngleAxisd(st.lean, Vec3::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d upper = lean * Eigen::AngleAxisd(0.5 * st.lean, Vec3::UnitX());

  p[kRoot] = Vec3::Zero();
  p[kLowerBack] = p[kRoot] + twist * Vec3(0, 0.10, 0) * s;
  p[kSpine] = p[kLowerBack] + lean * Vec3(0, 0.20, 0) * s;
  p[kNeck] = p[kSpine] + upper * Vec3(0, 0.22, 0) * s;
  p[kHead] = p[kNeck] + upper * rot_x(st.head_pitch, Vec3(0, 0.15, 0)) * s;

  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;  // left = +x
    const std::size_t sh = side == 0 ? kLeftShoulder : kRightShoulder;
    const Eigen::Matrix3d roll =
        Eigen::AngleAxisd(-sign * st.shoulder_roll, Vec3::UnitY()).toRotationMatrix();
    p[sh] = p[kSpine] +
            upper *
                (roll * Vec3(sign * 0.18 * body.shoulder_width, 0.17 - 0.06 * st.shoulder_roll, 0)) *
                s;

    const double swing = sign * st.arm_swing * sw;
    const Eigen::Matrix3d abduct =
        Eigen::AngleAxisd(sign * st.arm_abduct, Vec3::UnitZ()).toRotationMatrix();
    const Vec3 upper_arm = abduct * limb_dir(swing + 0.5 * st.lean);
    const double bend = st.elbow_flex * (1.0 + 0.5 * sign * sw) +
                        0.3 * st.arm_swing * std::max(0.0, sign * sw);
    const Vec3 fore_arm = abduct * limb_dir(swing + 0.5 * st.lean + bend);
    p[sh + 1] = p[sh] + upper_arm * 0.28 * body.arm * s;
    p[sh + 2] = p[sh + 1] + fore_arm * 0.26 * body.arm * s;
    p[sh + 3] = p[sh + 2] + fore_arm * 0.08 * body.arm * s;

    const std::size_t hip = side == 0 ? kLeftHip : kRightHip;
    const double leg_phase = phase + (side == 0 ? kPi : 0.0);
    const double thigh = st.stride * std::sin(leg_phase);
    const double knee = 0.08 + 1.4 * st.stride * std::max(0.0, std::sin(leg_phase + kPi / 2));
    p[hip] = p[kRoot] + twist * Vec3(sign * 0.09, -0.05, 0) * s;
    p[hip + 1] = p[hip] + limb_dir(thigh) * 0.43 * body.leg * s;
    p[hip + 2] = p[hip + 1] + limb_dir(thigh - knee) * 0.42 * body.leg * s;
    p[hip + 3] = p[hip + 2] + rot_x(-0.3 * (thigh - knee), Vec3(0, -0.05, 0.14)) * s;
  }
  return p;
}

double round_to(double v, double q) { return std::round(v / q) * q; }

}  // namespace

Dataset generate_synthetic(std::size_t n_labeled, std::size_t n_unlabeled, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset ds;
  ds.samples.reserve(n_labeled + n_unlabeled);

  for (std::size_t i = 0; i < n_labeled + n_unlabeled; ++i) {
    const bool labeled = i < n_labeled;
    const LabelProbs probs = draw_annotations(rng);
    const GaitStyle style = draw_style(rng, probs);
    const Body body{0.85 + 0.3 * unit(rng), 0.95 + 0.1 * unit(rng), 0.95 + 0.1 * unit(rng),
                    0.9 + 0.2 * unit(rng)};
    // Walkway capture: everyone walks roughly along +z.
    const double heading = std::normal_distribution<double>(0.0, kHeadingSpread)(rng);
    const double phase0 = 2.0 * kPi * unit(rng);
    const std::size_t frames = unit(rng) < 0.85
                                   ? 240 + static_cast<std::size_t>(60 * unit(rng))
                                   : 150 + static_cast<std::size_t>(90 * unit(rng));
    const double speed = 2.2 * style.stride * body.scale / style.cycle;  // metres per frame
    const Eigen::Matrix3d yaw = Eigen::AngleAxisd(heading, Vec3::UnitY()).toRotationMatrix();
    std::normal_distribution<double> jitter(0.0, kPositionNoise * body.scale);

    GaitSample sample;
    sample.id = (labeled ? "L" : "U") + std::to_string(i);
    sample.positions = PoseSequence(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      const double phase = phase0 + 2.0 * kPi * static_cast<double>(t) / style.cycle;
      const auto local = pose_at(style, body, phase);
      const Vec3 root(0.0, 0.95 * body.scale + 0.02 * style.stride * std::cos(2.0 * phase),
                      speed * static_cast<double>(t));
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        const Vec3 world = yaw * (root + local[j]);
        for (int k = 0; k < 3; ++k)
          sample.positions.at(t, j)(k) = round_to(world(k) + jitter(rng), 1e-5);
      }
    }
    if (labeled) sample.label_probs = probs;
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace gaitemo
