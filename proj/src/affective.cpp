#include "gaitemo/affective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "gaitemo/errors.hpp"
#include "gaitemo/labels.hpp"
#include "gaitemo/rotation.hpp"

namespace gaitemo {

namespace {

using K = FeatureKind;

// "Delta X to Y" rows are triangles (left X, right X, Y).
constexpr std::array<AffectiveFeatureDef, kNumAffective> kTable = {{
    {K::kAngle, "shoulders at lower back", {"left_shoulder", "right_shoulder", "lower_back"}},
    {K::kAngle, "hands at root", {"left_hand", "right_hand", "root"}},
    {K::kAngle, "left shoulder and hand at elbow", {"left_shoulder", "left_hand", "left_elbow"}},
    {K::kAngle, "right shoulder and hand at elbow", {"right_shoulder", "right_hand", "right_elbow"}},
    {K::kAngle, "head and left shoulder at neck", {"head", "left_shoulder", "neck"}},
    {K::kAngle, "head and right shoulder at neck", {"head", "right_shoulder", "neck"}},
    {K::kAngle, "head and left knee at root", {"head", "left_knee", "root"}},
    {K::kAngle, "head and right knee at root", {"head", "right_knee", "root"}},
    {K::kAngle, "left toe and right toe at root", {"left_toe", "right_toe", "root"}},
    {K::kAngle, "left hip and toe at knee", {"left_hip", "left_toe", "left_knee"}},
    {K::kAngle, "right hip and toe at knee", {"right_hip", "right_toe", "right_knee"}},
    {K::kDistanceRatio, "LHI to neck and LHI to root",
     {"left_hand_index", "neck", "left_hand_index", "root"}},
    {K::kDistanceRatio, "RHI to neck and RHI to root",
     {"right_hand_index", "neck", "right_hand_index", "root"}},
    {K::kDistanceRatio, "LHI to RHI and neck to root",
     {"left_hand_index", "right_hand_index", "neck", "root"}},
    {K::kDistanceRatio, "left toe to right toe and neck to root",
     {"left_toe", "right_toe", "neck", "root"}},
    {K::kAreaRatio, "shoulders to lower back and shoulders to root",
     {"left_shoulder", "right_shoulder", "lower_back", "left_shoulder", "right_shoulder", "root"}},
    {K::kAreaRatio, "hands to lower back and hands to root",
     {"left_hand", "right_hand", "lower_back", "left_hand", "right_hand", "root"}},
    {K::kAreaRatio, "hand indices to neck and toes to root",
     {"left_hand_index", "right_hand_index", "neck", "left_toe", "right_toe", "root"}},
}};

double triangle_area(const std::array<Vec3, 3>& t) {
  return 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
}

struct ResolvedFeature {
  FeatureKind kind;
  std::array<std::size_t, 6> joints{};
};

std::array<ResolvedFeature, kNumAffective> resolve(const Skeleton& skel) {
  std::array<ResolvedFeature, kNumAffective> out{};
  for (std::size_t f = 0; f < kNumAffective; ++f) {
    out[f].kind = kTable[f].kind;
    for (std::size_t k = 0; k < 6; ++k)
      if (!kTable[f].joints[k].empty()) out[f].joints[k] = skel.index_of(kTable[f].joints[k]);
  }
  return out;
}

double evaluate_feature(const ResolvedFeature& def, const PoseSequence& pos, std::size_t t) {
  auto p = [&](std::size_t k) -> Vec3 { return pos.at(t, def.joints[k]); };
  switch (def.kind) {
    case K::kAngle:
      return angle_at(p(0), p(1), p(2));
    case K::kDistanceRatio:
      return distance_ratio(p(0), p(1), p(2), p(3));
    case K::kAreaRatio:
      return area_ratio({p(0), p(1), p(2)}, {p(3), p(4), p(5)});
  }
  return 0.0;
}

double scale_feature(FeatureKind kind, double raw) {
  if (kind == K::kAngle) return std::clamp(raw / std::numbers::pi, 0.0, 1.0);
  return raw / (1.0 + raw);
}

}  // namespace

const std::array<AffectiveFeatureDef, kNumAffective>& affective_feature_table() { return kTable; }

double angle_at(const Vec3& a, const Vec3& b, const Vec3& apex) {
  const Vec3 u = a - apex;
  const Vec3 v = b - apex;
  if (u.norm() < kDegenerateEps || v.norm() < kDegenerateEps) return 0.0;
  // atan2 form stays accurate near 0 and pi where acos loses precision.
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

double distance_ratio(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4) {
  const double den = (p3 - p4).norm();
  if (den < kDegenerateEps) return 0.0;
  return (p1 - p2).norm() / den;
}

double area_ratio(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2) {
  const double den = triangle_area(t2);
  if (den < 1e-12) return 0.0;
  return triangle_area(t1) / den;
}

std::array<double, kNumAffective> raw_affective_frame(const PoseSequence& positions,
                                                      std::size_t frame, const Skeleton& skel) {
  const auto defs = resolve(skel);
  std::array<double, kNumAffective> out{};
  for (std::size_t f = 0; f < kNumAffective; ++f)
    out[f] = evaluate_feature(defs[f], positions, frame);
  return out;
}

AffectiveMatrix extract_affective(const PoseSequence& positions, const Skeleton& skel) {
  if (positions.joints() != skel.num_joints())
    throw ShapeError("positions have " + std::to_string(positions.joints()) +
                     " joints, skeleton has " + std::to_string(skel.num_joints()));
  const auto defs = resolve(skel);
  AffectiveMatrix out(kNumAffective, positions.frames());
  for (std::size_t t = 0; t < positions.frames(); ++t)
    for (std::size_t f = 0; f < kNumAffective; ++f)
      out(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(t)) =
          scale_feature(defs[f].kind, evaluate_feature(defs[f], positions, t));
  return out;
}

std::vector<FeatureHistogram> mean_feature_histograms(const Dataset& ds, std::size_t bins,
                                                      std::size_t num_features) {
  if (bins == 0) throw SchemaError("histograms need at least one bin");
  num_features = std::min(num_features, kNumAffective);
  std::vector<FeatureHistogram> table(num_features * kNumClasses);
  for (std::size_t f = 0; f < num_features; ++f)
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      auto& h = table[f * kNumClasses + c];
      h.feature = f;
      h.cls = c;
      h.counts.assign(bins, 0);
      for (std::size_t b = 0; b <= bins; ++b)
        h.edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
    }

  std::vector<double> sums(table.size(), 0.0);
  std::size_t labeled = 0;
  for (const auto& sample : ds.samples) {
    if (!sample.labeled()) continue;
    ++labeled;
    const MultiHotLabel y = to_multihot(*sample.label_probs);
    if (!y.any()) continue;
    const Eigen::VectorXd means = extract_affective(preprocess_temporal(sample)).rowwise().mean();
    for (std::size_t f = 0; f < num_features; ++f) {
      const double m = means(static_cast<Eigen::Index>(f));
      const auto bin = std::min(bins - 1, static_cast<std::size_t>(m * static_cast<double>(bins)));
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (!y[c]) continue;
        auto& h = table[f * kNumClasses + c];
        ++h.counts[bin];
        sums[f * kNumClasses + c] += m;
      }
    }
  }
  if (labeled == 0) throw EmptyError("feature histograms need labeled samples");
  for (std::size_t k = 0; k < table.size(); ++k) {
    std::size_t n = 0;
    for (auto c : table[k].counts) n += c;
    table[k].mean = n > 0 ? sums[k] / static_cast<double>(n) : 0.0;
  }
  return table;
}

void write_histogram_csv(std::ostream& os, const std::vector<FeatureHistogram>& table) {
  os << "feature,class,bin_left,bin_right,count\n";
  for (const auto& h : table)
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      os << '"' << kTable[h.feature].name << "\"," << kClassNames[h.cls] << ',' << h.edges[b]
         << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
}

}  // namespace gaitemo
