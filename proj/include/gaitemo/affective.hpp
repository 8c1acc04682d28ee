#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gaitemo/gait_io.hpp"
#include "gaitemo/pose.hpp"
#include "gaitemo/skeleton.hpp"

namespace gaitemo {

inline constexpr std::size_t kNumAffective = 18;

enum class FeatureKind { kAngle, kDistanceRatio, kAreaRatio };

// One row of the affective feature table. Joint roles by kind:
//   angle:          joints[0], joints[1] seen from apex joints[2]
//   distance ratio: |joints[0]-joints[1]| / |joints[2]-joints[3]|
//   area ratio:     area(joints[0..2]) / area(joints[3..5])
struct AffectiveFeatureDef {
  FeatureKind kind;
  std::string_view name;
  std::array<std::string_view, 6> joints;
};

const std::array<AffectiveFeatureDef, kNumAffective>& affective_feature_table();

// Angle between (a - apex) and (b - apex), in [0, pi]; 0 when either arm is
// shorter than 1e-8.
double angle_at(const Vec3& a, const Vec3& b, const Vec3& apex);
// |p1 - p2| / |p3 - p4|; 0 when the denominator is below 1e-8.
double distance_ratio(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4);
// area(t1) / area(t2); 0 when area(t2) is below 1e-12.
double area_ratio(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2);

// Unscaled per-frame feature values (angles in radians, raw ratios).
std::array<double, kNumAffective> raw_affective_frame(const PoseSequence& positions,
                                                      std::size_t frame,
                                                      const Skeleton& skel = canonical_skeleton());

// A x T matrix in [0, 1]: angles / pi, ratios r / (1 + r). Rows follow
// affective_feature_table().
using AffectiveMatrix = Eigen::MatrixXd;
AffectiveMatrix extract_affective(const PoseSequence& positions,
                                  const Skeleton& skel = canonical_skeleton());

struct FeatureHistogram {
  std::size_t feature = 0;
  std::size_t cls = 0;
  std::vector<double> edges;  // bins + 1 edges over [0, 1]
  std::vector<std::size_t> counts;
  double mean = 0.0;  // mean of the contributing time-mean values
};

// For every feature and class, a histogram of per-sample time-mean feature
// values over the labeled samples. Multi-label samples count once per class.
// Throws EmptyError when the dataset has no labeled sample.
std::vector<FeatureHistogram> mean_feature_histograms(const Dataset& ds, std::size_t bins,
                                                      std::size_t num_features = kNumAffective);

// CSV with columns feature,class,bin_left,bin_right,count.
void write_histogram_csv(std::ostream& os, const std::vector<FeatureHistogram>& table);

}  // namespace gaitemo
