#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gaitemo/gait_io.hpp"
#include "gaitemo/labels.hpp"
#include "gaitemo/skeleton.hpp"

namespace gaitemo {

// Network-ready view of one sample after temporal preprocessing.
struct PreparedSample {
  std::string id;
  Eigen::MatrixXd rotations;  // T x 4J
  Eigen::MatrixXd euler;      // T x 3J, Euler angles of `rotations`
  Eigen::MatrixXd affective;  // T x A (transposed affective matrix)
  std::optional<MultiHotLabel> label;
};

PreparedSample prepare_sample(const GaitSample& sample, const Skeleton& skel = canonical_skeleton());
std::vector<PreparedSample> prepare_samples(const Dataset& ds,
                                            const std::vector<std::size_t>& indices);

// Preprocessed cache: a JSON object keyed by sample id, each entry holding
// "rotations" (T x 4J) and "affective" (T x A) as nested arrays. Labels are
// not cached; they come from the dataset.
void save_cache(const std::vector<PreparedSample>& samples, const std::filesystem::path& path);
// Fills rotations/euler/affective for samples whose id is in the cache and
// returns how many were found.
std::size_t load_cache(std::vector<PreparedSample>& samples, const std::filesystem::path& path);

}  // namespace gaitemo
