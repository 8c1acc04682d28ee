#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "gaitemo/labels.hpp"

namespace gaitemo {

struct ScoredItem {
  double score = 0.0;
  bool relevant = false;
};

// Non-interpolated AP: sum over positive hits of (recall increment) x
// (precision at that cutoff), ranking by descending score with ties kept in
// input order. Throws UndefinedAPError when nothing is relevant.
double average_precision(std::span<const ScoredItem> items);

struct EvalReport {
  std::array<std::optional<double>, kNumClasses> ap{};
  double map = 0.0;
  // Classes without a single positive in the truths; excluded from the mean.
  std::vector<std::string> skipped_classes;
};

// pred_probs is N x C.
EvalReport evaluate(const Eigen::MatrixXd& pred_probs, std::span<const MultiHotLabel> truths);

void to_json(nlohmann::json& j, const EvalReport& report);

}  // namespace gaitemo
