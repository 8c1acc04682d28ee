#include "gaitemo/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gaitemo/errors.hpp"

namespace gaitemo {

double average_precision(std::span<const ScoredItem> items) {
  const auto positives = std::count_if(items.begin(), items.end(),
                                       [](const ScoredItem& it) { return it.relevant; });
  if (positives == 0) throw UndefinedAPError("average precision needs at least one relevant item");

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].score > items[b].score;
  });

  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!items[order[rank]].relevant) continue;
    ++hits;
    const double precision = static_cast<double>(hits) / static_cast<double>(rank + 1);
    ap += precision / static_cast<double>(positives);
  }
  return ap;
}

EvalReport evaluate(const Eigen::MatrixXd& pred_probs, std::span<const MultiHotLabel> truths) {
  if (pred_probs.cols() != static_cast<Eigen::Index>(kNumClasses) ||
      pred_probs.rows() != static_cast<Eigen::Index>(truths.size()))
    throw ShapeError("prediction matrix must be N x " + std::to_string(kNumClasses) +
                     " with one row per truth label");

  EvalReport report;
  std::vector<ScoredItem> column(truths.size());
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    bool any_positive = false;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      column[i] = {pred_probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)),
                   truths[i][c]};
      any_positive = any_positive || truths[i][c];
    }
    if (!any_positive) {
      report.skipped_classes.emplace_back(kClassNames[c]);
      continue;
    }
    report.ap[c] = average_precision(column);
    sum += *report.ap[c];
    ++evaluated;
  }
  if (evaluated == 0) throw UndefinedAPError("no class has a positive example");
  report.map = sum / static_cast<double>(evaluated);
  return report;
}

void to_json(nlohmann::json& j, const EvalReport& report) {
  nlohmann::json ap = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c)
    ap[std::string(kClassNames[c])] = report.ap[c] ? nlohmann::json(*report.ap[c]) : nlohmann::json(nullptr);
  j = {{"ap", ap}, {"map", report.map}, {"skipped_classes", report.skipped_classes}};
}

}  // namespace gaitemo
