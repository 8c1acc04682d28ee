#include "gaitemo/labels.hpp"

#include <algorithm>
#include <cmath>

#include "gaitemo/errors.hpp"

namespace gaitemo {

bool MultiHotLabel::any() const {
  return std::any_of(bits.begin(), bits.end(), [](auto b) { return b != 0; });
}

MultiHotLabel to_multihot(std::span<const double> probs) {
  if (probs.size() != kNumClasses)
    throw ShapeError("label vector must have " + std::to_string(kNumClasses) + " entries");
  const double chance = 1.0 / static_cast<double>(kNumClasses);
  MultiHotLabel out;
  for (std::size_t c = 0; c < kNumClasses; ++c) out.bits[c] = probs[c] > chance ? 1 : 0;
  return out;
}

ClassWeights class_weights(std::span<const MultiHotLabel> train_labels) {
  if (train_labels.empty()) throw EmptyError("class weights need at least one training label");
  ClassWeights cw;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto hits = std::count_if(train_labels.begin(), train_labels.end(),
                                    [c](const MultiHotLabel& y) { return y[c]; });
    const double p = static_cast<double>(hits) / static_cast<double>(train_labels.size());
    cw.w[c] = std::exp(-p);
  }
  return cw;
}

}  // namespace gaitemo
