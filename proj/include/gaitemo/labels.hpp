#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gaitemo {

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"happy", "sad", "angry",
                                                                         "neutral"};

using LabelProbs = std::array<double, kNumClasses>;

struct MultiHotLabel {
  std::array<std::uint8_t, kNumClasses> bits{};

  bool operator[](std::size_t c) const { return bits[c] != 0; }
  bool any() const;
  bool operator==(const MultiHotLabel&) const = default;
};

// Bit l is set iff L_l > 1/C (strictly).
MultiHotLabel to_multihot(std::span<const double> probs);

struct ClassWeights {
  std::array<double, kNumClasses> w{1.0, 1.0, 1.0, 1.0};
};

// w_l = exp(-p_l), p_l the fraction of training labels with bit l set.
ClassWeights class_weights(std::span<const MultiHotLabel> train_labels);

}  // namespace gaitemo
