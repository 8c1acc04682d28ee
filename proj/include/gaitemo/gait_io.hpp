#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaitemo/labels.hpp"
#include "gaitemo/pose.hpp"

namespace gaitemo {

inline constexpr std::size_t kClipFrames = 240;
inline constexpr std::size_t kFrameStride = 5;
inline constexpr std::size_t kNumFrames = kClipFrames / kFrameStride;  // T = 48

struct GaitSample {
  std::string id;
  PoseSequence positions;
  std::optional<LabelProbs> label_probs;
  std::optional<std::string> source;

  bool labeled() const { return label_probs.has_value(); }
  bool operator==(const GaitSample&) const = default;
};

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split s);

struct Dataset {
  std::vector<GaitSample> samples;
  std::map<std::string, Split> split_assignment;

  std::size_t num_labeled() const;
  // Indices (into samples) assigned to split s; labeled_only filters further.
  std::vector<std::size_t> indices(Split s, bool labeled_only = false) const;
  std::vector<std::size_t> labeled_indices() const;
};

// Throws SchemaError if a sample violates the GaitSample invariants.
void validate_sample(const GaitSample& sample);

// JSON lines: {"id", "frames": T x 21 x 3, "label_probs": [4] | null, "source"?}.
Dataset load_dataset(const std::filesystem::path& path);
GaitSample parse_sample_record(const std::string& line, std::size_t line_number);
std::string format_sample_record(const GaitSample& sample);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Clip or zero-pad (at the end) to 240 frames, then keep frames 0, 5, ..., 235.
PoseSequence preprocess_temporal(const PoseSequence& positions);
PoseSequence preprocess_temporal(const GaitSample& sample);

// Labeled samples split 8:1:1 train:val:test, deterministic in seed; unlabeled
// samples always go to train. When samples carry source metadata, whole
// sources are assigned to the test split so test sources never appear in
// train/val.
Dataset split_dataset(Dataset ds, std::uint64_t seed);

// Procedural walk cycles on the canonical skeleton with class-dependent style
// parameters; see docs/synthetic.md.
Dataset generate_synthetic(std::size_t n_labeled, std::size_t n_unlabeled, std::uint64_t seed);

}  // namespace gaitemo
