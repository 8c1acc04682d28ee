#pragma once

// Command implementations behind the CLI. Each writes its artifacts and
// returns a summary so callers (CLI, tests, Python) share one code path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gaitemo/affective.hpp"
#include "gaitemo/metrics.hpp"
#include "gaitemo/training.hpp"

namespace gaitemo {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path out;
  std::optional<std::filesystem::path> cache;
  TrainConfig train;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// defaults <- config file <- overrides (JSON merge patches, later wins).
// Throws ConfigError when no seed ends up set.
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file,
                             const nlohmann::json& overrides);

// {"tool", "version", "command", "config"}.
nlohmann::json metadata(const std::string& command, const nlohmann::json& config);

// Writes `doc` as pretty JSON; throws IOError.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

// ---- synth ---------------------------------------------------------------------

struct SynthOptions {
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
// Dataset at `out`, metadata beside it in `<out>.meta.json`.
void cmd_synth(const SynthOptions& opt);

// ---- stats ---------------------------------------------------------------------

struct StatsOptions {
  std::filesystem::path dataset;
  std::filesystem::path out;  // CSV
  std::size_t bins = 10;
  std::size_t features = 18;
};
std::vector<FeatureHistogram> cmd_stats(const StatsOptions& opt);

// ---- train / eval / predict ------------------------------------------------------

struct TrainSummary {
  TrainResult result;
  EvalReport test;
  std::filesystem::path checkpoint;
};
// Writes checkpoint.json, epochs.csv, run_config.json and report.json
// (test-split evaluation) into cfg.out.
TrainSummary cmd_train(const RunConfig& cfg);

struct EvalOptions {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> checkpoint;
  // CSV with an id column and one column per class (happy or p_happy, ...);
  // scored instead of a model. predict output is accepted as is.
  std::optional<std::filesystem::path> predictions;
  std::string split = "test";  // train | val | test | all
  std::optional<std::uint64_t> seed;  // split seed; defaults to the checkpoint's
  std::filesystem::path out;
};
EvalReport cmd_eval(const EvalOptions& opt);

struct PredictOptions {
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path out;  // CSV
};
struct Prediction {
  std::string id;
  LabelProbs probs;
  MultiHotLabel bits;
};
std::vector<Prediction> cmd_predict(const PredictOptions& opt);

// ---- ablate / sweep ----------------------------------------------------------------

struct AblationRow {
  std::uint64_t seed = 0;
  bool all_data = true;
  bool hp = true;
  bool al = true;
  EvalReport report;
  double val_map = 0.0;
};
std::string ablation_row_name(bool all_data, bool hp, bool al);
// Applies one grid cell to a base config. The labeled-only row with neither
// pooling nor affective loss also drops the decoder.
TrainConfig ablation_config(const TrainConfig& base, bool all_data, bool hp, bool al);
// 8 rows per seed, in order labeled-only then all-data, each over
// (no HP, no AL), (HP), (AL), (HP + AL). Writes ablation.csv and per-row runs.
std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds);

struct SweepRow {
  std::uint64_t seed = 0;
  double fraction = 0.0;
  std::size_t unlabeled_used = 0;
  EvalReport report;
};
// Trains with the first fraction * U unlabeled samples (seeded order) for each
// fraction. Writes sweep.csv.
std::vector<SweepRow> cmd_sweep(const RunConfig& base, const std::vector<double>& fractions,
                                const std::vector<std::uint64_t>& seeds);

}  // namespace gaitemo
