#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gaitemo/autograd.hpp"
#include "gaitemo/labels.hpp"
#include "gaitemo/losses.hpp"
#include "gaitemo/metrics.hpp"
#include "gaitemo/model.hpp"
#include "gaitemo/pipeline.hpp"

namespace gaitemo {

struct Schedule {
  double learning_rate = 1e-3;
  double lr_decay = 0.999;        // per epoch
  double teacher_decay = 0.995;   // beta
};

// lr * decay^epoch and beta^epoch.
double learning_rate_at(std::size_t epoch, const Schedule& s = {});
double teacher_forcing_at(std::size_t epoch, const Schedule& s = {});

struct TrainConfig {
  ModelConfig model = ModelConfig::standard();
  LossWeights weights;
  Schedule schedule;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool use_unlabeled = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Adam over the trainable parameters of a store.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ad::ParameterStore& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

// Time-major batch targets built from prepared samples.
struct BatchTargets {
  std::size_t batch = 0;
  ad::Matrix rotations;  // (T*B) x 4J
  ad::Matrix euler;      // (T*B) x 3J
  ad::Matrix affective;  // (T*B) x A
  std::vector<std::optional<MultiHotLabel>> labels;
  bool any_labeled() const;
};
BatchTargets make_batch(std::span<const PreparedSample> samples, std::span<const std::size_t> order);

struct LossValues {
  double total = 0.0, cl = 0.0, ang = 0.0, quat = 0.0, aff = 0.0;
};

// Builds the batch-mean objective on the tape: sum of labeled classifier
// losses / B plus the mean autoencoder terms. The decoder and affective terms
// are skipped when the model has no decoder or affective loss is off.
struct BatchLoss {
  ad::Var total;
  LossValues values;
};
BatchLoss batch_loss(ad::Tape& tape, GaitModel& model, const BatchTargets& batch,
                     const ClassWeights& w, const LossWeights& lw, const ForwardOptions& opt);

// Eval-mode class probabilities, N x C.
Eigen::MatrixXd predict_probs(GaitModel& model, std::span<const PreparedSample> samples);
// mAP over the labeled samples, or NaN when no class is evaluable.
double labeled_map(GaitModel& model, std::span<const PreparedSample> samples);
EvalReport evaluate_samples(GaitModel& model, std::span<const PreparedSample> samples);

struct EpochLog {
  std::size_t epoch = 0;
  LossValues loss;
  double lr = 0.0;
  double tf_prob = 0.0;
  double val_map = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_map = 0.0;
  ClassWeights weights;
};

// Runs the semi-supervised loop. On return the model holds the parameters of
// the epoch with the best validation mAP (the last epoch when validation has
// nothing to score). Throws DivergenceError on a non-finite loss.
TrainResult train(GaitModel& model, std::span<const PreparedSample> train_set,
                  std::span<const PreparedSample> val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// CSV header and rows for the per-epoch log.
std::string epoch_csv_header();
std::string epoch_csv_row(const EpochLog& e);

// Checkpoint: JSON with the model config, training config, epoch and every
// parameter (including normalization statistics) as exact doubles.
void save_checkpoint(const GaitModel& model, const TrainConfig& cfg, std::size_t epoch,
                     const std::filesystem::path& path);
struct Checkpoint {
  TrainConfig config;
  std::size_t epoch = 0;
  std::unique_ptr<GaitModel> model;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gaitemo
