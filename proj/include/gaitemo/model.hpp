#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "gaitemo/autograd.hpp"
#include "gaitemo/rotation.hpp"
#include "gaitemo/skeleton.hpp"

namespace gaitemo {

struct ModelConfig {
  std::size_t joints = kNumJoints;
  std::size_t frames = 48;
  std::size_t classes = 4;
  std::size_t embedding = 32;        // E
  std::size_t affective_dims = 18;   // A; the first A embedding rows are tied to the features
  std::size_t joint_features = 16;   // h
  std::size_t encoder_gru_layers = 2;
  std::size_t classifier_hidden1 = 16;
  std::size_t classifier_hidden2 = 8;
  double dropout = 0.1;
  bool use_hierarchical_pooling = true;
  bool use_affective_loss = true;
  bool use_decoder = true;
  // Kinematic part groups over joint indices; must partition [0, joints).
  std::vector<std::vector<std::size_t>> part_groups;

  // Default widths with the canonical skeleton's five part groups.
  static ModelConfig standard();

  void validate() const;  // throws ConfigError
  std::size_t rotation_width() const { return 4 * joints; }
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ForwardOptions {
  bool training = false;
  // Probability of feeding the ground-truth previous frame to the
  // autoregressive decoder, drawn independently at every step.
  double teacher_forcing = 0.0;
  std::mt19937_64* rng = nullptr;  // required when training or 0 < teacher_forcing < 1
};

// Batched tensors use time-major rows: row t * batch + b holds sample b at
// frame t. Rotation rows are 4J wide (joint-major, w x y z).
class GaitModel {
 public:
  GaitModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }

  // (T*B) x 4J rotations -> (T*B) x E embedding.
  ad::Var encode(ad::Tape& tape, const ad::Matrix& rotations, std::size_t batch,
                 const ForwardOptions& opt);
  // (T*B) x E embedding -> (T*B) x 4J raw quaternions. `teacher` holds the
  // ground-truth rotations (same layout as the encoder input); it may be empty
  // when teacher forcing is 0.
  ad::Var decode(ad::Tape& tape, ad::Var embedding, const ad::Matrix& teacher, std::size_t batch,
                 const ForwardOptions& opt);
  // (T*B) x E embedding -> B x C probabilities (softmax).
  ad::Var classify(ad::Tape& tape, ad::Var embedding, std::size_t batch,
                   const ForwardOptions& opt);

  // Single-sample conveniences in eval mode.
  Eigen::MatrixXd encode(const RotationTensor& rotations);          // E x T
  Eigen::MatrixXd decode(const Eigen::MatrixXd& embedding,          // J x T x 4 as T x 4J
                         const RotationTensor* teacher = nullptr, double teacher_forcing = 0.0);
  Eigen::VectorXd classify(const Eigen::MatrixXd& embedding);       // C

  // Eval-mode class probabilities for a batch of samples, B x C.
  Eigen::MatrixXd predict(const std::vector<const RotationTensor*>& samples);

 private:
  struct Dense {
    ad::Parameter* weight;
    ad::Parameter* bias;
  };
  struct Norm {
    ad::Parameter* gamma;
    ad::Parameter* beta;
    ad::Parameter* mean;
    ad::Parameter* var;
  };
  struct Gru {
    ad::Parameter *wx, *wh, *bx, *bh;
  };

  Dense add_dense(const std::string& name, std::size_t in, std::size_t out, std::size_t blocks = 1);
  Norm add_norm(const std::string& name, std::size_t width);
  Gru add_gru(const std::string& name, std::size_t in, std::size_t hidden);

  ad::Var dense(ad::Tape& t, const Dense& d, ad::Var x, std::size_t blocks = 1);
  // dense -> normalization -> ELU -> (optional) dropout
  ad::Var layer(ad::Tape& t, const Dense& d, const Norm& n, ad::Var x, const ForwardOptions& opt,
                bool drop, std::size_t blocks = 1);
  ad::Var run_gru(ad::Tape& t, const Gru& g, ad::Var x, ad::Var h0, std::size_t steps,
                  std::size_t batch);

  ModelConfig config_;
  ad::ParameterStore params_;
  std::mt19937_64 init_rng_;
  std::vector<std::size_t> joint_owner_;  // joint -> part group

  // encoder
  std::vector<Gru> enc_gru_;
  Dense joint_units_{}, part_layers_{}, body_layer_{}, flat_layer_{}, embed_layer_{};
  Norm joint_norm_{}, part_norm_{}, body_norm_{}, flat_norm_{}, embed_norm_{};
  // decoder
  Dense dec_parts_{}, readout_{};
  Norm dec_parts_norm_{};
  Gru dec_first_{}, dec_next_{};
  // classifier
  Dense cls1_{}, cls2_{}, cls_out_{};
  Norm cls1_norm_{}, cls2_norm_{};
};

// Rows of `embedding` (E x T) 0..A-1.
Eigen::MatrixXd affective_slice(const Eigen::MatrixXd& embedding, std::size_t affective_dims = 18);

// Packs rotation tensors into the time-major (T*B) x 4J layout.
ad::Matrix pack_rotations(const std::vector<const RotationTensor*>& samples);

}  // namespace gaitemo
