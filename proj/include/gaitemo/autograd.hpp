#pragma once

// Minimal reverse-mode differentiation over dense matrices. Rows are batch
// (or batch x time) items, columns are features. Each op records a closure
// that pushes its output gradient back to its inputs; Tape::backward replays
// them in reverse creation order.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gaitemo::ad {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;  // false for running normalization statistics
};

// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix init, bool trainable = true);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars(bool trainable_only = true) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

  // Value snapshot / restore in registration order.
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Var constant(Matrix value);
  Var param(Parameter& p);
  // Records an op. `backward` runs only when at least one input needs a
  // gradient and the output received one.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  const Matrix& value(Var v) const;
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  // Adds g into v's gradient; a no-op for nodes that need none.
  void accumulate(Var v, const Matrix& g);
  template <typename Expr>
  void accumulate_block(Var v, Eigen::Index row, Eigen::Index col, const Expr& g);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates; parameter
  // gradients are added into Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool needs_grad = false;
    Backward backward;
  };
  Matrix& grad_buffer(Node& n);
  Var push(Node node);

  std::vector<Node> nodes_;
};

template <typename Expr>
void Tape::accumulate_block(Var v, Eigen::Index row, Eigen::Index col, const Expr& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.needs_grad) return;
  grad_buffer(n).block(row, col, g.rows(), g.cols()) += g;
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_row(Var a, Var row);                 // broadcast a 1 x n row over rows
Var linear(Var x, Var weight, Var bias);     // x W + b
Var elu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax_rows(Var a);
Var sum_all(Var a);

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);

// `blocks` independent affine maps: input column block k (width in) goes
// through weight columns [k*out, (k+1)*out). weight is in x (blocks*out).
Var block_linear(Var x, Var weight, Var bias, Eigen::Index blocks);

// Pooling by vector addition: output chunk g is the sum of the input chunks
// (each `width` wide) listed in groups[g].
Var group_sum(Var x, const std::vector<std::vector<std::size_t>>& groups, Eigen::Index width);
// Un-pooling: output chunk j is a copy of input chunk owner[j].
Var ungroup(Var x, const std::vector<std::size_t>& owner, Eigen::Index width);

// Normalization over rows. In training mode uses batch statistics and updates
// the running estimates in place; otherwise uses the running estimates.
Var batch_norm(Var x, Var gamma, Var beta, Parameter& running_mean, Parameter& running_var,
               bool training, double momentum = 0.1, double eps = 1e-5);

Var dropout(Var x, double p, bool training, std::mt19937_64& rng);

// Rows ordered (t * batch + b) with c columns -> batch rows with T*c columns
// (column t*c + k).
Var time_major_to_flat(Var x, Eigen::Index steps, Eigen::Index batch);

// Gated recurrent unit over `steps` time steps. x rows are (t * batch + b).
// Gate column order is [reset | update | candidate]:
//   r = sig(x Wx_r + bx_r + h Wh_r + bh_r)
//   z = sig(x Wx_z + bx_z + h Wh_z + bh_z)
//   n = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))
//   h' = (1 - z) * n + z * h
// Returns all hidden states, rows (t * batch + b).
Var gru_sequence(Var x, Var h0, Var wx, Var wh, Var bx, Var bh, Eigen::Index steps,
                 Eigen::Index batch);

}  // namespace gaitemo::ad
