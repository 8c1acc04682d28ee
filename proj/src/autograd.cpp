#include "gaitemo/autograd.hpp"

#include <cmath>

#include "gaitemo/errors.hpp"

namespace gaitemo::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

// ---- ParameterStore ----------------------------------------------------------

Parameter& ParameterStore::add(const std::string& name, Matrix init, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->trainable = trainable;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw ConfigError("unknown parameter '" + name + "'");
}

const Parameter& ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  throw ConfigError("unknown parameter '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

std::size_t ParameterStore::num_scalars(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p->trainable || !trainable_only) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::vector<Matrix> ParameterStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw ConfigError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

// ---- Tape --------------------------------------------------------------------

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.needs_grad = p.trainable;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) n.needs_grad = n.needs_grad || needs_grad(in);
  if (n.needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.param ? n.param->value : n.value;
}

Matrix& Tape::grad_buffer(Node& n) {
  if (n.grad.size() == 0) {
    const Matrix& v = n.param ? n.param->value : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.needs_grad) return;
  grad_buffer(n) += g;
}

void Tape::backward(Var loss) {
  require(value(loss).size() == 1, "backward needs a scalar loss");
  Node& root = nodes_[static_cast<std::size_t>(loss.id)];
  if (!root.needs_grad) return;
  grad_buffer(root).setOnes();
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

// ---- elementwise and linear ops ----------------------------------------------

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tape& t = *a.tape;
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shapes differ");
  return a.tape->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shapes differ");
  return a.tape->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shapes differ");
  return a.tape->record(a.value().cwiseProduct(b.value()), {a, b},
                        [a, b](Tape& t, const Matrix& g) {
                          if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
                          if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
                        });
}

Var scale(Var a, double s) {
  return a.tape->record(a.value() * s, {a},
                        [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: bias must be 1 x cols");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape->record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var linear(Var x, Var weight, Var bias) {
  require(x.cols() == weight.rows(), "linear: input width differs from weight rows");
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "linear: bias shape");
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return x.tape->record(std::move(out), {x, weight, bias},
                        [x, weight, bias](Tape& t, const Matrix& g) {
                          if (t.needs_grad(x)) t.accumulate(x, g * weight.value().transpose());
                          if (t.needs_grad(weight))
                            t.accumulate(weight, x.value().transpose() * g);
                          if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
                        });
}

Var elu(Var a) {
  auto y = std::make_shared<Matrix>(
      a.value().unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); }));
  return a.tape->record(Matrix(*y), {a}, [a, y](Tape& t, const Matrix& g) {
    Matrix d = g;
    const Matrix& x = a.value();
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (x(i) <= 0.0) d(i) *= (*y)(i) + 1.0;
    t.accumulate(a, d);
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  auto y = std::make_shared<Matrix>(out);
  return a.tape->record(std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(y->cwiseProduct((1.0 - y->array()).matrix())));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  auto y = std::make_shared<Matrix>(out);
  return a.tape->record(std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
    t.accumulate(a, (g.array() * (1.0 - y->array().square())).matrix());
  });
}

Var softmax_rows(Var a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  auto y = std::make_shared<Matrix>(out);
  return a.tape->record(std::move(out), {a}, [a, y](Tape& t, const Matrix& g) {
    Matrix d(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double dot = g.row(r).dot(y->row(r));
      d.row(r) = y->row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.accumulate(a, d);
  });
}

Var sum_all(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

// ---- shape ops ---------------------------------------------------------------

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols out of range");
  return a.tape->record(a.value().middleCols(start, count), {a},
                        [a, start](Tape& t, const Matrix& g) {
                          t.accumulate_block(a, 0, start, g);
                        });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows out of range");
  return a.tape->record(a.value().middleRows(start, count), {a},
                        [a, start](Tape& t, const Matrix& g) {
                          t.accumulate_block(a, start, 0, g);
                        });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return parts.front().tape->record(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Eigen::Index c = 0;
    for (const Var& p : parts) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape->record(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var block_linear(Var x, Var weight, Var bias, Eigen::Index blocks) {
  const Eigen::Index in = weight.rows();
  require(blocks > 0 && weight.cols() % blocks == 0, "block_linear: weight width");
  const Eigen::Index out_w = weight.cols() / blocks;
  require(x.cols() == in * blocks, "block_linear: input width");
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "block_linear: bias shape");
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  Matrix out(xv.rows(), weight.cols());
  for (Eigen::Index k = 0; k < blocks; ++k)
    out.middleCols(k * out_w, out_w).noalias() =
        xv.middleCols(k * in, in) * wv.middleCols(k * out_w, out_w);
  out.rowwise() += bias.value().row(0);
  return x.tape->record(
      std::move(out), {x, weight, bias},
      [x, weight, bias, blocks, in, out_w](Tape& t, const Matrix& g) {
        const Matrix& xv = x.value();
        const Matrix& wv = weight.value();
        if (t.needs_grad(x)) {
          Matrix dx(xv.rows(), xv.cols());
          for (Eigen::Index k = 0; k < blocks; ++k)
            dx.middleCols(k * in, in).noalias() =
                g.middleCols(k * out_w, out_w) * wv.middleCols(k * out_w, out_w).transpose();
          t.accumulate(x, dx);
        }
        if (t.needs_grad(weight)) {
          Matrix dw(wv.rows(), wv.cols());
          for (Eigen::Index k = 0; k < blocks; ++k)
            dw.middleCols(k * out_w, out_w).noalias() =
                xv.middleCols(k * in, in).transpose() * g.middleCols(k * out_w, out_w);
          t.accumulate(weight, dw);
        }
        if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
      });
}

Var group_sum(Var x, const std::vector<std::vector<std::size_t>>& groups, Eigen::Index width) {
  const auto n_groups = static_cast<Eigen::Index>(groups.size());
  for (const auto& members : groups)
    for (std::size_t j : members)
      require(static_cast<Eigen::Index>(j + 1) * width <= x.cols(), "group_sum: joint index");
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(xv.rows(), n_groups * width);
  for (Eigen::Index g = 0; g < n_groups; ++g)
    for (std::size_t j : groups[static_cast<std::size_t>(g)])
      out.middleCols(g * width, width) += xv.middleCols(static_cast<Eigen::Index>(j) * width, width);
  return x.tape->record(std::move(out), {x}, [x, groups, width](Tape& t, const Matrix& gr) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (std::size_t j : groups[g])
        dx.middleCols(static_cast<Eigen::Index>(j) * width, width) +=
            gr.middleCols(static_cast<Eigen::Index>(g) * width, width);
    t.accumulate(x, dx);
  });
}

Var ungroup(Var x, const std::vector<std::size_t>& owner, Eigen::Index width) {
  for (std::size_t g : owner)
    require(static_cast<Eigen::Index>(g + 1) * width <= x.cols(), "ungroup: group index");
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), static_cast<Eigen::Index>(owner.size()) * width);
  for (std::size_t j = 0; j < owner.size(); ++j)
    out.middleCols(static_cast<Eigen::Index>(j) * width, width) =
        xv.middleCols(static_cast<Eigen::Index>(owner[j]) * width, width);
  return x.tape->record(std::move(out), {x}, [x, owner, width](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t j = 0; j < owner.size(); ++j)
      dx.middleCols(static_cast<Eigen::Index>(owner[j]) * width, width) +=
          g.middleCols(static_cast<Eigen::Index>(j) * width, width);
    t.accumulate(x, dx);
  });
}

Var batch_norm(Var x, Var gamma, Var beta, Parameter& running_mean, Parameter& running_var,
               bool training, double momentum, double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index c = x.cols();
  require(gamma.cols() == c && beta.cols() == c, "batch_norm: affine width");
  const Matrix& xv = x.value();

  RowVector mean, var;
  if (training) {
    require(n > 1, "batch_norm: training needs more than one row");
    mean = xv.colwise().mean();
    var = (xv.rowwise() - mean).array().square().colwise().mean().matrix();
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    running_mean.value = (1.0 - momentum) * running_mean.value + momentum * mean;
    running_var.value = (1.0 - momentum) * running_var.value + momentum * unbias * var;
  } else {
    mean = running_mean.value.row(0);
    var = running_var.value.row(0);
  }
  const RowVector inv_std = (var.array() + eps).rsqrt().matrix();
  auto xhat = std::make_shared<Matrix>((xv.rowwise() - mean).array().rowwise() * inv_std.array());
  Matrix out = (xhat->array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);

  return x.tape->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, training, n](Tape& t, const Matrix& g) {
        if (t.needs_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(*xhat).colwise().sum());
        if (t.needs_grad(beta)) t.accumulate(beta, g.colwise().sum());
        if (!t.needs_grad(x)) return;
        const Matrix dxhat = (g.array().rowwise() * gamma.value().row(0).array()).matrix();
        if (!training) {
          t.accumulate(x, (dxhat.array().rowwise() * inv_std.array()).matrix());
          return;
        }
        const RowVector sum_d = dxhat.colwise().sum();
        const RowVector sum_dx = dxhat.cwiseProduct(*xhat).colwise().sum();
        const double inv_n = 1.0 / static_cast<double>(n);
        Matrix dx = dxhat * static_cast<double>(n);
        dx.rowwise() -= sum_d;
        dx -= (xhat->array().rowwise() * sum_dx.array()).matrix();
        dx = (dx.array().rowwise() * (inv_std * inv_n).array()).matrix();
        t.accumulate(x, dx);
      });
}

Var dropout(Var x, double p, bool training, std::mt19937_64& rng) {
  if (!training || p <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask->size(); ++i) (*mask)(i) = keep(rng) ? s : 0.0;
  return x.tape->record(x.value().cwiseProduct(*mask), {x}, [x, mask](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct(*mask));
  });
}

Var time_major_to_flat(Var x, Eigen::Index steps, Eigen::Index batch) {
  require(x.rows() == steps * batch, "time_major_to_flat: row count");
  const Eigen::Index c = x.cols();
  const Matrix& xv = x.value();
  Matrix out(batch, steps * c);
  for (Eigen::Index t = 0; t < steps; ++t) out.middleCols(t * c, c) = xv.middleRows(t * batch, batch);
  return x.tape->record(std::move(out), {x}, [x, steps, batch, c](Tape& t, const Matrix& g) {
    Matrix dx(steps * batch, c);
    for (Eigen::Index s = 0; s < steps; ++s) dx.middleRows(s * batch, batch) = g.middleCols(s * c, c);
    t.accumulate(x, dx);
  });
}

// ---- recurrent ---------------------------------------------------------------

namespace {

struct GruCache {
  Matrix r, z, n, hn;  // (steps*batch) x H each
  Matrix h_prev;       // (steps*batch) x H, hidden state entering each step
};

}  // namespace

Var gru_sequence(Var x, Var h0, Var wx, Var wh, Var bx, Var bh, Eigen::Index steps,
                 Eigen::Index batch) {
  const Eigen::Index hidden = wh.rows();
  require(wh.cols() == 3 * hidden && wx.cols() == 3 * hidden, "gru: weight widths");
  require(x.cols() == wx.rows(), "gru: input width");
  require(x.rows() == steps * batch, "gru: input rows");
  require(h0.rows() == batch && h0.cols() == hidden, "gru: initial state shape");
  require(bx.cols() == 3 * hidden && bh.cols() == 3 * hidden, "gru: bias widths");

  Matrix gx = x.value() * wx.value();
  gx.rowwise() += bx.value().row(0);

  auto cache = std::make_shared<GruCache>();
  cache->r.resize(steps * batch, hidden);
  cache->z.resize(steps * batch, hidden);
  cache->n.resize(steps * batch, hidden);
  cache->hn.resize(steps * batch, hidden);
  cache->h_prev.resize(steps * batch, hidden);

  Matrix out(steps * batch, hidden);
  Matrix h = h0.value();
  Matrix gh(batch, 3 * hidden);
  const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index row = s * batch;
    gh.noalias() = h * wh.value();
    gh.rowwise() += bh.value().row(0);
    cache->h_prev.middleRows(row, batch) = h;
    auto r = cache->r.middleRows(row, batch);
    auto z = cache->z.middleRows(row, batch);
    auto n = cache->n.middleRows(row, batch);
    auto hn = cache->hn.middleRows(row, batch);
    r = (gx.block(row, 0, batch, hidden) + gh.leftCols(hidden)).unaryExpr(sig);
    z = (gx.block(row, hidden, batch, hidden) + gh.middleCols(hidden, hidden)).unaryExpr(sig);
    hn = gh.rightCols(hidden);
    n = (gx.block(row, 2 * hidden, batch, hidden).array() + r.array() * hn.array()).tanh().matrix();
    h = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
    out.middleRows(row, batch) = h;
  }

  return x.tape->record(
      std::move(out), {x, h0, wx, wh, bx, bh},
      [x, h0, wx, wh, bx, bh, steps, batch, hidden, cache](Tape& t, const Matrix& g) {
        Matrix dgx(steps * batch, 3 * hidden);
        Matrix dgh(steps * batch, 3 * hidden);
        Matrix dh_next = Matrix::Zero(batch, hidden);
        const Matrix wh_t = wh.value().transpose();
        for (Eigen::Index s = steps; s-- > 0;) {
          const Eigen::Index row = s * batch;
          const auto r = cache->r.middleRows(row, batch).array();
          const auto z = cache->z.middleRows(row, batch).array();
          const auto n = cache->n.middleRows(row, batch).array();
          const auto hn = cache->hn.middleRows(row, batch).array();
          const auto hp = cache->h_prev.middleRows(row, batch).array();
          const Matrix dh = g.middleRows(row, batch) + dh_next;
          const auto dha = dh.array();
          const Eigen::ArrayXXd dn_pre = dha * (1.0 - z) * (1.0 - n.square());
          const Eigen::ArrayXXd dz_pre = dha * (hp - n) * z * (1.0 - z);
          const Eigen::ArrayXXd dr_pre = dn_pre * hn * r * (1.0 - r);
          dgx.block(row, 0, batch, hidden) = dr_pre.matrix();
          dgx.block(row, hidden, batch, hidden) = dz_pre.matrix();
          dgx.block(row, 2 * hidden, batch, hidden) = dn_pre.matrix();
          dgh.block(row, 0, batch, hidden) = dr_pre.matrix();
          dgh.block(row, hidden, batch, hidden) = dz_pre.matrix();
          dgh.block(row, 2 * hidden, batch, hidden) = (dn_pre * r).matrix();
          dh_next = (dha * z).matrix();
          dh_next.noalias() += dgh.middleRows(row, batch) * wh_t;
        }
        if (t.needs_grad(wh)) t.accumulate(wh, cache->h_prev.transpose() * dgh);
        if (t.needs_grad(bh)) t.accumulate(bh, dgh.colwise().sum());
        if (t.needs_grad(wx)) t.accumulate(wx, x.value().transpose() * dgx);
        if (t.needs_grad(bx)) t.accumulate(bx, dgx.colwise().sum());
        if (t.needs_grad(x)) t.accumulate(x, dgx * wx.value().transpose());
        if (t.needs_grad(h0)) t.accumulate(h0, dh_next);
      });
}

}  // namespace gaitemo::ad
