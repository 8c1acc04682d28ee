#include "gaitemo/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gaitemo/errors.hpp"

namespace gaitemo {

using ad::Matrix;
using ad::Tape;
using ad::Var;

ModelConfig ModelConfig::standard() {
  ModelConfig c;
  const auto& skel = canonical_skeleton();
  c.part_groups.assign(skel.part_groups.begin(), skel.part_groups.end());
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (joints == 0 || frames == 0 || classes < 2) fail("joints, frames and classes must be positive");
  if (embedding == 0 || joint_features == 0 || classifier_hidden1 == 0 || classifier_hidden2 == 0)
    fail("all widths must be positive");
  if (encoder_gru_layers == 0) fail("encoder needs at least one recurrent layer");
  if (embedding < affective_dims) fail("embedding width must be at least the affective width");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (part_groups.empty()) fail("need at least one part group");
  std::vector<int> hits(joints, 0);
  for (const auto& g : part_groups)
    for (std::size_t j : g) {
      if (j >= joints) fail("part group joint index out of range");
      ++hits[j];
    }
  for (int h : hits)
    if (h != 1) fail("part groups must partition the joints");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"joints", c.joints},
       {"frames", c.frames},
       {"classes", c.classes},
       {"embedding", c.embedding},
       {"affective_dims", c.affective_dims},
       {"joint_features", c.joint_features},
       {"encoder_gru_layers", c.encoder_gru_layers},
       {"classifier_hidden1", c.classifier_hidden1},
       {"classifier_hidden2", c.classifier_hidden2},
       {"dropout", c.dropout},
       {"use_hierarchical_pooling", c.use_hierarchical_pooling},
       {"use_affective_loss", c.use_affective_loss},
       {"use_decoder", c.use_decoder},
       {"part_groups", c.part_groups}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d = ModelConfig::standard();
  d.joints = j.value("joints", d.joints);
  d.frames = j.value("frames", d.frames);
  d.classes = j.value("classes", d.classes);
  d.embedding = j.value("embedding", d.embedding);
  d.affective_dims = j.value("affective_dims", d.affective_dims);
  d.joint_features = j.value("joint_features", d.joint_features);
  d.encoder_gru_layers = j.value("encoder_gru_layers", d.encoder_gru_layers);
  d.classifier_hidden1 = j.value("classifier_hidden1", d.classifier_hidden1);
  d.classifier_hidden2 = j.value("classifier_hidden2", d.classifier_hidden2);
  d.dropout = j.value("dropout", d.dropout);
  d.use_hierarchical_pooling = j.value("use_hierarchical_pooling", d.use_hierarchical_pooling);
  d.use_affective_loss = j.value("use_affective_loss", d.use_affective_loss);
  d.use_decoder = j.value("use_decoder", d.use_decoder);
  if (j.contains("part_groups"))
    d.part_groups = j.at("part_groups").get<std::vector<std::vector<std::size_t>>>();
  c = std::move(d);
}

// ---- construction ------------------------------------------------------------

GaitModel::GaitModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), init_rng_(seed) {
  config_.validate();
  const std::size_t J = config_.joints;
  const std::size_t h = config_.joint_features;
  const std::size_t G = config_.part_groups.size();
  const std::size_t E = config_.embedding;
  const std::size_t R = config_.rotation_width();

  joint_owner_.assign(J, 0);
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t j : config_.part_groups[g]) joint_owner_[j] = g;

  for (std::size_t l = 0; l < config_.encoder_gru_layers; ++l)
    enc_gru_.push_back(add_gru("encoder.gru" + std::to_string(l), l == 0 ? R : J * h, J * h));
  if (config_.use_hierarchical_pooling) {
    joint_units_ = add_dense("encoder.joints", h, h, J);
    joint_norm_ = add_norm("encoder.joints.norm", J * h);
    part_layers_ = add_dense("encoder.parts", h, h, G);
    part_norm_ = add_norm("encoder.parts.norm", G * h);
    body_layer_ = add_dense("encoder.body", h, h);
    body_norm_ = add_norm("encoder.body.norm", h);
  } else {
    flat_layer_ = add_dense("encoder.flat", J * h, h);
    flat_norm_ = add_norm("encoder.flat.norm", h);
  }
  embed_layer_ = add_dense("encoder.embed", h, E);
  embed_norm_ = add_norm("encoder.embed.norm", E);

  if (config_.use_decoder) {
    // One E -> 4 layer per part, stored side by side.
    dec_parts_ = add_dense("decoder.parts", E, 4 * G);
    dec_parts_norm_ = add_norm("decoder.parts.norm", 4 * G);
    dec_first_ = add_gru("decoder.first", R, R);
    dec_next_ = add_gru("decoder.next", R, R);
    readout_ = add_dense("decoder.readout", R, R);
  }

  cls1_ = add_dense("classifier.fc1", E, config_.classifier_hidden1);
  cls1_norm_ = add_norm("classifier.fc1.norm", config_.classifier_hidden1);
  cls2_ = add_dense("classifier.fc2", config_.classifier_hidden1, config_.classifier_hidden2);
  cls2_norm_ = add_norm("classifier.fc2.norm", config_.classifier_hidden2);
  cls_out_ = add_dense("classifier.out", config_.frames * config_.classifier_hidden2,
                       config_.classes);
}

GaitModel::Dense GaitModel::add_dense(const std::string& name, std::size_t in, std::size_t out,
                                      std::size_t blocks) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  const auto cols = static_cast<Eigen::Index>(out * blocks);
  Matrix w = Matrix::NullaryExpr(static_cast<Eigen::Index>(in), cols, [&] { return u(init_rng_); });
  Matrix b = Matrix::NullaryExpr(1, cols, [&] { return u(init_rng_); });
  return {&params_.add(name + ".weight", std::move(w)), &params_.add(name + ".bias", std::move(b))};
}

GaitModel::Norm GaitModel::add_norm(const std::string& name, std::size_t width) {
  const auto w = static_cast<Eigen::Index>(width);
  return {&params_.add(name + ".gamma", Matrix::Ones(1, w)),
          &params_.add(name + ".beta", Matrix::Zero(1, w)),
          &params_.add(name + ".running_mean", Matrix::Zero(1, w), false),
          &params_.add(name + ".running_var", Matrix::Ones(1, w), false)};
}

GaitModel::Gru GaitModel::add_gru(const std::string& name, std::size_t in, std::size_t hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  auto mk = [&](std::size_t r, std::size_t c) {
    return Matrix::NullaryExpr(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c),
                               [&] { return u(init_rng_); });
  };
  Gru g;
  g.wx = &params_.add(name + ".wx", mk(in, 3 * hidden));
  g.wh = &params_.add(name + ".wh", mk(hidden, 3 * hidden));
  g.bx = &params_.add(name + ".bx", mk(1, 3 * hidden));
  g.bh = &params_.add(name + ".bh", mk(1, 3 * hidden));
  return g;
}

// ---- building blocks -----------------------------------------------------------

Var GaitModel::dense(Tape& t, const Dense& d, Var x, std::size_t blocks) {
  if (blocks == 1) return ad::linear(x, t.param(*d.weight), t.param(*d.bias));
  return ad::block_linear(x, t.param(*d.weight), t.param(*d.bias),
                          static_cast<Eigen::Index>(blocks));
}

Var GaitModel::layer(Tape& t, const Dense& d, const Norm& n, Var x, const ForwardOptions& opt,
                     bool drop, std::size_t blocks) {
  Var y = dense(t, d, x, blocks);
  y = ad::batch_norm(y, t.param(*n.gamma), t.param(*n.beta), *n.mean, *n.var, opt.training);
  y = ad::elu(y);
  if (drop && opt.training && config_.dropout > 0.0) y = ad::dropout(y, config_.dropout, true, *opt.rng);
  return y;
}

Var GaitModel::run_gru(Tape& t, const Gru& g, Var x, Var h0, std::size_t steps,
                       std::size_t batch) {
  return ad::gru_sequence(x, h0, t.param(*g.wx), t.param(*g.wh), t.param(*g.bx), t.param(*g.bh),
                          static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(batch));
}

// ---- forward passes ------------------------------------------------------------

Var GaitModel::encode(Tape& t, const Matrix& rotations, std::size_t batch,
                      const ForwardOptions& opt) {
  const std::size_t T = config_.frames;
  const std::size_t J = config_.joints;
  const std::size_t h = config_.joint_features;
  if (rotations.rows() != static_cast<Eigen::Index>(T * batch) ||
      rotations.cols() != static_cast<Eigen::Index>(config_.rotation_width()))
    throw ShapeError("encode: expected " + std::to_string(T * batch) + " x " +
                     std::to_string(config_.rotation_width()) + " rotations");
  if (opt.training && opt.rng == nullptr) throw ConfigError("training forward needs an rng");

  Var x = t.constant(rotations);
  const Var h0 = t.constant(Matrix::Zero(static_cast<Eigen::Index>(batch),
                                         static_cast<Eigen::Index>(J * h)));
  for (const auto& g : enc_gru_) x = run_gru(t, g, x, h0, T, batch);

  Var body;
  if (config_.use_hierarchical_pooling) {
    Var joints = layer(t, joint_units_, joint_norm_, x, opt, true, J);
    Var parts = ad::group_sum(joints, config_.part_groups, static_cast<Eigen::Index>(h));
    parts = layer(t, part_layers_, part_norm_, parts, opt, true, config_.part_groups.size());
    std::vector<std::size_t> all(config_.part_groups.size());
    for (std::size_t g = 0; g < all.size(); ++g) all[g] = g;
    body = ad::group_sum(parts, {all}, static_cast<Eigen::Index>(h));
    body = layer(t, body_layer_, body_norm_, body, opt, true);
  } else {
    body = layer(t, flat_layer_, flat_norm_, x, opt, true);
  }
  return layer(t, embed_layer_, embed_norm_, body, opt, false);
}

Var GaitModel::decode(Tape& t, Var embedding, const Matrix& teacher, std::size_t batch,
                      const ForwardOptions& opt) {
  if (!config_.use_decoder) throw ConfigError("model was built without a decoder");
  const std::size_t T = config_.frames;
  const auto B = static_cast<Eigen::Index>(batch);
  const auto R = static_cast<Eigen::Index>(config_.rotation_width());
  if (embedding.rows() != static_cast<Eigen::Index>(T) * B ||
      embedding.cols() != static_cast<Eigen::Index>(config_.embedding))
    throw ShapeError("decode: embedding shape");

  // Teacher-forcing draw for every step after the first.
  std::vector<bool> forced(T, false);
  for (std::size_t s = 1; s < T; ++s) {
    if (opt.teacher_forcing >= 1.0) {
      forced[s] = true;
    } else if (opt.teacher_forcing > 0.0) {
      if (opt.rng == nullptr) throw ConfigError("stochastic teacher forcing needs an rng");
      forced[s] = std::bernoulli_distribution(opt.teacher_forcing)(*opt.rng);
    }
  }
  const bool any_forced = std::any_of(forced.begin(), forced.end(), [](bool f) { return f; });
  if (any_forced && (teacher.rows() != static_cast<Eigen::Index>(T) * B || teacher.cols() != R))
    throw ShapeError("decode: teacher rotations shape");

  Var parts = layer(t, dec_parts_, dec_parts_norm_, embedding, opt, false);
  Var joints = ad::ungroup(parts, joint_owner_, 4);
  const Var zero = t.constant(Matrix::Zero(B, R));
  Var states = run_gru(t, dec_first_, joints, zero, T, batch);
  Var h = ad::slice_rows(states, static_cast<Eigen::Index>(T - 1) * B, B);
  Var prev = dense(t, readout_, h);
  std::vector<Var> frames{prev};

  for (std::size_t s = 1; s < T;) {
    if (forced[s]) {
      std::size_t end = s;
      while (end < T && forced[end]) ++end;
      const auto steps = static_cast<Eigen::Index>(end - s);
      Var inputs = t.constant(teacher.middleRows(static_cast<Eigen::Index>(s - 1) * B, steps * B));
      Var hs = run_gru(t, dec_next_, inputs, h, end - s, batch);
      Var out = dense(t, readout_, hs);
      frames.push_back(out);
      h = ad::slice_rows(hs, (steps - 1) * B, B);
      prev = ad::slice_rows(out, (steps - 1) * B, B);
      s = end;
    } else {
      h = run_gru(t, dec_next_, prev, h, 1, batch);
      prev = dense(t, readout_, h);
      frames.push_back(prev);
      ++s;
    }
  }
  return ad::concat_rows(frames);
}

Var GaitModel::classify(Tape& t, Var embedding, std::size_t batch, const ForwardOptions& opt) {
  const std::size_t T = config_.frames;
  if (embedding.rows() != static_cast<Eigen::Index>(T * batch) ||
      embedding.cols() != static_cast<Eigen::Index>(config_.embedding))
    throw ShapeError("classify: embedding shape");
  Var c = layer(t, cls1_, cls1_norm_, embedding, opt, true);
  c = layer(t, cls2_, cls2_norm_, c, opt, true);
  Var flat = ad::time_major_to_flat(c, static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(batch));
  return ad::softmax_rows(dense(t, cls_out_, flat));
}

// ---- single-sample conveniences ------------------------------------------------

namespace {

// (T x C) per-time-step rows <-> C x T.
Eigen::MatrixXd transpose_copy(const Matrix& m) { return m.transpose(); }

}  // namespace

Eigen::MatrixXd GaitModel::encode(const RotationTensor& rotations) {
  Tape t;
  return transpose_copy(encode(t, pack_rotations({&rotations}), 1, ForwardOptions{}).value());
}

Eigen::MatrixXd GaitModel::decode(const Eigen::MatrixXd& embedding, const RotationTensor* teacher,
                                  double teacher_forcing) {
  Tape t;
  Var e = t.constant(embedding.transpose());
  std::mt19937_64 rng(0);
  ForwardOptions opt;
  opt.teacher_forcing = teacher_forcing;
  opt.rng = &rng;
  const Matrix teach = teacher ? pack_rotations({teacher}) : Matrix();
  return decode(t, e, teach, 1, opt).value();
}

Eigen::VectorXd GaitModel::classify(const Eigen::MatrixXd& embedding) {
  Tape t;
  Var e = t.constant(embedding.transpose());
  return classify(t, e, 1, ForwardOptions{}).value().row(0).transpose();
}

Eigen::MatrixXd GaitModel::predict(const std::vector<const RotationTensor*>& samples) {
  constexpr std::size_t kChunk = 64;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()),
                      static_cast<Eigen::Index>(config_.classes));
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - start);
    std::vector<const RotationTensor*> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                             samples.begin() + static_cast<std::ptrdiff_t>(start + n));
    Tape t;
    const ForwardOptions opt;
    Var e = encode(t, pack_rotations(chunk), n, opt);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) =
        classify(t, e, n, opt).value();
  }
  return out;
}

Eigen::MatrixXd affective_slice(const Eigen::MatrixXd& embedding, std::size_t affective_dims) {
  if (static_cast<std::size_t>(embedding.rows()) < affective_dims)
    throw ShapeError("embedding has fewer rows than the affective width");
  return embedding.topRows(static_cast<Eigen::Index>(affective_dims));
}

ad::Matrix pack_rotations(const std::vector<const RotationTensor*>& samples) {
  if (samples.empty()) throw ShapeError("no samples to pack");
  const std::size_t T = samples.front()->frames();
  const std::size_t J = samples.front()->joints();
  const auto B = static_cast<Eigen::Index>(samples.size());
  Matrix out(static_cast<Eigen::Index>(T) * B, static_cast<Eigen::Index>(4 * J));
  for (Eigen::Index b = 0; b < B; ++b) {
    const RotationTensor& r = *samples[static_cast<std::size_t>(b)];
    if (r.frames() != T || r.joints() != J) throw ShapeError("rotation tensors differ in shape");
    const auto vals = r.values();
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < 4 * J; ++k)
        out(static_cast<Eigen::Index>(t) * B + b, static_cast<Eigen::Index>(k)) = vals[t * 4 * J + k];
  }
  return out;
}

}  // namespace gaitemo
