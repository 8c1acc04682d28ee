#include "gaitemo/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gaitemo/errors.hpp"

namespace gaitemo {

double learning_rate_at(std::size_t epoch, const Schedule& s) {
  return s.learning_rate * std::pow(s.lr_decay, static_cast<double>(epoch));
}

double teacher_forcing_at(std::size_t epoch, const Schedule& s) {
  return std::pow(s.teacher_decay, static_cast<double>(epoch));
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"model", c.model},
       {"lambda_quat", c.weights.lambda_quat},
       {"lambda_aff", c.weights.lambda_aff},
       {"learning_rate", c.schedule.learning_rate},
       {"lr_decay", c.schedule.lr_decay},
       {"teacher_decay", c.schedule.teacher_decay},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"use_unlabeled", c.use_unlabeled},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  if (j.contains("model")) d.model = j.at("model").get<ModelConfig>();
  d.weights.lambda_quat = j.value("lambda_quat", d.weights.lambda_quat);
  d.weights.lambda_aff = j.value("lambda_aff", d.weights.lambda_aff);
  d.schedule.learning_rate = j.value("learning_rate", d.schedule.learning_rate);
  d.schedule.lr_decay = j.value("lr_decay", d.schedule.lr_decay);
  d.schedule.teacher_decay = j.value("teacher_decay", d.schedule.teacher_decay);
  d.epochs = j.value("epochs", d.epochs);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.seed = j.value("seed", d.seed);
  d.use_unlabeled = j.value("use_unlabeled", d.use_unlabeled);
  d.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  d.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  d.adam_eps = j.value("adam_eps", d.adam_eps);
  c = std::move(d);
}

// ---- optimizer -----------------------------------------------------------------

void Adam::step(ad::ParameterStore& params, double lr) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t i = 0;
  for (auto& p : params) {
    auto& m = m_[i];
    auto& v = v_[i];
    ++i;
    if (!p->trainable || p->grad.size() == 0) continue;
    m = beta1_ * m + (1.0 - beta1_) * p->grad;
    v = beta2_ * v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

// ---- batches and losses ----------------------------------------------------------

bool BatchTargets::any_labeled() const {
  return std::any_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
}

namespace {

ad::Matrix interleave(std::span<const PreparedSample> samples, std::span<const std::size_t> order,
                      ad::Matrix PreparedSample::*field) {
  const auto B = static_cast<Eigen::Index>(order.size());
  const ad::Matrix& first = samples[order.front()].*field;
  const Eigen::Index T = first.rows();
  ad::Matrix out(T * B, first.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    const ad::Matrix& m = samples[order[static_cast<std::size_t>(b)]].*field;
    if (m.rows() != T || m.cols() != first.cols()) throw ShapeError("batch samples differ in shape");
    for (Eigen::Index t = 0; t < T; ++t) out.row(t * B + b) = m.row(t);
  }
  return out;
}

}  // namespace

BatchTargets make_batch(std::span<const PreparedSample> samples, std::span<const std::size_t> order) {
  if (order.empty()) throw EmptyError("empty batch");
  BatchTargets b;
  b.batch = order.size();
  b.rotations = interleave(samples, order, &PreparedSample::rotations);
  b.euler = interleave(samples, order, &PreparedSample::euler);
  b.affective = interleave(samples, order, &PreparedSample::affective);
  for (std::size_t i : order) b.labels.push_back(samples[i].label);
  return b;
}

BatchLoss batch_loss(ad::Tape& tape, GaitModel& model, const BatchTargets& batch,
                     const ClassWeights& w, const LossWeights& lw, const ForwardOptions& opt) {
  const ModelConfig& cfg = model.config();
  BatchLoss out;
  std::vector<ad::Var> terms;
  ad::Var e = model.encode(tape, batch.rotations, batch.batch, opt);

  if (batch.any_labeled()) {
    ad::Var probs = model.classify(tape, e, batch.batch, opt);
    ad::Var cl = ad::classifier_loss(probs, batch.labels, w);
    out.values.cl = cl.value()(0, 0);
    terms.push_back(cl);
  }
  if (cfg.use_decoder) {
    ad::Var recon = model.decode(tape, e, batch.rotations, batch.batch, opt);
    ad::Var ang = ad::angle_loss(recon, batch.euler);
    ad::Var quat = ad::quat_loss(recon);
    out.values.ang = ang.value()(0, 0);
    out.values.quat = quat.value()(0, 0);
    terms.push_back(ang);
    terms.push_back(ad::scale(quat, lw.lambda_quat));
  }
  if (cfg.use_affective_loss) {
    ad::Var a_hat = ad::slice_cols(e, 0, static_cast<Eigen::Index>(cfg.affective_dims));
    ad::Var aff = ad::affective_loss(a_hat, batch.affective);
    out.values.aff = aff.value()(0, 0);
    terms.push_back(ad::scale(aff, lw.lambda_aff));
  }
  if (terms.empty()) {
    out.total = tape.constant(ad::Matrix::Zero(1, 1));
  } else {
    out.total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) out.total = ad::add(out.total, terms[i]);
  }
  out.values.total = out.total.value()(0, 0);
  return out;
}

Eigen::MatrixXd predict_probs(GaitModel& model, std::span<const PreparedSample> samples) {
  constexpr std::size_t kChunk = 64;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()),
                      static_cast<Eigen::Index>(model.config().classes));
  std::vector<std::size_t> order;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - start);
    order.resize(n);
    std::iota(order.begin(), order.end(), start);
    const ad::Matrix rot = interleave(samples, order, &PreparedSample::rotations);
    ad::Tape tape;
    const ForwardOptions opt;
    ad::Var e = model.encode(tape, rot, n, opt);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) =
        model.classify(tape, e, n, opt).value();
  }
  return out;
}

EvalReport evaluate_samples(GaitModel& model, std::span<const PreparedSample> samples) {
  std::vector<PreparedSample> labeled;
  std::vector<MultiHotLabel> truths;
  for (const auto& s : samples)
    if (s.label) {
      labeled.push_back(s);
      truths.push_back(*s.label);
    }
  if (labeled.empty()) throw EmptyError("no labeled samples to evaluate");
  return evaluate(predict_probs(model, labeled), truths);
}

double labeled_map(GaitModel& model, std::span<const PreparedSample> samples) {
  try {
    return evaluate_samples(model, samples).map;
  } catch (const EmptyError&) {
  } catch (const UndefinedAPError&) {
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// ---- loop ------------------------------------------------------------------------

TrainResult train(GaitModel& model, std::span<const PreparedSample> train_set,
                  std::span<const PreparedSample> val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> pool;
  std::vector<MultiHotLabel> train_labels;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].label) {
      train_labels.push_back(*train_set[i].label);
      pool.push_back(i);
    } else if (cfg.use_unlabeled) {
      pool.push_back(i);
    }
  }
  if (train_labels.empty()) throw EmptyError("training needs labeled samples");

  TrainResult result;
  result.weights = class_weights(train_labels);
  std::mt19937_64 rng(cfg.seed);
  Adam adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  auto& params = model.parameters();
  std::vector<ad::Matrix> best;
  result.best_val_map = -std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.lr = learning_rate_at(epoch, cfg.schedule);
    log.tf_prob = teacher_forcing_at(epoch, cfg.schedule);
    std::shuffle(pool.begin(), pool.end(), rng);

    ForwardOptions opt;
    opt.training = true;
    opt.teacher_forcing = log.tf_prob;
    opt.rng = &rng;
    std::size_t step = 0;
    for (std::size_t start = 0; start < pool.size(); start += cfg.batch_size, ++step) {
      const std::size_t n = std::min(cfg.batch_size, pool.size() - start);
      const BatchTargets batch =
          make_batch(train_set, std::span<const std::size_t>(pool.data() + start, n));
      ad::Tape tape;
      params.zero_grad();
      const BatchLoss loss = batch_loss(tape, model, batch, result.weights, cfg.weights, opt);
      if (!std::isfinite(loss.values.total)) throw DivergenceError(epoch, step);
      tape.backward(loss.total);
      adam.step(params, log.lr);

      const double k = static_cast<double>(n) / static_cast<double>(pool.size());
      log.loss.total += k * loss.values.total;
      log.loss.cl += k * loss.values.cl;
      log.loss.ang += k * loss.values.ang;
      log.loss.quat += k * loss.values.quat;
      log.loss.aff += k * loss.values.aff;
    }

    log.val_map = labeled_map(model, val_set);
    if (log.val_map > result.best_val_map) {
      result.best_val_map = log.val_map;
      result.best_epoch = epoch;
      best = params.snapshot();
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (!best.empty()) {
    params.restore(best);
  } else {
    result.best_epoch = cfg.epochs == 0 ? 0 : cfg.epochs - 1;
    result.best_val_map = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

std::string epoch_csv_header() {
  return "epoch,total_loss,cl_loss,ang_loss,quat_loss,aff_loss,lr,tf_prob,val_map";
}

std::string epoch_csv_row(const EpochLog& e) {
  std::ostringstream os;
  os.precision(17);
  os << e.epoch << ',' << e.loss.total << ',' << e.loss.cl << ',' << e.loss.ang << ','
     << e.loss.quat << ',' << e.loss.aff << ',' << e.lr << ',' << e.tf_prob << ',' << e.val_map;
  return os.str();
}

// ---- checkpoints -------------------------------------------------------------------

void save_checkpoint(const GaitModel& model, const TrainConfig& cfg, std::size_t epoch,
                     const std::filesystem::path& path) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
    params.push_back({{"name", p->name},
                      {"rows", p->value.rows()},
                      {"cols", p->value.cols()},
                      {"trainable", p->trainable},
                      {"data", std::move(data)}});
  }
  nlohmann::json doc = {{"format", "gaitemo-checkpoint"},
                        {"version", 1},
                        {"config", cfg},
                        {"epoch", epoch},
                        {"parameters", std::move(params)}};
  doc["config"]["model"] = model.config();
  std::ofstream os(path);
  if (!os) throw IOError("cannot write checkpoint " + path.string());
  os << doc.dump() << '\n';
  if (!os) throw IOError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IOError("unreadable checkpoint " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "gaitemo-checkpoint")
    throw ConfigError("not a checkpoint: " + path.string());

  Checkpoint ck;
  try {
    ck.config = doc.at("config").get<TrainConfig>();
    ck.epoch = doc.at("epoch").get<std::size_t>();
    ck.model = std::make_unique<GaitModel>(ck.config.model, 0);
    auto& store = ck.model->parameters();
    std::size_t seen = 0;
    for (const auto& p : doc.at("parameters")) {
      const auto name = p.at("name").get<std::string>();
      if (!store.contains(name)) throw ConfigError("checkpoint parameter not in model: " + name);
      auto& dst = store.get(name);
      const auto rows = p.at("rows").get<Eigen::Index>();
      const auto cols = p.at("cols").get<Eigen::Index>();
      const auto data = p.at("data").get<std::vector<double>>();
      if (rows != dst.value.rows() || cols != dst.value.cols() ||
          data.size() != static_cast<std::size_t>(rows * cols))
        throw ConfigError("checkpoint shape mismatch for " + name);
      dst.value = Eigen::Map<const ad::Matrix>(data.data(), rows, cols);
      ++seen;
    }
    if (seen != store.size()) throw ConfigError("checkpoint is missing parameters");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace gaitemo
