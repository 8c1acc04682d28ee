// Low-level bindings. Structured results cross the boundary as JSON text;
// the Python package turns them into dicts.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gaitemo/affective.hpp"
#include "gaitemo/commands.hpp"
#include "gaitemo/errors.hpp"
#include "gaitemo/labels.hpp"
#include "gaitemo/metrics.hpp"
#include "gaitemo/rotation.hpp"
#include "gaitemo/training.hpp"

namespace py = pybind11;
using namespace gaitemo;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

PoseSequence to_pose(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3)
    throw ShapeError("positions must have shape (frames, joints, 3)");
  PoseSequence p(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), p.data().begin());
  return p;
}

Array from_matrix(const Eigen::MatrixXd& m) {
  Array out({m.rows(), m.cols()});
  auto v = out.mutable_unchecked<2>();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v(r, c) = m(r, c);
  return out;
}

std::string summary_json(const TrainSummary& s) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : s.result.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"total_loss", e.loss.total}, {"cl_loss", e.loss.cl},
                      {"ang_loss", e.loss.ang}, {"quat_loss", e.loss.quat}, {"aff_loss", e.loss.aff},
                      {"lr", e.lr}, {"tf_prob", e.tf_prob}, {"val_map", e.val_map}});
  return nlohmann::json{{"best_epoch", s.result.best_epoch},
                        {"best_val_map", s.result.best_val_map},
                        {"test", s.test},
                        {"checkpoint", s.checkpoint.string()},
                        {"epochs", epochs}}
      .dump();
}

RunConfig run_config(const std::string& text) { return nlohmann::json::parse(text).get<RunConfig>(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = kToolVersion;
  m.attr("class_names") = std::vector<std::string>(kClassNames.begin(), kClassNames.end());

  py::register_exception<Error>(m, "GaitEmoError", PyExc_RuntimeError);

  m.def("quat_to_euler", [](double w, double x, double y, double z) {
    const auto e = quat_to_euler(Quat{w, x, y, z});
    return py::make_tuple(e[0], e[1], e[2]);
  });
  m.def("shortest_arc", [](std::array<double, 3> u, std::array<double, 3> v) {
    const Quat q = shortest_arc(Vec3(u[0], u[1], u[2]), Vec3(v[0], v[1], v[2]));
    return py::make_tuple(q.w, q.x, q.y, q.z);
  });
  m.def("extract_rotations", [](const Array& positions) {
    const RotationTensor r = extract_rotations(to_pose(positions));
    Array out({r.frames(), r.joints(), std::size_t{4}});
    std::copy(r.values().begin(), r.values().end(), out.mutable_data());
    return out;
  });
  m.def("extract_affective", [](const Array& positions) {
    return from_matrix(extract_affective(to_pose(positions)));
  });
  m.def("to_multihot", [](std::vector<double> probs) {
    const MultiHotLabel b = to_multihot(probs);
    std::vector<bool> out;
    for (std::size_t c = 0; c < kNumClasses; ++c) out.push_back(b[c]);
    return out;
  });
  m.def("average_precision", [](const std::vector<double>& scores, const std::vector<bool>& relevant) {
    if (scores.size() != relevant.size()) throw ShapeError("scores and relevant differ in length");
    std::vector<ScoredItem> items;
    for (std::size_t i = 0; i < scores.size(); ++i) items.push_back({scores[i], relevant[i]});
    return average_precision(items);
  });
  m.def("evaluate", [](const Array& probs, const std::vector<std::vector<bool>>& truths) {
    if (probs.ndim() != 2) throw ShapeError("probs must be 2-D");
    Eigen::MatrixXd p(probs.shape(0), probs.shape(1));
    auto v = probs.unchecked<2>();
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = v(r, c);
    std::vector<MultiHotLabel> labels;
    for (const auto& t : truths) {
      MultiHotLabel b;
      for (std::size_t c = 0; c < kNumClasses && c < t.size(); ++c) b.bits[c] = t[c];
      labels.push_back(b);
    }
    return nlohmann::json(evaluate(p, labels)).dump();
  });
  m.def("learning_rate_at", [](std::size_t epoch) { return learning_rate_at(epoch); });
  m.def("teacher_forcing_at", [](std::size_t epoch) { return teacher_forcing_at(epoch); });

  m.def("resolve_config", [](std::optional<std::filesystem::path> file, const std::string& overrides) {
    return nlohmann::json(resolve_run_config(file, nlohmann::json::parse(overrides))).dump();
  });
  m.def("synth", [](std::size_t labeled, std::size_t unlabeled, std::uint64_t seed,
                    std::filesystem::path out) { cmd_synth({labeled, unlabeled, seed, out}); });
  m.def("stats", [](std::filesystem::path dataset, std::filesystem::path out, std::size_t bins,
                    std::size_t features) { return cmd_stats({dataset, out, bins, features}).size(); });
  m.def(
      "train", [](const std::string& config) { return summary_json(cmd_train(run_config(config))); },
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "evaluate_run",
      [](std::filesystem::path dataset, std::optional<std::filesystem::path> checkpoint,
         std::optional<std::filesystem::path> predictions, std::string split,
         std::optional<std::uint64_t> seed, std::filesystem::path out) {
        return nlohmann::json(cmd_eval({dataset, checkpoint, predictions, split, seed, out})).dump();
      },
      py::call_guard<py::gil_scoped_release>());
  m.def("predict", [](std::filesystem::path dataset, std::filesystem::path checkpoint,
                      std::filesystem::path out) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : cmd_predict({dataset, checkpoint, out})) {
      std::vector<bool> bits;
      for (std::size_t c = 0; c < kNumClasses; ++c) bits.push_back(p.bits[c]);
      rows.push_back({{"id", p.id}, {"probs", p.probs}, {"labels", bits}});
    }
    return rows.dump();
  });
  m.def(
      "ablate",
      [](const std::string& config, std::vector<std::uint64_t> seeds) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : cmd_ablate(run_config(config), seeds))
          rows.push_back({{"seed", r.seed}, {"row", ablation_row_name(r.all_data, r.hp, r.al)},
                          {"all_data", r.all_data}, {"hp", r.hp}, {"al", r.al},
                          {"val_map", r.val_map}, {"test", r.report}});
        return rows.dump();
      },
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "sweep",
      [](const std::string& config, std::vector<double> fractions, std::vector<std::uint64_t> seeds) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : cmd_sweep(run_config(config), fractions, seeds))
          rows.push_back({{"seed", r.seed}, {"fraction", r.fraction},
                          {"unlabeled_used", r.unlabeled_used}, {"test", r.report}});
        return rows.dump();
      },
      py::call_guard<py::gil_scoped_release>());
}
