#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gaitemo/commands.hpp"
#include "gaitemo/errors.hpp"
#include "gaitemo/gait_io.hpp"

using namespace gaitemo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gaitemo_cmd_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream is(slurp(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

RunConfig quick_run(const fs::path& dir, const fs::path& data, std::uint64_t seed) {
  RunConfig c;
  c.dataset = data;
  c.out = dir;
  c.train.model.joint_features = 4;
  c.train.epochs = 1;
  c.train.batch_size = 8;
  c.train.seed = seed;
  return c;
}

fs::path small_corpus(const fs::path& dir) {
  const fs::path data = dir / "d.jsonl";
  cmd_synth({20, 10, 3, data});
  return data;
}

}  // namespace

TEST_CASE("synth: line count, byte identity, empty corpus") {
  const fs::path dir = scratch("synth");
  cmd_synth({200, 200, 7, dir / "a.jsonl"});
  cmd_synth({200, 200, 7, dir / "b.jsonl"});
  CHECK(lines(dir / "a.jsonl").size() == 400);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(fs::exists(dir / "a.jsonl.meta.json"));

  cmd_synth({0, 0, 7, dir / "empty.jsonl"});
  CHECK(fs::exists(dir / "empty.jsonl"));
  CHECK(load_dataset(dir / "empty.jsonl").samples.empty());

  CHECK_THROWS_AS(cmd_synth({1, 0, 1, fs::path("/proc/gaitemo_no_such/x.jsonl")}), IOError);
}

TEST_CASE("stats: row counts, feature limit, unlabeled corpus") {
  const fs::path dir = scratch("stats");
  const fs::path data = small_corpus(dir);
  const auto all = cmd_stats({data, dir / "all.csv", 10, 18});
  CHECK(all.size() == 18 * 4);
  const auto six = cmd_stats({data, dir / "six.csv", 10, 6});
  CHECK(six.size() == 6 * 4);
  for (const auto& h : six) CHECK(h.feature < 6);
  const auto rows = lines(dir / "six.csv");
  CHECK(rows[0].rfind("# ", 0) == 0);
  CHECK(rows[1] == "feature,class,bin_left,bin_right,count");
  CHECK(rows.size() == 2 + 6 * 4 * 10);

  cmd_synth({0, 5, 1, dir / "u.jsonl"});
  CHECK_THROWS_AS(cmd_stats({dir / "u.jsonl", dir / "u.csv", 10, 18}), EmptyError);
}

TEST_CASE("config precedence: defaults, then file, then flags; seed required") {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "c.json") << R"({"epochs":3,"seed":1,"batch_size":16})";
  const RunConfig r = resolve_run_config(dir / "c.json", {{"seed", 2}});
  CHECK(r.train.epochs == 3);
  CHECK(r.train.batch_size == 16);
  CHECK(r.train.seed == 2);
  CHECK(r.train.model.embedding == 32);  // default
  CHECK_THROWS_AS(resolve_run_config(std::nullopt, nlohmann::json::object()), ConfigError);

  nlohmann::json j = r;
  CHECK(nlohmann::json(j.get<RunConfig>()) == j);
}

TEST_CASE("train, eval, predict") {
  const fs::path dir = scratch("train");
  const fs::path data = small_corpus(dir);
  const RunConfig cfg = quick_run(dir / "run", data, 5);
  const TrainSummary s = cmd_train(cfg);
  for (const char* f : {"checkpoint.json", "epochs.csv", "run_config.json", "report.json"})
    CHECK(fs::exists(dir / "run" / f));

  const EvalReport e = cmd_eval({data, dir / "run" / "checkpoint.json", std::nullopt, "test",
                                 std::nullopt, dir / "eval.json"});
  CHECK(e.map == doctest::Approx(s.test.map).epsilon(1e-12));

  const auto preds = cmd_predict({data, dir / "run" / "checkpoint.json", dir / "pred.csv"});
  CHECK(preds.size() == 30);
  for (const auto& p : preds) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(p.bits[c] == (p.probs[c] > 0.25));
      sum += p.probs[c];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(lines(dir / "pred.csv").size() == 2 + 30);

  CHECK_THROWS_AS(cmd_eval({data, dir / "nope.json", std::nullopt, "test", std::nullopt, dir / "x.json"}),
                  IOError);
}

TEST_CASE("eval on perfect probabilities scores 1") {
  const fs::path dir = scratch("perfect");
  const fs::path data = small_corpus(dir);
  const Dataset ds = load_dataset(data);
  std::ofstream os(dir / "perfect.csv");
  os << "id,p_happy,p_sad,p_angry,p_neutral\n";
  for (const auto& s : ds.samples) {
    os << s.id;
    for (std::size_t c = 0; c < 4; ++c)
      os << ',' << (s.labeled() && (*s.label_probs)[c] > 0.25 ? 1.0 : 0.0);
    os << '\n';
  }
  os.close();
  const EvalReport r = cmd_eval({data, std::nullopt, dir / "perfect.csv", "all", 1, dir / "r.json"});
  CHECK(r.map == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ablation grid: flags and 8 rows") {
  const TrainConfig base;
  CHECK_FALSE(ablation_config(base, false, false, false).model.use_decoder);
  for (bool all : {false, true})
    for (bool hp : {false, true})
      for (bool al : {false, true}) {
        const TrainConfig c = ablation_config(base, all, hp, al);
        CHECK(c.use_unlabeled == all);
        CHECK(c.model.use_hierarchical_pooling == hp);
        CHECK(c.model.use_affective_loss == al);
        if (all || hp || al) CHECK(c.model.use_decoder);
      }

  const fs::path dir = scratch("ablate");
  const fs::path data = small_corpus(dir);
  const auto rows = cmd_ablate(quick_run(dir / "grid", data, 2), {2});
  REQUIRE(rows.size() == 8);
  const auto table = lines(dir / "grid" / "ablation.csv");
  CHECK(table.size() == 2 + 8);
  for (const auto& r : rows) {
    const fs::path run = dir / "grid" / (ablation_row_name(r.all_data, r.hp, r.al) + "_seed2");
    const nlohmann::json stored = nlohmann::json::parse(slurp(run / "run_config.json"));
    const TrainConfig t = stored["config"].get<TrainConfig>();
    CHECK(t.use_unlabeled == r.all_data);
    CHECK(t.model.use_hierarchical_pooling == r.hp);
    CHECK(t.model.use_affective_loss == r.al);
  }
  CHECK(rows.back().all_data);
  CHECK(rows.back().hp);
  CHECK(rows.back().al);
}

TEST_CASE("sweep: one row per fraction; fraction 0 is labeled-only training") {
  const fs::path dir = scratch("sweep");
  const fs::path data = small_corpus(dir);
  const std::vector<double> fr{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto rows = cmd_sweep(quick_run(dir / "sw", data, 4), fr, {4});
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].unlabeled_used == 0);
  CHECK(rows[4].unlabeled_used == 10);
  CHECK(lines(dir / "sw" / "sweep.csv").size() == 2 + 5);

  RunConfig labeled_only = quick_run(dir / "lo", data, 4);
  labeled_only.train.use_unlabeled = false;
  const TrainSummary s = cmd_train(labeled_only);
  CHECK(s.test.map == rows[0].report.map);
}
