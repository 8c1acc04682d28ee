#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gaitemo/commands.hpp"
#include "gaitemo/errors.hpp"

using namespace gaitemo;
namespace fs = std::filesystem;

namespace {

// Flags shared by train/ablate/sweep. Only flags the user actually passed end
// up in the override patch, so config-file values survive otherwise.
struct RunFlags {
  std::string dataset, out, config, cache;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch_size = 0, embedding = 0, joint_features = 0;
  double dropout = 0, lambda_quat = 0, lambda_aff = 0, learning_rate = 0;
  bool no_hp = false, no_al = false, labeled_only = false, no_decoder = false;

  CLI::Option *o_dataset{}, *o_out{}, *o_config{}, *o_cache{}, *o_seed{}, *o_epochs{}, *o_batch{},
      *o_embedding{}, *o_jf{}, *o_dropout{}, *o_lq{}, *o_la{}, *o_lr{}, *o_no_hp{}, *o_no_al{},
      *o_lab{}, *o_no_dec{};

  void attach(CLI::App* app) {
    o_dataset = app->add_option("-d,--dataset", dataset, "JSON-lines dataset");
    o_out = app->add_option("-o,--out", out, "output directory");
    o_config = app->add_option("-c,--config", config, "JSON config file (flags override it)");
    o_cache = app->add_option("--cache", cache, "preprocessed cache file (created if absent)");
    o_seed = app->add_option("--seed", seed, "random seed (required here or in the config)");
    o_epochs = app->add_option("--epochs", epochs);
    o_batch = app->add_option("--batch-size", batch_size);
    o_embedding = app->add_option("--embedding", embedding, "embedding width E");
    o_jf = app->add_option("--joint-features", joint_features, "per-joint feature width h");
    o_dropout = app->add_option("--dropout", dropout);
    o_lq = app->add_option("--lambda-quat", lambda_quat);
    o_la = app->add_option("--lambda-aff", lambda_aff);
    o_lr = app->add_option("--learning-rate", learning_rate);
    o_no_hp = app->add_flag("--no-hp", no_hp, "replace hierarchical pooling by one linear layer");
    o_no_al = app->add_flag("--no-al", no_al, "drop the affective loss");
    o_lab = app->add_flag("--labeled-only", labeled_only, "ignore unlabeled samples");
    o_no_dec = app->add_flag("--no-decoder", no_decoder, "train the classifier alone");
  }

  nlohmann::json overrides() const {
    nlohmann::json j = nlohmann::json::object();
    auto set = [&](CLI::Option* o, const char* key, auto value) {
      if (o->count() > 0) j[key] = value;
    };
    auto set_model = [&](CLI::Option* o, const char* key, auto value) {
      if (o->count() > 0) j["model"][key] = value;
    };
    set(o_dataset, "dataset", dataset);
    set(o_out, "out", out);
    set(o_cache, "cache", cache);
    set(o_seed, "seed", seed);
    set(o_epochs, "epochs", epochs);
    set(o_batch, "batch_size", batch_size);
    set(o_lq, "lambda_quat", lambda_quat);
    set(o_la, "lambda_aff", lambda_aff);
    set(o_lr, "learning_rate", learning_rate);
    set(o_lab, "use_unlabeled", !labeled_only);
    set_model(o_embedding, "embedding", embedding);
    set_model(o_jf, "joint_features", joint_features);
    set_model(o_dropout, "dropout", dropout);
    set_model(o_no_hp, "use_hierarchical_pooling", !no_hp);
    set_model(o_no_al, "use_affective_loss", !no_al);
    set_model(o_no_dec, "use_decoder", !no_decoder);
    return j;
  }

  RunConfig resolve() const {
    RunConfig cfg = resolve_run_config(
        config.empty() ? std::nullopt : std::optional<fs::path>(config), overrides());
    if (cfg.dataset.empty()) throw ConfigError("--dataset is required");
    if (cfg.out.empty()) throw ConfigError("--out is required");
    if (!fs::exists(cfg.dataset)) throw IOError("dataset not found: " + cfg.dataset.string());
    return cfg;
  }
};

void print_report(const EvalReport& r) {
  nlohmann::json j = r;
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perceived-emotion classification from 3D gait sequences"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic labeled/unlabeled dataset");
  c_synth->add_option("--labeled", synth.labeled)->required();
  c_synth->add_option("--unlabeled", synth.unlabeled)->required();
  c_synth->add_option("--seed", synth.seed)->required();
  std::string synth_out;
  c_synth->add_option("-o,--out", synth_out, "output .jsonl")->required();

  StatsOptions stats;
  std::string stats_dataset, stats_out;
  auto* c_stats = app.add_subcommand("stats", "per-class histograms of mean affective features");
  c_stats->add_option("-d,--dataset", stats_dataset)->required();
  c_stats->add_option("-o,--out", stats_out, "output CSV")->required();
  c_stats->add_option("--bins", stats.bins);
  c_stats->add_option("--features", stats.features, "use the first N features of the table");

  RunFlags train_flags;
  auto* c_train = app.add_subcommand("train", "train a model and evaluate it on the test split");
  train_flags.attach(c_train);

  EvalOptions eval;
  std::string eval_dataset, eval_ck, eval_pred, eval_out;
  std::uint64_t eval_seed = 0;
  auto* c_eval = app.add_subcommand("eval", "AP/mAP report for a checkpoint or predictions file");
  c_eval->add_option("-d,--dataset", eval_dataset)->required();
  auto* o_ck = c_eval->add_option("--checkpoint", eval_ck);
  auto* o_pred = c_eval->add_option("--predictions", eval_pred, "CSV id,happy,sad,angry,neutral");
  o_ck->excludes(o_pred);
  c_eval->add_option("--split", eval.split)->check(CLI::IsMember({"train", "val", "test", "all"}));
  auto* o_eval_seed = c_eval->add_option("--seed", eval_seed, "split seed (default: checkpoint's)");
  c_eval->add_option("-o,--out", eval_out, "report JSON");

  PredictOptions predict;
  std::string pred_dataset, pred_ck, pred_out;
  auto* c_predict = app.add_subcommand("predict", "per-sample probabilities and multi-hot labels");
  c_predict->add_option("-d,--dataset", pred_dataset)->required();
  c_predict->add_option("--checkpoint", pred_ck)->required();
  c_predict->add_option("-o,--out", pred_out, "output CSV")->required();

  RunFlags ablate_flags;
  std::vector<std::uint64_t> ablate_seeds;
  auto* c_ablate = app.add_subcommand("ablate", "labeled/all-data x HP x AL grid (8 rows per seed)");
  ablate_flags.attach(c_ablate);
  c_ablate->add_option("--seeds", ablate_seeds, "one grid per seed (default: --seed)");

  RunFlags sweep_flags;
  std::vector<std::uint64_t> sweep_seeds;
  std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
  auto* c_sweep = app.add_subcommand("sweep", "test AP against the fraction of unlabeled data used");
  sweep_flags.attach(c_sweep);
  c_sweep->add_option("--seeds", sweep_seeds, "one sweep per seed (default: --seed)");
  c_sweep->add_option("--fractions", fractions);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_synth->parsed()) {
      synth.out = synth_out;
      cmd_synth(synth);
    } else if (c_stats->parsed()) {
      stats.dataset = stats_dataset;
      stats.out = stats_out;
      const auto table = cmd_stats(stats);
      std::cout << "feature,class,mean\n";
      for (const auto& h : table)
        if (!h.counts.empty())
          std::cout << h.feature << ',' << kClassNames[h.cls] << ',' << h.mean << '\n';
    } else if (c_train->parsed()) {
      const RunConfig cfg = train_flags.resolve();
      const TrainSummary s = cmd_train(cfg);
      std::cerr << "best epoch " << s.result.best_epoch << ", checkpoint " << s.checkpoint.string()
                << '\n';
      print_report(s.test);
    } else if (c_eval->parsed()) {
      eval.dataset = eval_dataset;
      if (!eval_ck.empty()) eval.checkpoint = eval_ck;
      if (!eval_pred.empty()) eval.predictions = eval_pred;
      if (o_eval_seed->count() > 0) eval.seed = eval_seed;
      eval.out = eval_out;
      print_report(cmd_eval(eval));
    } else if (c_predict->parsed()) {
      predict.dataset = pred_dataset;
      predict.checkpoint = pred_ck;
      predict.out = pred_out;
      std::cerr << cmd_predict(predict).size() << " predictions written to " << pred_out << '\n';
    } else if (c_ablate->parsed()) {
      const RunConfig cfg = ablate_flags.resolve();
      if (ablate_seeds.empty()) ablate_seeds.push_back(cfg.train.seed);
      const auto rows = cmd_ablate(cfg, ablate_seeds);
      for (const auto& r : rows)
        std::cout << r.seed << ' ' << ablation_row_name(r.all_data, r.hp, r.al) << " mAP "
                  << r.report.map << '\n';
    } else if (c_sweep->parsed()) {
      const RunConfig cfg = sweep_flags.resolve();
      if (sweep_seeds.empty()) sweep_seeds.push_back(cfg.train.seed);
      const auto rows = cmd_sweep(cfg, fractions, sweep_seeds);
      for (const auto& r : rows)
        std::cout << r.seed << " fraction " << r.fraction << " mAP " << r.report.map << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
