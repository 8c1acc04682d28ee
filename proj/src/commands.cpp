#include "gaitemo/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "gaitemo/affective.hpp"
#include "gaitemo/errors.hpp"

namespace gaitemo {

namespace fs = std::filesystem;

// ---- configuration -------------------------------------------------------------

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = c.train;
  j["dataset"] = c.dataset.string();
  j["out"] = c.out.string();
  j["cache"] = c.cache ? nlohmann::json(c.cache->string()) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  RunConfig d;
  d.train = j.get<TrainConfig>();
  d.dataset = j.value("dataset", std::string());
  d.out = j.value("out", std::string());
  if (j.contains("cache") && !j.at("cache").is_null()) d.cache = j.at("cache").get<std::string>();
  c = std::move(d);
}

RunConfig resolve_run_config(const std::optional<fs::path>& config_file,
                             const nlohmann::json& overrides) {
  nlohmann::json doc = RunConfig{};
  doc.erase("seed");  // a seed must come from the file or the flags
  if (config_file) {
    std::ifstream is(*config_file);
    if (!is) throw IOError("cannot open config " + config_file->string());
    nlohmann::json file;
    try {
      is >> file;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed config " + config_file->string() + ": " + e.what());
    }
    doc.merge_patch(file);
  }
  doc.merge_patch(overrides);
  if (!doc.contains("seed") || doc.at("seed").is_null())
    throw ConfigError("a seed is required (flag --seed or \"seed\" in the config file)");
  try {
    RunConfig cfg = doc.get<RunConfig>();
    cfg.train.model.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

nlohmann::json metadata(const std::string& command, const nlohmann::json& config) {
  return {{"tool", "gaitemo"}, {"version", kToolVersion}, {"command", command}, {"config", config}};
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream os(path);
  if (!os) throw IOError("cannot write " + path.string());
  os << doc.dump(2) << '\n';
  if (!os) throw IOError("failed writing " + path.string());
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IOError("cannot write " + path.string());
  return os;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IOError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Doubles in reports: enough digits to be exact.
std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string ap_cells(const EvalReport& r) {
  std::string s;
  for (const auto& ap : r.ap) s += (ap ? num(*ap) : std::string()) + ',';
  return s + num(r.map);
}

struct PreparedSplits {
  std::vector<PreparedSample> train, val, test;
};

PreparedSplits prepare_splits(const Dataset& split, const std::optional<fs::path>& cache) {
  std::vector<std::size_t> all(split.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<PreparedSample> prepared;
  if (cache && fs::exists(*cache)) {
    prepared.resize(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      prepared[i].id = split.samples[i].id;
      if (split.samples[i].label_probs) prepared[i].label = to_multihot(*split.samples[i].label_probs);
    }
    if (load_cache(prepared, *cache) != prepared.size())
      throw ConfigError("cache " + cache->string() + " does not cover the dataset");
  } else {
    prepared = prepare_samples(split, all);
    if (cache) save_cache(prepared, *cache);
  }
  PreparedSplits out;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    switch (split.split_assignment.at(split.samples[i].id)) {
      case Split::kTrain: out.train.push_back(std::move(prepared[i])); break;
      case Split::kVal: out.val.push_back(std::move(prepared[i])); break;
      case Split::kTest: out.test.push_back(std::move(prepared[i])); break;
    }
  }
  return out;
}

struct RunOutcome {
  TrainResult result;
  EvalReport test;
};

// Trains one configuration and writes its artifacts into `dir`.
RunOutcome run_one(const RunConfig& cfg, const std::string& command,
                   std::span<const PreparedSample> train_set, std::span<const PreparedSample> val_set,
                   std::span<const PreparedSample> test_set, const fs::path& dir,
                   const std::string& label) {
  ensure_dir(dir);
  const nlohmann::json meta = metadata(command, cfg);
  write_json(dir / "run_config.json", meta);

  std::ofstream csv = open_out(dir / "epochs.csv");
  csv << "# " << meta.dump() << '\n' << epoch_csv_header() << '\n';
  GaitModel model(cfg.train.model, cfg.train.seed);
  RunOutcome out;
  out.result = train(model, train_set, val_set, cfg.train, [&](const EpochLog& e) {
    csv << epoch_csv_row(e) << '\n';
    csv.flush();
    if (e.epoch % 10 == 0 || e.epoch + 1 == cfg.train.epochs)
      std::clog << label << "epoch " << e.epoch << " loss " << e.loss.total << " val_map "
                << e.val_map << std::endl;
  });
  save_checkpoint(model, cfg.train, out.result.best_epoch, dir / "checkpoint.json");
  out.test = evaluate_samples(model, test_set);

  nlohmann::json report = out.test;
  report["meta"] = meta;
  report["best_epoch"] = out.result.best_epoch;
  report["best_val_map"] = std::isnan(out.result.best_val_map)
                               ? nlohmann::json(nullptr)
                               : nlohmann::json(out.result.best_val_map);
  write_json(dir / "report.json", report);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::map<std::string, LabelProbs> read_predictions(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot open predictions " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::array<std::size_t, kNumClasses> col{};
  std::map<std::string, LabelProbs> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (header.empty()) {
      header = cells;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const std::string name(kClassNames[c]);
        auto it = std::find(header.begin(), header.end(), "p_" + name);
        if (it == header.end()) it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("predictions lack a column for " + name, lineno);
        col[c] = static_cast<std::size_t>(it - header.begin());
      }
      continue;
    }
    if (cells.size() != header.size()) throw ParseError("wrong number of cells", lineno);
    LabelProbs p{};
    try {
      for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = std::stod(cells[col[c]]);
    } catch (const std::exception&) {
      throw ParseError("non-numeric probability", lineno);
    }
    out[cells[0]] = p;
  }
  return out;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "' (train, val, test or all)");
}

}  // namespace

// ---- synth ---------------------------------------------------------------------

void cmd_synth(const SynthOptions& opt) {
  const Dataset ds = generate_synthetic(opt.labeled, opt.unlabeled, opt.seed);
  if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
  save_dataset(ds, opt.out);
  write_json(fs::path(opt.out.string() + ".meta.json"),
             metadata("synth", {{"labeled", opt.labeled},
                                {"unlabeled", opt.unlabeled},
                                {"seed", opt.seed},
                                {"out", opt.out.string()}}));
}

// ---- stats ---------------------------------------------------------------------

std::vector<FeatureHistogram> cmd_stats(const StatsOptions& opt) {
  if (opt.features == 0 || opt.features > kNumAffective)
    throw ConfigError("--features must be between 1 and 18");
  if (opt.bins == 0) throw ConfigError("--bins must be positive");
  const Dataset ds = load_dataset(opt.dataset);
  auto table = mean_feature_histograms(ds, opt.bins, opt.features);
  std::ofstream os = open_out(opt.out);
  os << "# "
     << metadata("stats", {{"dataset", opt.dataset.string()},
                           {"bins", opt.bins},
                           {"features", opt.features},
                           {"out", opt.out.string()}})
            .dump()
     << '\n';
  write_histogram_csv(os, table);
  if (!os) throw IOError("failed writing " + opt.out.string());
  return table;
}

// ---- train / eval / predict ------------------------------------------------------

TrainSummary cmd_train(const RunConfig& cfg) {
  const Dataset ds = split_dataset(load_dataset(cfg.dataset), cfg.train.seed);
  const PreparedSplits sets = prepare_splits(ds, cfg.cache);
  const RunOutcome run = run_one(cfg, "train", sets.train, sets.val, sets.test, cfg.out, "");
  return {run.result, run.test, cfg.out / "checkpoint.json"};
}

EvalReport cmd_eval(const EvalOptions& opt) {
  if (opt.checkpoint.has_value() == opt.predictions.has_value())
    throw ConfigError("eval needs exactly one of --checkpoint or --predictions");
  const Dataset raw = load_dataset(opt.dataset);

  std::optional<Checkpoint> ck;
  if (opt.checkpoint) {
    if (!fs::exists(*opt.checkpoint)) throw IOError("missing checkpoint " + opt.checkpoint->string());
    ck = load_checkpoint(*opt.checkpoint);
  }
  // Which samples to score.
  std::vector<std::size_t> chosen;
  std::optional<std::uint64_t> seed = opt.seed;
  if (!seed && ck) seed = ck->config.seed;
  if (opt.split == "all") {
    chosen = raw.labeled_indices();
  } else {
    if (!seed) throw ConfigError("--seed is required to select a split for predictions");
    const Dataset ds = split_dataset(raw, *seed);
    chosen = ds.indices(parse_split(opt.split), true);
  }
  if (chosen.empty()) throw EmptyError("no labeled samples in the chosen split");

  EvalReport report;
  if (ck) {
    const auto samples = prepare_samples(raw, chosen);
    report = evaluate_samples(*ck->model, samples);
  } else {
    const auto preds = read_predictions(*opt.predictions);
    Eigen::MatrixXd probs(static_cast<Eigen::Index>(chosen.size()),
                          static_cast<Eigen::Index>(kNumClasses));
    std::vector<MultiHotLabel> truths;
    for (std::size_t r = 0; r < chosen.size(); ++r) {
      const GaitSample& s = raw.samples[chosen[r]];
      const auto it = preds.find(s.id);
      if (it == preds.end()) throw SchemaError("no prediction for sample " + s.id);
      for (std::size_t c = 0; c < kNumClasses; ++c)
        probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = it->second[c];
      truths.push_back(to_multihot(*s.label_probs));
    }
    report = evaluate(probs, truths);
  }

  nlohmann::json doc = report;
  doc["meta"] = metadata(
      "eval", {{"dataset", opt.dataset.string()},
               {"checkpoint", opt.checkpoint ? nlohmann::json(opt.checkpoint->string()) : nlohmann::json(nullptr)},
               {"predictions", opt.predictions ? nlohmann::json(opt.predictions->string()) : nlohmann::json(nullptr)},
               {"split", opt.split},
               {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)},
               {"checkpoint_config", ck ? nlohmann::json(ck->config) : nlohmann::json(nullptr)}});
  if (!opt.out.empty()) {
    if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
    write_json(opt.out, doc);
  }
  return report;
}

std::vector<Prediction> cmd_predict(const PredictOptions& opt) {
  if (!fs::exists(opt.checkpoint)) throw IOError("missing checkpoint " + opt.checkpoint.string());
  Checkpoint ck = load_checkpoint(opt.checkpoint);
  const Dataset ds = load_dataset(opt.dataset);
  std::vector<std::size_t> all(ds.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto samples = prepare_samples(ds, all);
  const Eigen::MatrixXd probs = predict_probs(*ck.model, samples);

  std::vector<Prediction> out;
  std::ofstream os = open_out(opt.out);
  os << "# "
     << metadata("predict", {{"dataset", opt.dataset.string()},
                             {"checkpoint", opt.checkpoint.string()},
                             {"checkpoint_config", ck.config}})
            .dump()
     << '\n';
  os << "id";
  for (auto name : kClassNames) os << ",p_" << name;
  for (auto name : kClassNames) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Prediction p;
    p.id = samples[i].id;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      p.probs[c] = probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    p.bits = to_multihot(p.probs);
    os << p.id;
    for (double v : p.probs) os << ',' << num(v);
    for (std::size_t c = 0; c < kNumClasses; ++c) os << ',' << int(p.bits[c]);
    os << '\n';
    out.push_back(std::move(p));
  }
  if (!os) throw IOError("failed writing " + opt.out.string());
  return out;
}

// ---- ablate ----------------------------------------------------------------------

std::string ablation_row_name(bool all_data, bool hp, bool al) {
  std::string s = all_data ? "all" : "labeled";
  if (hp) s += "_hp";
  if (al) s += "_al";
  if (!hp && !al) s += "_plain";
  return s;
}

TrainConfig ablation_config(const TrainConfig& base, bool all_data, bool hp, bool al) {
  TrainConfig c = base;
  c.use_unlabeled = all_data;
  c.model.use_hierarchical_pooling = hp;
  c.model.use_affective_loss = al;
  c.model.use_decoder = all_data || hp || al;
  return c;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("ablate needs at least one seed");
  ensure_dir(base.out);
  const Dataset raw = load_dataset(base.dataset);
  const nlohmann::json meta = metadata("ablate", {{"base", base}, {"seeds", seeds}});
  write_json(base.out / "run_config.json", meta);

  std::vector<AblationRow> rows;
  const auto write_table = [&] {
    std::ofstream os = open_out(base.out / "ablation.csv");
    os << "# " << meta.dump() << '\n'
       << "seed,row,all_data,hp,al,ap_happy,ap_sad,ap_angry,ap_neutral,map,val_map\n";
    for (const auto& r : rows)
      os << r.seed << ',' << ablation_row_name(r.all_data, r.hp, r.al) << ',' << int(r.all_data)
         << ',' << int(r.hp) << ',' << int(r.al) << ',' << ap_cells(r.report) << ','
         << num(r.val_map) << '\n';
  };

  for (std::uint64_t seed : seeds) {
    const Dataset ds = split_dataset(raw, seed);
    const PreparedSplits sets = prepare_splits(ds, std::nullopt);
    for (bool all_data : {false, true})
      for (auto [hp, al] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
        RunConfig cfg = base;
        cfg.train = ablation_config(base.train, all_data, hp, al);
        cfg.train.seed = seed;
        const std::string name = ablation_row_name(all_data, hp, al);
        cfg.out = base.out / (name + "_seed" + std::to_string(seed));
        const RunOutcome run = run_one(cfg, "ablate", sets.train, sets.val, sets.test, cfg.out,
                                       "[" + name + " seed " + std::to_string(seed) + "] ");
        rows.push_back({seed, all_data, hp, al, run.test, run.result.best_val_map});
        write_table();
      }
  }
  return rows;
}

// ---- sweep -----------------------------------------------------------------------

std::vector<SweepRow> cmd_sweep(const RunConfig& base, const std::vector<double>& fractions,
                                const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in [0, 1]");
  ensure_dir(base.out);
  const Dataset raw = load_dataset(base.dataset);
  if (raw.num_labeled() == raw.samples.size()) throw EmptyError("sweep needs unlabeled samples");
  const nlohmann::json meta =
      metadata("sweep", {{"base", base}, {"fractions", fractions}, {"seeds", seeds}});
  write_json(base.out / "run_config.json", meta);

  std::vector<SweepRow> rows;
  const auto write_table = [&] {
    std::ofstream os = open_out(base.out / "sweep.csv");
    os << "# " << meta.dump() << '\n'
       << "seed,fraction,unlabeled_used,ap_happy,ap_sad,ap_angry,ap_neutral,map\n";
    for (const auto& r : rows)
      os << r.seed << ',' << num(r.fraction) << ',' << r.unlabeled_used << ','
         << ap_cells(r.report) << '\n';
  };

  for (std::uint64_t seed : seeds) {
    const Dataset ds = split_dataset(raw, seed);
    const PreparedSplits sets = prepare_splits(ds, std::nullopt);
    std::vector<std::size_t> labeled, unlabeled;
    for (std::size_t i = 0; i < sets.train.size(); ++i)
      (sets.train[i].label ? labeled : unlabeled).push_back(i);
    std::mt19937_64 rng(seed);
    std::shuffle(unlabeled.begin(), unlabeled.end(), rng);

    for (double f : fractions) {
      const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(unlabeled.size())));
      std::vector<PreparedSample> train_set;
      for (std::size_t i : labeled) train_set.push_back(sets.train[i]);
      for (std::size_t i = 0; i < k; ++i) train_set.push_back(sets.train[unlabeled[i]]);
      RunConfig cfg = base;
      cfg.train.seed = seed;
      cfg.train.use_unlabeled = true;
      std::ostringstream name;
      name << "fraction" << f << "_seed" << seed;
      cfg.out = base.out / name.str();
      const RunOutcome run =
          run_one(cfg, "sweep", train_set, sets.val, sets.test, cfg.out, "[" + name.str() + "] ");
      rows.push_back({seed, f, k, run.test});
      write_table();
    }
  }
  return rows;
}

}  // namespace gaitemo
