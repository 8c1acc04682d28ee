#include "gaitemo/gait_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "gaitemo/errors.hpp"

namespace gaitemo {

using nlohmann::json;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::size_t Dataset::num_labeled() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.labeled(); }));
}

std::vector<std::size_t> Dataset::indices(Split s, bool labeled_only) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto it = split_assignment.find(samples[i].id);
    if (it == split_assignment.end() || it->second != s) continue;
    if (labeled_only && !samples[i].labeled()) continue;
    out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::labeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].labeled()) out.push_back(i);
  return out;
}

void validate_sample(const GaitSample& sample) {
  if (sample.positions.joints() != kNumJoints)
    throw SchemaError("sample '" + sample.id + "' has " +
                      std::to_string(sample.positions.joints()) + " joints per frame, expected 21");
  for (double v : sample.positions.data())
    if (!std::isfinite(v)) throw SchemaError("sample '" + sample.id + "' has non-finite positions");
  if (sample.label_probs)
    for (double p : *sample.label_probs)
      if (!(p >= 0.0 && p <= 1.0))
        throw SchemaError("sample '" + sample.id + "' has label probability outside [0, 1]");
}

GaitSample parse_sample_record(const std::string& line, std::size_t line_number) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_number);
  }
  GaitSample s;
  try {
    s.id = rec.at("id").get<std::string>();
    const auto& frames = rec.at("frames");
    if (!frames.is_array()) throw ParseError("'frames' must be an array", line_number);
    s.positions = PoseSequence(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto& frame = frames[t];
      if (!frame.is_array()) throw ParseError("frame must be an array of joints", line_number);
      if (frame.size() != kNumJoints)
        throw SchemaError("line " + std::to_string(line_number) + ": frame " + std::to_string(t) +
                          " has " + std::to_string(frame.size()) + " joints, expected 21");
      for (std::size_t j = 0; j < kNumJoints; ++j) {
        const auto& p = frame[j];
        if (!p.is_array() || p.size() != 3)
          throw SchemaError("line " + std::to_string(line_number) + ": joint " +
                            std::to_string(j) + " is not a 3D point");
        s.positions.at(t, j) = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      }
    }
    if (auto it = rec.find("label_probs"); it != rec.end() && !it->is_null()) {
      if (!it->is_array() || it->size() != kNumClasses)
        throw SchemaError("line " + std::to_string(line_number) +
                          ": label_probs must hold 4 numbers or be null");
      LabelProbs probs{};
      for (std::size_t c = 0; c < kNumClasses; ++c) probs[c] = (*it)[c].get<double>();
      s.label_probs = probs;
    }
    if (auto it = rec.find("source"); it != rec.end() && !it->is_null())
      s.source = it->get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad record: ") + e.what(), line_number);
  }
  try {
    validate_sample(s);
  } catch (const SchemaError& e) {
    throw SchemaError("line " + std::to_string(line_number) + ": " + e.what());
  }
  return s;
}

std::string format_sample_record(const GaitSample& sample) {
  json frames = json::array();
  for (std::size_t t = 0; t < sample.positions.frames(); ++t) {
    json frame = json::array();
    for (std::size_t j = 0; j < sample.positions.joints(); ++j) {
      const auto p = sample.positions.at(t, j);
      frame.push_back(json::array({p.x(), p.y(), p.z()}));
    }
    frames.push_back(std::move(frame));
  }
  json rec = {{"id", sample.id},
              {"frames", std::move(frames)},
              {"label_probs", sample.label_probs ? json(*sample.label_probs) : json(nullptr)}};
  if (sample.source) rec["source"] = *sample.source;
  return rec.dump();
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open dataset '" + path.string() + "'");
  Dataset ds;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    GaitSample s = parse_sample_record(line, line_number);
    if (!ids.insert(s.id).second)
      throw SchemaError("line " + std::to_string(line_number) + ": duplicate id '" + s.id + "'");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write dataset '" + path.string() + "'");
  for (const auto& s : ds.samples) out << format_sample_record(s) << '\n';
  if (!out) throw IOError("write failed for '" + path.string() + "'");
}

PoseSequence preprocess_temporal(const PoseSequence& positions) {
  if (positions.empty()) throw EmptyGaitError("gait has no frames");
  PoseSequence out(kNumFrames, positions.joints());
  for (std::size_t k = 0; k < kNumFrames; ++k) {
    const std::size_t src = k * kFrameStride;
    if (src >= positions.frames()) break;  // zero padding
    for (std::size_t j = 0; j < positions.joints(); ++j) out.at(k, j) = positions.at(src, j);
  }
  return out;
}

PoseSequence preprocess_temporal(const GaitSample& sample) {
  return preprocess_temporal(sample.positions);
}

Dataset split_dataset(Dataset ds, std::uint64_t seed) {
  std::vector<std::size_t> labeled = ds.labeled_indices();
  const std::size_t n = labeled.size();
  if (n < 10)
    throw SplitError("need at least 10 labeled samples to split, have " + std::to_string(n));
  const std::size_t n_train = (n * 8) / 10;
  const std::size_t n_val = (n - n_train) / 2;
  const std::size_t n_test = n - n_train - n_val;

  std::mt19937_64 rng(seed);
  ds.split_assignment.clear();
  for (const auto& s : ds.samples)
    if (!s.labeled()) ds.split_assignment[s.id] = Split::kTrain;

  const bool has_sources = std::any_of(labeled.begin(), labeled.end(), [&](std::size_t i) {
    return ds.samples[i].source.has_value();
  });

  std::vector<std::size_t> rest;
  if (has_sources) {
    std::map<std::string, std::vector<std::size_t>> by_source;
    for (std::size_t i : labeled) {
      const auto& s = ds.samples[i];
      by_source[s.source ? *s.source : "id:" + s.id].push_back(i);
    }
    std::vector<std::string> sources;
    for (const auto& [name, _] : by_source) sources.push_back(name);
    std::shuffle(sources.begin(), sources.end(), rng);
    std::size_t taken = 0;
    for (const auto& name : sources) {
      auto& members = by_source[name];
      if (taken < n_test && taken + members.size() <= n_test + n_test / 2 + 1) {
        for (std::size_t i : members) ds.split_assignment[ds.samples[i].id] = Split::kTest;
        taken += members.size();
      } else {
        rest.insert(rest.end(), members.begin(), members.end());
      }
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    const std::size_t val = std::min(rest.size(), n_val);
    for (std::size_t k = 0; k < rest.size(); ++k)
      ds.split_assignment[ds.samples[rest[k]].id] = k < val ? Split::kVal : Split::kTrain;
    return ds;
  }

  std::shuffle(labeled.begin(), labeled.end(), rng);
  for (std::size_t k = 0; k < n; ++k) {
    const Split s = k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
    ds.split_assignment[ds.samples[labeled[k]].id] = s;
  }
  return ds;
}

}  // namespace gaitemo
