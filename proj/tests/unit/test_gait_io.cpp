#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gaitemo/errors.hpp"
#include "gaitemo/gait_io.hpp"

using namespace gaitemo;
namespace fs = std::filesystem;

namespace {

// Frame t has every coordinate equal to t + 1, so frames are identifiable.
PoseSequence counting_sequence(std::size_t frames) {
  PoseSequence p(frames);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < kNumJoints; ++j) p.at(t, j) = Vec3::Constant(double(t + 1));
  return p;
}

std::string frames_json(std::size_t frames, std::size_t joints) {
  std::ostringstream os;
  os << '[';
  for (std::size_t t = 0; t < frames; ++t) {
    os << (t ? "," : "") << '[';
    for (std::size_t j = 0; j < joints; ++j) os << (j ? "," : "") << "[0.1,0.2,0.3]";
    os << ']';
  }
  os << ']';
  return os.str();
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("gaitemo_test_" + name);
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST_CASE("240 frames keep every fifth frame") {
  const PoseSequence out = preprocess_temporal(counting_sequence(240));
  REQUIRE(out.frames() == 48);
  for (std::size_t k = 0; k < 48; ++k) CHECK(out.at(k, 3)(0) == double(5 * k + 1));
}

TEST_CASE("10 frames: two real frames then zero padding") {
  const PoseSequence out = preprocess_temporal(counting_sequence(10));
  REQUIRE(out.frames() == 48);
  CHECK(out.at(0, 0)(0) == 1.0);
  CHECK(out.at(1, 0)(0) == 6.0);
  for (std::size_t k = 2; k < 48; ++k)
    for (std::size_t j = 0; j < kNumJoints; ++j) CHECK(out.at(k, j).isZero());
}

TEST_CASE("600 frames equal the first 240") {
  const PoseSequence long_seq = counting_sequence(600);
  PoseSequence clipped(240);
  for (std::size_t t = 0; t < 240; ++t)
    for (std::size_t j = 0; j < kNumJoints; ++j) clipped.at(t, j) = long_seq.at(t, j);
  CHECK(preprocess_temporal(long_seq) == preprocess_temporal(clipped));
}

TEST_CASE("output is 48 frames for any length; empty throws") {
  for (std::size_t n : {1u, 47u, 48u, 239u, 241u, 1000u})
    CHECK(preprocess_temporal(counting_sequence(n)).frames() == 48);
  CHECK_THROWS_AS(preprocess_temporal(PoseSequence(0)), EmptyGaitError);
}

TEST_CASE("load three valid records") {
  std::string text;
  for (int i = 0; i < 3; ++i)
    text += R"({"id":"s)" + std::to_string(i) + R"(","frames":)" + frames_json(4, 21) +
            R"(,"label_probs":)" + (i == 2 ? std::string("null") : "[0.5,0,0.3,0.2]") + "}\n";
  const Dataset ds = load_dataset(temp_file("three.jsonl", text));
  REQUIRE(ds.samples.size() == 3);
  CHECK(ds.samples[0].positions.frames() == 4);
  CHECK(ds.samples[0].labeled());
  CHECK_FALSE(ds.samples[2].labeled());
  CHECK(ds.num_labeled() == 2);
}

TEST_CASE("record with 20 joints is a schema error") {
  const std::string text = R"({"id":"a","frames":)" + frames_json(2, 20) + R"(,"label_probs":null})";
  CHECK_THROWS_AS(load_dataset(temp_file("j20.jsonl", text + "\n")), SchemaError);
}

TEST_CASE("label probability 1.2 is a schema error") {
  const std::string text =
      R"({"id":"a","frames":)" + frames_json(2, 21) + R"(,"label_probs":[1.2,0,0,0]})";
  CHECK_THROWS_AS(load_dataset(temp_file("p12.jsonl", text + "\n")), SchemaError);
}

TEST_CASE("malformed JSON reports its line") {
  const std::string good = R"({"id":"a","frames":)" + frames_json(1, 21) + R"(,"label_probs":null})";
  try {
    load_dataset(temp_file("bad.jsonl", good + "\n{not json\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_dataset(fs::temp_directory_path() / "gaitemo_missing.jsonl"), IOError);
}

TEST_CASE("dataset save/load round trip") {
  const Dataset ds = generate_synthetic(3, 2, 5);
  const fs::path p = fs::temp_directory_path() / "gaitemo_test_roundtrip.jsonl";
  save_dataset(ds, p);
  const Dataset back = load_dataset(p);
  REQUIRE(back.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(back.samples[i] == ds.samples[i]);
}

TEST_CASE("split 100 labeled + 50 unlabeled") {
  Dataset ds = split_dataset(generate_synthetic(100, 50, 1), 9);
  CHECK(ds.indices(Split::kTrain, true).size() == 80);
  CHECK(ds.indices(Split::kVal).size() == 10);
  CHECK(ds.indices(Split::kTest).size() == 10);
  CHECK(ds.indices(Split::kTrain).size() == 130);
  for (const auto& s : ds.samples)
    if (!s.labeled()) CHECK(ds.split_assignment.at(s.id) == Split::kTrain);
}

TEST_CASE("split is deterministic and needs 10 labeled samples") {
  const Dataset base = generate_synthetic(37, 5, 2);
  CHECK(split_dataset(base, 4).split_assignment == split_dataset(base, 4).split_assignment);
  CHECK(split_dataset(base, 4).split_assignment != split_dataset(base, 5).split_assignment);
  CHECK_THROWS_AS(split_dataset(generate_synthetic(9, 10, 2), 1), SplitError);
}

TEST_CASE("split fractions stay within one of 8:1:1") {
  for (std::size_t n : {10u, 11u, 19u, 23u, 57u, 101u}) {
    const Dataset ds = split_dataset(generate_synthetic(n, 0, 3), 1);
    const double L = double(n);
    const double train = double(ds.indices(Split::kTrain, true).size());
    CHECK(std::abs(train - std::floor(0.8 * L)) <= 1.0);
    CHECK(std::abs(double(ds.indices(Split::kVal).size()) - L / 10) <= 1.0);
    CHECK(std::abs(double(ds.indices(Split::kTest).size()) - L / 10) <= 1.0);
  }
}

TEST_CASE("test sources do not leak into train or val") {
  Dataset ds = generate_synthetic(60, 0, 4);
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    ds.samples[i].source = "src" + std::to_string(i % 12);
  ds = split_dataset(ds, 3);
  std::set<std::string> test_sources, other_sources;
  for (const auto& s : ds.samples)
    (ds.split_assignment.at(s.id) == Split::kTest ? test_sources : other_sources).insert(*s.source);
  CHECK_FALSE(test_sources.empty());
  for (const auto& s : test_sources) CHECK(other_sources.count(s) == 0);
}

TEST_CASE("synthetic: unlabeled only") {
  const Dataset ds = generate_synthetic(0, 5, 1);
  CHECK(ds.samples.size() == 5);
  for (const auto& s : ds.samples) CHECK_FALSE(s.labeled());
}

TEST_CASE("synthetic: happy share near 58 of 100") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset ds = generate_synthetic(100, 0, seed);
    int happy = 0;
    for (const auto& s : ds.samples)
      if ((*s.label_probs)[0] > 0.25) ++happy;
    CHECK(happy >= 48);
    CHECK(happy <= 68);
  }
}

TEST_CASE("synthetic: same seed gives a byte-identical file") {
  const fs::path a = fs::temp_directory_path() / "gaitemo_test_syn_a.jsonl";
  const fs::path b = fs::temp_directory_path() / "gaitemo_test_syn_b.jsonl";
  save_dataset(generate_synthetic(6, 3, 11), a);
  save_dataset(generate_synthetic(6, 3, 11), b);
  std::ifstream fa(a), fb(b);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {});
  const std::string sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK_FALSE(sa.empty());
}

TEST_CASE("synthetic positions are finite and lengths vary") {
  const Dataset ds = generate_synthetic(20, 0, 8);
  std::set<std::size_t> lengths;
  for (const auto& s : ds.samples) {
    lengths.insert(s.positions.frames());
    for (double v : s.positions.data()) CHECK(std::isfinite(v));
  }
  CHECK(lengths.size() > 1);
}
