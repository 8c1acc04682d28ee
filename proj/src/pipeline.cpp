#include "gaitemo/pipeline.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "gaitemo/affective.hpp"
#include "gaitemo/errors.hpp"
#include "gaitemo/losses.hpp"
#include "gaitemo/rotation.hpp"

namespace gaitemo {

namespace {

Eigen::MatrixXd rotation_rows(const RotationTensor& r) {
  const auto J = static_cast<Eigen::Index>(r.joints());
  const auto T = static_cast<Eigen::Index>(r.frames());
  Eigen::MatrixXd out(T, 4 * J);
  const auto vals = r.values();
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index k = 0; k < 4 * J; ++k) out(t, k) = vals[static_cast<std::size_t>(t * 4 * J + k)];
  return out;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw SchemaError("cache: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace

PreparedSample prepare_sample(const GaitSample& sample, const Skeleton& skel) {
  const PoseSequence clip = preprocess_temporal(sample);
  PreparedSample p;
  p.id = sample.id;
  p.rotations = rotation_rows(extract_rotations(clip, skel));
  p.euler = euler_array(p.rotations);
  p.affective = extract_affective(clip, skel).transpose();
  if (sample.label_probs) p.label = to_multihot(*sample.label_probs);
  return p;
}

std::vector<PreparedSample> prepare_samples(const Dataset& ds,
                                            const std::vector<std::size_t>& indices) {
  std::vector<PreparedSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(prepare_sample(ds.samples.at(i)));
  return out;
}

void save_cache(const std::vector<PreparedSample>& samples, const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& s : samples)
    doc[s.id] = {{"rotations", matrix_json(s.rotations)}, {"affective", matrix_json(s.affective)}};
  std::ofstream os(path);
  if (!os) throw IOError("cannot write cache " + path.string());
  os << doc.dump() << '\n';
  if (!os) throw IOError("failed writing cache " + path.string());
}

std::size_t load_cache(std::vector<PreparedSample>& samples, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot open cache " + path.string());
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("cache: ") + e.what(), 1);
  }
  std::size_t found = 0;
  for (auto& s : samples) {
    const auto it = doc.find(s.id);
    if (it == doc.end()) continue;
    s.rotations = json_matrix(it->at("rotations"));
    s.affective = json_matrix(it->at("affective"));
    s.euler = euler_array(s.rotations);
    ++found;
  }
  return found;
}

}  // namespace gaitemo
