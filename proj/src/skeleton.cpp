#include "gaitemo/skeleton.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "gaitemo/errors.hpp"

namespace gaitemo {

namespace {

constexpr std::array<std::string_view, kNumParts> kPartNames = {
    "left_arm", "right_arm", "left_leg", "right_leg", "torso"};

Skeleton build_canonical() {
  using namespace joint;
  Skeleton s;
  s.joint_names = {"root",           "lower_back",     "spine",         "neck",
                   "head",           "left_shoulder",  "left_elbow",    "left_hand",
                   "left_hand_index", "right_shoulder", "right_elbow",   "right_hand",
                   "right_hand_index", "left_hip",      "left_knee",     "left_ankle",
                   "left_toe",       "right_hip",      "right_knee",    "right_ankle",
                   "right_toe"};
  s.parent.assign(kNumJoints, std::nullopt);
  s.parent[kLowerBack] = kRoot;
  s.parent[kSpine] = kLowerBack;
  s.parent[kNeck] = kSpine;
  s.parent[kHead] = kNeck;
  s.parent[kLeftShoulder] = kSpine;
  s.parent[kLeftElbow] = kLeftShoulder;
  s.parent[kLeftHand] = kLeftElbow;
  s.parent[kLeftHandIndex] = kLeftHand;
  s.parent[kRightShoulder] = kSpine;
  s.parent[kRightElbow] = kRightShoulder;
  s.parent[kRightHand] = kRightElbow;
  s.parent[kRightHandIndex] = kRightHand;
  s.parent[kLeftHip] = kRoot;
  s.parent[kLeftKnee] = kLeftHip;
  s.parent[kLeftAnkle] = kLeftKnee;
  s.parent[kLeftToe] = kLeftAnkle;
  s.parent[kRightHip] = kRoot;
  s.parent[kRightKnee] = kRightHip;
  s.parent[kRightAnkle] = kRightKnee;
  s.parent[kRightToe] = kRightAnkle;

  auto& g = s.part_groups;
  g[static_cast<std::size_t>(Part::kLeftArm)] = {kLeftShoulder, kLeftElbow, kLeftHand,
                                                 kLeftHandIndex};
  g[static_cast<std::size_t>(Part::kRightArm)] = {kRightShoulder, kRightElbow, kRightHand,
                                                  kRightHandIndex};
  g[static_cast<std::size_t>(Part::kLeftLeg)] = {kLeftHip, kLeftKnee, kLeftAnkle, kLeftToe};
  g[static_cast<std::size_t>(Part::kRightLeg)] = {kRightHip, kRightKnee, kRightAnkle,
                                                  kRightToe};
  g[static_cast<std::size_t>(Part::kTorso)] = {kRoot, kLowerBack, kSpine, kNeck, kHead};
  s.validate();
  return s;
}

}  // namespace

std::string_view part_name(Part part) { return kPartNames.at(static_cast<std::size_t>(part)); }

std::size_t Skeleton::index_of(std::string_view name) const {
  auto it = std::find(joint_names.begin(), joint_names.end(), name);
  if (it == joint_names.end()) throw MappingError("unknown joint '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - joint_names.begin());
}

Part Skeleton::part_of(std::size_t j) const {
  for (std::size_t p = 0; p < kNumParts; ++p) {
    const auto& members = part_groups[p];
    if (std::find(members.begin(), members.end(), j) != members.end()) return static_cast<Part>(p);
  }
  throw SchemaError("joint " + std::to_string(j) + " is in no part group");
}

std::pair<std::size_t, std::size_t> Skeleton::bone(std::size_t j) const {
  if (parent.at(j)) return {*parent[j], j};
  // Root: first child on the spine, i.e. the first joint whose parent is the
  // root and that belongs to the torso group.
  const auto& torso = part_groups[static_cast<std::size_t>(Part::kTorso)];
  for (std::size_t c : torso)
    if (parent[c] && *parent[c] == j) return {j, c};
  throw SchemaError("root has no spine child");
}

void Skeleton::validate() const {
  const std::size_t n = joint_names.size();
  if (n != kNumJoints) throw SchemaError("skeleton must have 21 joints, got " + std::to_string(n));
  if (parent.size() != n) throw SchemaError("parent list length differs from joint count");

  std::size_t roots = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!parent[j]) {
      ++roots;
      continue;
    }
    if (*parent[j] >= n) throw SchemaError("parent index out of range for " + joint_names[j]);
    // Walking up must terminate within n - 1 steps; otherwise there is a cycle.
    std::size_t cur = j, steps = 0;
    while (parent[cur]) {
      cur = *parent[cur];
      if (++steps > n - 1) throw SchemaError("parent links of " + joint_names[j] + " form a cycle");
    }
  }
  if (roots != 1) throw SchemaError("skeleton must have exactly one root");

  std::vector<int> hits(n, 0);
  for (const auto& members : part_groups)
    for (std::size_t j : members) {
      if (j >= n) throw SchemaError("part group references joint out of range");
      ++hits[j];
    }
  for (std::size_t j = 0; j < n; ++j)
    if (hits[j] != 1)
      throw SchemaError("joint " + joint_names[j] + " appears in " + std::to_string(hits[j]) +
                        " part groups");
}

const Skeleton& canonical_skeleton() {
  static const Skeleton skel = build_canonical();
  return skel;
}

JointMap JointMap::identity(const Skeleton& skel) {
  JointMap m;
  m.source_names = skel.joint_names;
  for (std::size_t j = 0; j < skel.num_joints(); ++j) m.target_index.emplace_back(j);
  return m;
}

std::vector<Vec3> remap_pose(std::span<const Vec3> frame, const JointMap& map) {
  if (frame.size() != map.source_names.size() || map.target_index.size() != frame.size())
    throw MappingError("frame has " + std::to_string(frame.size()) + " joints, map expects " +
                       std::to_string(map.source_names.size()));
  const auto& names = canonical_skeleton().joint_names;
  std::vector<Vec3> out(kNumJoints, Vec3::Zero());
  std::vector<int> hits(kNumJoints, 0);
  for (std::size_t s = 0; s < frame.size(); ++s) {
    const auto& target = map.target_index[s];
    if (!target) continue;
    if (*target >= kNumJoints)
      throw MappingError("source joint '" + map.source_names[s] + "' maps out of range");
    out[*target] = frame[s];
    ++hits[*target];
  }
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    if (hits[j] == 0) throw MappingError("canonical joint '" + names[j] + "' is not mapped");
    if (hits[j] > 1) throw MappingError("canonical joint '" + names[j] + "' is mapped twice");
  }
  return out;
}

void to_json(nlohmann::json& j, const Skeleton& skel) {
  nlohmann::json parents = nlohmann::json::array();
  for (const auto& p : skel.parent)
    parents.push_back(p ? nlohmann::json(skel.joint_names[*p]) : nlohmann::json(nullptr));
  nlohmann::json groups = nlohmann::json::object();
  for (std::size_t p = 0; p < kNumParts; ++p) {
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t m : skel.part_groups[p]) members.push_back(skel.joint_names[m]);
    groups[std::string(kPartNames[p])] = members;
  }
  j = {{"joints", skel.joint_names}, {"parents", parents}, {"part_groups", groups}};
}

void from_json(const nlohmann::json& j, Skeleton& skel) {
  Skeleton s;
  s.joint_names = j.at("joints").get<std::vector<std::string>>();
  const auto& parents = j.at("parents");
  if (parents.size() != s.joint_names.size())
    throw SchemaError("parents list length differs from joint count");
  for (const auto& p : parents)
    s.parent.push_back(p.is_null() ? std::nullopt
                                   : std::optional<std::size_t>(s.index_of(p.get<std::string>())));
  const auto& groups = j.at("part_groups");
  for (std::size_t p = 0; p < kNumParts; ++p) {
    for (const auto& name : groups.at(std::string(kPartNames[p])))
      s.part_groups[p].push_back(s.index_of(name.get<std::string>()));
    std::sort(s.part_groups[p].begin(), s.part_groups[p].end());
  }
  s.validate();
  skel = std::move(s);
}

void to_json(nlohmann::json& j, const JointMap& map) {
  const auto& names = canonical_skeleton().joint_names;
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : map.target_index)
    targets.push_back(t ? nlohmann::json(names.at(*t)) : nlohmann::json("DROP"));
  j = {{"source_names", map.source_names}, {"targets", targets}};
}

void from_json(const nlohmann::json& j, JointMap& map) {
  JointMap m;
  m.source_names = j.at("source_names").get<std::vector<std::string>>();
  const auto& targets = j.at("targets");
  if (targets.size() != m.source_names.size())
    throw SchemaError("targets length differs from source_names length");
  for (const auto& t : targets) {
    const auto name = t.get<std::string>();
    m.target_index.push_back(name == "DROP" ? std::nullopt
                                            : std::optional<std::size_t>(
                                                  canonical_skeleton().index_of(name)));
  }
  map = std::move(m);
}

}  // namespace gaitemo
