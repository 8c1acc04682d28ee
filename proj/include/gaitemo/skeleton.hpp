#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace gaitemo {

using Vec3 = Eigen::Vector3d;

inline constexpr std::size_t kNumJoints = 21;
inline constexpr std::size_t kNumParts = 5;

// Canonical joint indices. The numbering is our own stand-in for the ELMD
// layout; see docs/skeleton.md.
namespace joint {
enum : std::size_t {
  kRoot = 0,
  kLowerBack,
  kSpine,
  kNeck,
  kHead,
  kLeftShoulder,
  kLeftElbow,
  kLeftHand,
  kLeftHandIndex,
  kRightShoulder,
  kRightElbow,
  kRightHand,
  kRightHandIndex,
  kLeftHip,
  kLeftKnee,
  kLeftAnkle,
  kLeftToe,
  kRightHip,
  kRightKnee,
  kRightAnkle,
  kRightToe,
};
}  // namespace joint

enum class Part : std::size_t { kLeftArm = 0, kRightArm, kLeftLeg, kRightLeg, kTorso };

std::string_view part_name(Part part);

struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<std::optional<std::size_t>> parent;
  // Indexed by Part; member lists are sorted by joint index.
  std::array<std::vector<std::size_t>, kNumParts> part_groups;

  std::size_t num_joints() const { return joint_names.size(); }
  std::size_t index_of(std::string_view name) const;
  Part part_of(std::size_t joint) const;

  // Endpoints of the bone that carries joint j's rotation: (from, to).
  // Non-root joints use parent -> joint; the root uses root -> its spine child.
  std::pair<std::size_t, std::size_t> bone(std::size_t joint) const;

  // Throws SchemaError if the tree or the partition invariants do not hold.
  void validate() const;
};

const Skeleton& canonical_skeleton();

struct JointMap {
  std::vector<std::string> source_names;
  // Same length as source_names; nullopt means the source joint is dropped.
  std::vector<std::optional<std::size_t>> target_index;

  // Identity mapping over the canonical joint names.
  static JointMap identity(const Skeleton& skel = canonical_skeleton());
};

// Reorders one frame of source joints into canonical order.
std::vector<Vec3> remap_pose(std::span<const Vec3> frame, const JointMap& map);

void to_json(nlohmann::json& j, const Skeleton& skel);
void from_json(const nlohmann::json& j, Skeleton& skel);
void to_json(nlohmann::json& j, const JointMap& map);
void from_json(const nlohmann::json& j, JointMap& map);

}  // namespace gaitemo
