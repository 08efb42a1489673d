// Copyright 2026 The SparsePose Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef SPARSEPOSE_SKELETON_HPP_
#define SPARSEPOSE_SKELETON_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsepose/types.hpp"

namespace sparsepose {

// Joint indices of the 22-joint SMPL-ordered body.
namespace joints {
inline constexpr int kPelvis = 0;
inline constexpr int kLeftHip = 1;
inline constexpr int kRightHip = 2;
inline constexpr int kSpine1 = 3;
inline constexpr int kLeftKnee = 4;
inline constexpr int kRightKnee = 5;
inline constexpr int kSpine2 = 6;
inline constexpr int kLeftAnkle = 7;
inline constexpr int kRightAnkle = 8;
inline constexpr int kSpine3 = 9;
inline constexpr int kLeftFoot = 10;
inline constexpr int kRightFoot = 11;
inline constexpr int kNeck = 12;
inline constexpr int kLeftCollar = 13;
inline constexpr int kRightCollar = 14;
inline constexpr int kHead = 15;
inline constexpr int kLeftShoulder = 16;
inline constexpr int kRightShoulder = 17;
inline constexpr int kLeftElbow = 18;
inline constexpr int kRightElbow = 19;
inline constexpr int kLeftWrist = 20;
inline constexpr int kRightWrist = 21;

inline constexpr int kFeet[4] = {kLeftAnkle, kRightAnkle, kLeftFoot,
                                 kRightFoot};
inline constexpr int kHands[2] = {kLeftWrist, kRightWrist};
}  // namespace joints

// Parent-ordered joint tree. Rest offsets are bone vectors expressed in the
// parent frame (SMPL convention: x left, y up, z forward); the root offset is
// zero and the root carries translation only. bone_radius[j] is the capsule
// radius of the bone parent[j] -> j (unused for the root).
struct KinematicTree {
  std::vector<std::string> names;
  std::vector<int> parent;
  std::vector<Vec3> rest_offset;
  std::vector<double> bone_radius;

  int size() const { return static_cast<int>(parent.size()); }
  int index_of(std::string_view name) const;

  // Throws ValidationError unless there is exactly one root (index 0),
  // parent[j] < j, offsets are finite, and radii are positive.
  void validate() const;

  // The bundled body: SMPL topology, approximately a 1.7 m adult.
  static KinematicTree default_body();
  // A serial chain of `n` joints with the given offset for every bone.
  static KinematicTree chain(int n, const Vec3& offset, double radius = 0.05);
};

// Skeleton configuration file (JSON):
//   {"format": "sparsepose-skeleton", "version": 1,
//    "joints": [{"name": "pelvis", "parent": -1, "offset": [0,0,0],
//                "radius": 0.0}, ...]}
KinematicTree load_skeleton(const std::filesystem::path& path);
void save_skeleton(const KinematicTree& tree, const std::filesystem::path& path);
nlohmann::json skeleton_to_json(const KinematicTree& tree);
KinematicTree skeleton_from_json(const nlohmann::json& doc);

// Per-frame FK result: world joint positions and global joint rotations.
struct FramePose {
  std::vector<Vec3> positions;
  std::vector<Mat3> rotations;
};

// pose is the 6D block vector of one frame (tree.size() * 6 values).
FramePose forward_kinematics_frame(std::span<const double> pose,
                                   const Vec3& translation,
                                   const KinematicTree& tree);

std::vector<FramePose> forward_kinematics(const Motion& motion,
                                          const KinematicTree& tree);

// Flattened positions, T x (3 * J), row t = [x0 y0 z0 x1 ...].
RowMatrixXd joint_positions(const std::vector<FramePose>& frames);

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
  int joint = -1;  // child joint of the bone
};

using BodyCapsuleSet = std::vector<Capsule>;

// One capsule per bone (parent -> child) using tree.bone_radius.
BodyCapsuleSet body_capsules(std::span<const Vec3> positions,
                             const KinematicTree& tree);
// Same, with explicit per-joint bone radii (indexed by child joint).
BodyCapsuleSet body_capsules(std::span<const Vec3> positions,
                             const KinematicTree& tree,
                             std::span<const double> radii);

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

// f = max_c (r_c - dist(p, segment_c)) / r_c. Positive strictly inside.
double occupancy(const BodyCapsuleSet& capsules, const Vec3& point);

}  // namespace sparsepose

#endif  // SPARSEPOSE_SKELETON_HPP_
