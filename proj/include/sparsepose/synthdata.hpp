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


#ifndef SPARSEPOSE_SYNTHDATA_HPP_
#define SPARSEPOSE_SYNTHDATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsepose/environment.hpp"
#include "sparsepose/skeleton.hpp"
#include "sparsepose/types.hpp"

namespace sparsepose {

// Distance below which a joint counts as touching a surface.
inline constexpr double kContactThreshold = 0.05;
// Maximum tolerated joint penetration into a primitive for generated motion.
inline constexpr double kMaxPenetration = 0.01;

enum class PrimitiveKind { kFloor, kBox, kWall };

// Axis-aligned solid box. The floor is a thin slab whose top face is the
// ground plane.
struct ScenePrimitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();

  Vec3 min_corner() const { return center - half_extents; }
  Vec3 max_corner() const { return center + half_extents; }
  double top() const { return center.z() + half_extents.z(); }
};

// Negative inside.
double signed_distance(const ScenePrimitive& prim, const Vec3& p);
// Distance to the nearest primitive surface (|signed distance| minimized).
double surface_distance(const std::vector<ScenePrimitive>& prims, const Vec3& p);

struct SceneSpec {
  double room_half = 2.5;
  double z_ground = 0.0;
  int min_boxes = 0;
  int max_boxes = 2;
  int min_walls = 0;
  int max_walls = 1;
  double box_top_min = 0.40;
  double box_top_max = 0.47;
  double box_half_min = 0.22;
  double box_half_max = 0.35;
  double wall_height = 2.0;
  double wall_half_thickness = 0.05;
  double wall_half_length_min = 0.8;
  double wall_half_length_max = 1.5;
  double density = 550.0;  // surface samples per m^2
  int max_retries = 200;
};

struct Scene {
  std::vector<ScenePrimitive> primitives;
  EnvironmentCloud cloud;
  double z_ground = 0.0;
};

// Non-overlapping boxes and walls on a floor, surface-sampled into a cloud
// whose ground mask marks |z - z_ground| <= kGroundBand. Deterministic in
// seed; throws ValidationError if placement fails after max_retries.
Scene generate_scene(std::uint64_t seed, const SceneSpec& spec);

enum class MotionKind { kWalk, kSquat, kSitOnBox, kReachWall };

std::string to_string(MotionKind kind);
MotionKind motion_kind_from_string(const std::string& s);

struct LabeledSequence {
  std::string name;
  MotionKind kind = MotionKind::kWalk;
  std::uint64_t seed = 0;
  double fps = kDefaultFps;
  Motion motion;
  ContactMatrix contacts;  // T x 22
  Scene scene;
};

// Keyframed joint-angle motion with smooth easing at 30 fps. Values are
// rounded to float32 before contacts are labeled, so a float32 round trip
// reproduces the sequence exactly. Throws ValidationError when the scene
// lacks the prop the motion needs (a box for kSitOnBox, a wall for
// kReachWall) or when no collision-free placement is found.
LabeledSequence generate_motion(std::uint64_t seed, const Scene& scene,
                                MotionKind kind, const KinematicTree& tree);

// contact[t][j] = 1 iff the joint is within tau of some primitive surface.
ContactMatrix label_contacts(const std::vector<FramePose>& frames,
                             const std::vector<ScenePrimitive>& prims,
                             double tau = kContactThreshold);

// Deepest joint penetration (m, >= 0) over all frames and primitives.
double max_joint_penetration(const std::vector<FramePose>& frames,
                             const std::vector<ScenePrimitive>& prims);

// Optional additive Gaussian tracker noise on a T x 36 stream. Rotations
// are perturbed by a random small-angle rotation and re-encoded.
struct TrackerNoise {
  bool enabled = false;
  double sigma_pos = 0.005;
  double sigma_rot_deg = 0.5;
};
void add_tracker_noise(RowMatrixXd& x, const TrackerNoise& noise,
                       std::uint64_t seed);

struct DatasetSpec {
  SceneSpec scene;
  // Relative frequency of each motion kind (walk, squat, sit, reach).
  std::vector<double> kind_weights = {1.0, 1.0, 1.0, 1.0};
};

// Layout:
//   <out>/manifest.json, <out>/skeleton.json
//   <out>/{train,test}/seq_NNNN/{pose.npy, translation.npy, contacts.npy,
//                                scene.json, cloud.spc}
// Train and test sequences draw seeds from disjoint streams.
void make_dataset(int n_train, int n_test, std::uint64_t seed,
                  const std::filesystem::path& out, const DatasetSpec& spec,
                  const KinematicTree& tree);

struct Dataset {
  nlohmann::json manifest;
  KinematicTree tree;
  std::vector<LabeledSequence> train;
  std::vector<LabeledSequence> test;

  const std::vector<LabeledSequence>& split(const std::string& name) const;
};

Dataset load_dataset(const std::filesystem::path& root);

void save_sequence(const LabeledSequence& seq, const std::filesystem::path& dir);
LabeledSequence load_sequence(const std::filesystem::path& dir);

nlohmann::json primitives_to_json(const std::vector<ScenePrimitive>& prims);
std::vector<ScenePrimitive> primitives_from_json(const nlohmann::json& j);

// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

// Seed for item `index` of stream `stream` derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index);

}  // namespace sparsepose

#endif  // SPARSEPOSE_SYNTHDATA_HPP_
