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


#include "sparsepose/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "sparsepose/rotations.hpp"

namespace sparsepose {

int KinematicTree::index_of(std::string_view name) const {
  for (int j = 0; j < size(); ++j) {
    if (names[j] == name) return j;
  }
  return -1;
}

void KinematicTree::validate() const {
  const std::size_t n = parent.size();
  if (n == 0 || names.size() != n || rest_offset.size() != n ||
      bone_radius.size() != n) {
    throw ValidationError("KinematicTree: inconsistent field sizes");
  }
  if (parent[0] != -1) throw ValidationError("KinematicTree: joint 0 must be the root");
  for (std::size_t j = 1; j < n; ++j) {
    if (parent[j] < 0 || parent[j] >= static_cast<int>(j)) {
      throw ValidationError("KinematicTree: joint " + names[j] +
                            " is not topologically ordered");
    }
    if (!(bone_radius[j] > 0.0)) {
      throw ValidationError("KinematicTree: bone radius must be positive");
    }
  }
  for (const auto& o : rest_offset) {
    if (!o.allFinite()) throw ValidationError("KinematicTree: non-finite offset");
  }
}

KinematicTree KinematicTree::default_body() {
  struct Row {
    const char* name;
    int parent;
    double x, y, z;
    double radius;
  };
  // Offsets in meters, parent frame, x left / y up / z forward.
  static constexpr Row kRows[] = {
      {"pelvis", -1, 0.0, 0.0, 0.0, 0.0},
      {"left_hip", 0, 0.07, -0.04, 0.0, 0.05},
      {"right_hip", 0, -0.07, -0.04, 0.0, 0.05},
      {"spine1", 0, 0.0, 0.11, -0.02, 0.045},
      {"left_knee", 1, 0.03, -0.39, 0.01, 0.06},
      {"right_knee", 2, -0.03, -0.39, 0.01, 0.06},
      {"spine2", 3, 0.0, 0.13, 0.02, 0.09},
      {"left_ankle", 4, -0.01, -0.42, -0.03, 0.045},
      {"right_ankle", 5, 0.01, -0.42, -0.03, 0.045},
      {"spine3", 6, 0.0, 0.06, 0.0, 0.10},
      {"left_foot", 7, 0.02, -0.055, 0.12, 0.035},
      {"right_foot", 8, -0.02, -0.055, 0.12, 0.035},
      {"neck", 9, 0.0, 0.21, -0.03, 0.05},
      {"left_collar", 9, 0.07, 0.12, -0.02, 0.05},
      {"right_collar", 9, -0.07, 0.12, -0.02, 0.05},
      {"head", 12, 0.0, 0.09, 0.05, 0.08},
      {"left_shoulder", 13, 0.12, 0.04, -0.01, 0.05},
      {"right_shoulder", 14, -0.12, 0.04, -0.01, 0.05},
      {"left_elbow", 16, 0.26, 0.0, -0.02, 0.045},
      {"right_elbow", 17, -0.26, 0.0, -0.02, 0.045},
      {"left_wrist", 18, 0.25, 0.0, 0.0, 0.035},
      {"right_wrist", 19, -0.25, 0.0, 0.0, 0.035},
  };
  KinematicTree tree;
  for (const auto& r : kRows) {
    tree.names.emplace_back(r.name);
    tree.parent.push_back(r.parent);
    tree.rest_offset.emplace_back(r.x, r.y, r.z);
    tree.bone_radius.push_back(r.radius);
  }
  return tree;
}

KinematicTree KinematicTree::chain(int n, const Vec3& offset, double radius) {
  KinematicTree tree;
  for (int j = 0; j < n; ++j) {
    tree.names.push_back("j" + std::to_string(j));
    tree.parent.push_back(j - 1);
    tree.rest_offset.push_back(j == 0 ? Vec3::Zero() : offset);
    tree.bone_radius.push_back(j == 0 ? 0.0 : radius);
  }
  return tree;
}

nlohmann::json skeleton_to_json(const KinematicTree& tree) {
  nlohmann::json doc;
  doc["format"] = "sparsepose-skeleton";
  doc["version"] = 1;
  auto& arr = doc["joints"] = nlohmann::json::array();
  for (int j = 0; j < tree.size(); ++j) {
    const Vec3& o = tree.rest_offset[j];
    arr.push_back({{"name", tree.names[j]},
                   {"parent", tree.parent[j]},
                   {"offset", {o.x(), o.y(), o.z()}},
                   {"radius", tree.bone_radius[j]}});
  }
  return doc;
}

KinematicTree skeleton_from_json(const nlohmann::json& doc) {
  KinematicTree tree;
  try {
    if (doc.value("format", "") != "sparsepose-skeleton") {
      throw ConfigError("skeleton config: unexpected format tag");
    }
    for (const auto& j : doc.at("joints")) {
      tree.names.push_back(j.at("name").get<std::string>());
      tree.parent.push_back(j.at("parent").get<int>());
      const auto o = j.at("offset").get<std::vector<double>>();
      if (o.size() != 3) throw ConfigError("skeleton config: offset needs 3 values");
      tree.rest_offset.emplace_back(o[0], o[1], o[2]);
      tree.bone_radius.push_back(j.at("radius").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("skeleton config: ") + e.what());
  }
  // Root radius is never used; accept any value there.
  if (!tree.bone_radius.empty()) tree.bone_radius[0] = 0.0;
  try {
    tree.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return tree;
}

KinematicTree load_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open skeleton config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("skeleton config " + path.string() + ": " + e.what());
  }
  return skeleton_from_json(doc);
}

void save_skeleton(const KinematicTree& tree, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write skeleton config " + path.string());
  out << skeleton_to_json(tree).dump(2) << "\n";
}

FramePose forward_kinematics_frame(std::span<const double> pose,
                                   const Vec3& translation,
                                   const KinematicTree& tree) {
  const int n = tree.size();
  if (static_cast<int>(pose.size()) != n * kRot6dDim) {
    throw ShapeError("forward_kinematics: pose has " +
                     std::to_string(pose.size()) + " values, expected " +
                     std::to_string(n * kRot6dDim));
  }
  FramePose out;
  out.positions.resize(n);
  out.rotations.resize(n);
  for (int j = 0; j < n; ++j) {
    const Mat3 local =
        rot6d_to_matrix(Eigen::Map<const Rot6D>(pose.data() + j * kRot6dDim));
    const int p = tree.parent[j];
    if (p < 0) {
      out.rotations[j] = local;
      out.positions[j] = translation;
    } else {
      out.rotations[j] = out.rotations[p] * local;
      out.positions[j] = out.positions[p] + out.rotations[p] * tree.rest_offset[j];
    }
  }
  return out;
}

std::vector<FramePose> forward_kinematics(const Motion& motion,
                                          const KinematicTree& tree) {
  if (motion.translation.rows() != motion.pose.rows() ||
      motion.translation.cols() != 3) {
    throw ShapeError("forward_kinematics: translation must be T x 3");
  }
  std::vector<FramePose> frames;
  frames.reserve(motion.frames());
  for (int t = 0; t < motion.frames(); ++t) {
    frames.push_back(forward_kinematics_frame(
        std::span<const double>(motion.pose.row(t).data(), motion.pose.cols()),
        motion.translation.row(t).transpose(), tree));
  }
  return frames;
}

RowMatrixXd joint_positions(const std::vector<FramePose>& frames) {
  if (frames.empty()) return RowMatrixXd(0, 0);
  const int n = static_cast<int>(frames.front().positions.size());
  RowMatrixXd out(frames.size(), 3 * n);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (int j = 0; j < n; ++j) {
      out.block<1, 3>(t, 3 * j) = frames[t].positions[j].transpose();
    }
  }
  return out;
}

BodyCapsuleSet body_capsules(std::span<const Vec3> positions,
                             const KinematicTree& tree) {
  return body_capsules(positions, tree, tree.bone_radius);
}

BodyCapsuleSet body_capsules(std::span<const Vec3> positions,
                             const KinematicTree& tree,
                             std::span<const double> radii) {
  if (static_cast<int>(positions.size()) != tree.size() ||
      static_cast<int>(radii.size()) != tree.size()) {
    throw ShapeError("body_capsules: expected one position and radius per joint");
  }
  BodyCapsuleSet out;
  out.reserve(tree.size() - 1);
  for (int j = 0; j < tree.size(); ++j) {
    const int p = tree.parent[j];
    if (p < 0) continue;
    out.push_back({positions[p], positions[j], radii[j], j});
  }
  return out;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = 0.0;
  if (len2 > 0.0) s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

double occupancy(const BodyCapsuleSet& capsules, const Vec3& point) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : capsules) {
    const double d = point_segment_distance(point, c.a, c.b);
    best = std::max(best, (c.radius - d) / c.radius);
  }
  return best;
}

}  // namespace sparsepose
