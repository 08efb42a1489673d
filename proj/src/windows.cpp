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


#include "sparsepose/windows.hpp"

#include <algorithm>

#include "sparsepose/observations.hpp"
#include "sparsepose/rotations.hpp"
#include "sparsepose/stage1.hpp"
#include "sparsepose/tensor_kinematics.hpp"

namespace sparsepose {

namespace {

Vec3 head_at(const RowMatrixXd& x, int t) {
  return x.block<1, 3>(t, obs::kHead + obs::kPos).transpose();
}

// Foot heights of the history frames whose feet are nearly still, from
// head-anchored FK of the history poses.
std::vector<double> stationary_feet(const SequenceData& seq, const RowMatrixXd& history,
                                    int first_source, const WindowOptions& opt,
                                    const KinematicTree& tree) {
  std::vector<double> out;
  const int foot[2] = {joints::kLeftFoot, joints::kRightFoot};
  std::vector<Vec3> prev;
  for (int t = 0; t < history.rows(); ++t) {
    const int src = first_source + t;
    if (src < 0) continue;
    const Eigen::RowVectorXd row = history.row(t);
    const auto rel =
        forward_kinematics_frame({row.data(), static_cast<std::size_t>(row.size())}, Vec3::Zero(), tree);
    const Vec3 shift = head_at(seq.x, src) - rel.positions[joints::kHead];
    std::vector<Vec3> cur = {rel.positions[foot[0]] + shift, rel.positions[foot[1]] + shift};
    if (!prev.empty()) {
      for (int k = 0; k < 2; ++k) {
        if ((cur[k] - prev[k]).norm() * seq.fps < opt.stationary_speed) out.push_back(cur[k].z());
      }
    }
    prev = std::move(cur);
  }
  return out;
}

torch::Tensor f32(const RowMatrixXd& m) { return to_tensor(m, torch::kFloat32); }

}  // namespace

void WindowOptions::validate() const {
  if (length < 2 || history_shift < 1 || !(crop_radius > 0) || crop_points <= 0 ||
      !(stationary_speed > 0)) {
    throw ConfigError("windows: invalid length, shift, crop or speed");
  }
}

nlohmann::json WindowOptions::to_json() const {
  return {{"length", length},
          {"history_shift", history_shift},
          {"crop", crop == CropShape::kSquare ? "square" : "circle"},
          {"crop_radius", crop_radius},
          {"crop_points", crop_points},
          {"stationary_speed", stationary_speed}};
}

WindowOptions WindowOptions::from_json(const nlohmann::json& j) {
  WindowOptions o;
  o.length = j.value("length", o.length);
  o.history_shift = j.value("history_shift", o.history_shift);
  const auto crop = j.value("crop", std::string("circle"));
  if (crop == "circle") {
    o.crop = CropShape::kCircle;
  } else if (crop == "square") {
    o.crop = CropShape::kSquare;
  } else {
    throw ConfigError("windows: crop must be 'circle' or 'square'");
  }
  o.crop_radius = j.value("crop_radius", o.crop_radius);
  o.crop_points = j.value("crop_points", o.crop_points);
  o.stationary_speed = j.value("stationary_speed", o.stationary_speed);
  o.validate();
  return o;
}

SequenceData prepare_sequence(const LabeledSequence& seq, const KinematicTree& tree,
                              const TrackerNoise& noise) {
  SequenceData d;
  d.name = seq.name;
  d.kind = to_string(seq.kind);
  d.seed = seq.seed;
  d.fps = seq.fps;
  const auto frames = forward_kinematics(seq.motion, tree);
  d.x = extract_sparse(frames, seq.fps);
  if (noise.enabled) add_tracker_noise(d.x, noise, derive_seed(seq.seed, 11, 0));
  d.pose = seq.motion.pose;
  d.positions = joint_positions(frames);
  d.contacts = seq.contacts;
  d.cloud = seq.scene.cloud;
  d.no_ground = remove_ground(d.cloud);
  for (const auto& p : seq.scene.primitives) {
    if (p.kind != PrimitiveKind::kFloor) d.primitives.push_back(p);
  }
  return d;
}

SequenceData stream_sequence(const RowMatrixXd& x, const EnvironmentCloud& cloud,
                             std::uint64_t seed, double fps) {
  if (x.cols() != kObsDim) throw ShapeError("stream: expected T x 36 tracking signal");
  SequenceData d;
  d.name = "stream";
  d.seed = seed;
  d.fps = fps;
  d.x = x;
  d.cloud = cloud;
  d.no_ground = remove_ground(cloud);
  return d;
}

Window build_window(const SequenceData& seq, const RowMatrixXd& history_source, int start,
                    const WindowOptions& opt, const KinematicTree& tree,
                    const EnvEncoderConfig* env_config) {
  const int T = opt.length;
  if (start < 0 || start + T > seq.frames()) {
    throw ValidationError("window [" + std::to_string(start) + ", " +
                          std::to_string(start + T) + ") outside a " +
                          std::to_string(seq.frames()) + "-frame stream");
  }
  Window w;
  w.start = start;
  const Vec3 head0 = head_at(seq.x, start);
  w.offset = Vec3(head0.x(), head0.y(), 0.0);

  RowMatrixXd x = seq.x.middleRows(start, T);
  for (int k = 0; k < kNumTrackers; ++k) {
    x.middleCols<3>(k * kTrackerChannels + obs::kPos).rowwise() -= w.offset.transpose();
  }
  const RowMatrixXd history = history_window(history_source, start, T, opt.history_shift);
  w.x = f32(x);
  w.head = f32(x.middleCols<3>(obs::kHead + obs::kPos));
  w.history = f32(history);
  w.z_ground = seq.cloud.z_ground;

  // Extended stream: head height over local terrain and head up-vector.
  const auto feet = stationary_feet(seq, history, start - opt.history_shift, opt, tree);
  Eigen::VectorXd h(T);
  RowMatrixXd up(T, 3);
  for (int t = 0; t < T; ++t) {
    const Vec3 head = head_at(seq.x, start + t);
    h(t) = relative_head_height(head, terrain_height(seq.cloud, head.head<2>(), feet));
    const Rot6D r6 = seq.x.block<1, 6>(start + t, obs::kHead + obs::kRot).transpose();
    up.row(t) = head_up_vector(rot6d_to_matrix(r6)).transpose();
  }
  w.x_new = f32(build_extended(x, h, up));

  if (env_config) {
    const Vec3 center = head_at(seq.x, start + T / 2);
    const std::uint64_t crop_seed = derive_seed(seq.seed, 7, start);
    auto crop = [&](const EnvironmentCloud& cloud) {
      return opt.crop == CropShape::kSquare
                 ? crop_square(cloud, center.head<2>(), opt.crop_radius, opt.crop_points,
                               crop_seed)
                 : crop_circular(cloud, center.head<2>(), opt.crop_radius, opt.crop_points,
                                 crop_seed);
    };
    const auto full = crop(seq.cloud);
    RowMatrixXd rel = full.points.rowwise() - center.transpose();
    w.env_xyz = f32(rel);
    w.salience = f32(spatial_salience_features(full, center));
    w.geometry = build_env_geometry(rel, *env_config, crop_seed);
    const auto solid = crop(seq.no_ground);
    RowMatrixXd pts = solid.points.rowwise() - w.offset.transpose();
    w.collision_points = f32(pts);
    w.collision_valid = solid.synthesized ? 0.0 : 1.0;
  }

  if (seq.has_targets()) {
    w.pose_gt = f32(seq.pose.middleRows(start, T));
    RowMatrixXd pos = seq.positions.middleRows(start, T);
    for (int j = 0; j < kNumJoints; ++j) pos.middleCols<3>(3 * j).rowwise() -= w.offset.transpose();
    w.positions_gt = f32(pos).view({T, kNumJoints, 3});
    auto c = torch::empty({T, kNumJoints}, torch::kFloat32);
    auto a = c.accessor<float, 2>();
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < kNumJoints; ++j) a[t][j] = seq.contacts(start + t, j) ? 1.0f : 0.0f;
    }
    w.contacts_gt = c;
  }
  return w;
}

WindowBatch collate(const std::vector<const Window*>& windows) {
  if (windows.empty()) throw ShapeError("collate: empty batch");
  auto stack = [&](torch::Tensor Window::*field) {
    if (!(windows[0]->*field).defined()) return torch::Tensor();
    std::vector<torch::Tensor> parts;
    parts.reserve(windows.size());
    for (const auto* w : windows) parts.push_back(w->*field);
    return torch::stack(parts);
  };
  WindowBatch b;
  b.x = stack(&Window::x);
  b.x_new = stack(&Window::x_new);
  b.head = stack(&Window::head);
  b.history = stack(&Window::history);
  b.pose_gt = stack(&Window::pose_gt);
  b.positions_gt = stack(&Window::positions_gt);
  b.contacts_gt = stack(&Window::contacts_gt);
  std::vector<double> zg, valid;
  for (const auto* w : windows) {
    zg.push_back(w->z_ground);
    valid.push_back(w->collision_valid);
  }
  b.z_ground = torch::tensor(zg, torch::kFloat32).unsqueeze(1);
  if (windows[0]->env_xyz.defined()) {
    std::vector<torch::Tensor> xyz;
    std::vector<EnvGeometry> geometry;
    for (const auto* w : windows) {
      xyz.push_back(w->env_xyz);
      geometry.push_back(w->geometry);
    }
    b.env = stack_env(xyz, geometry);
    b.salience = stack(&Window::salience);
    b.collision_points = stack(&Window::collision_points);
    b.collision_valid = torch::tensor(valid, torch::kFloat32);
  }
  return b;
}

}  // namespace sparsepose
