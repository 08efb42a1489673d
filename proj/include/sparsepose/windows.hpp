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


#ifndef SPARSEPOSE_WINDOWS_HPP_
#define SPARSEPOSE_WINDOWS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "sparsepose/environment.hpp"
#include "sparsepose/skeleton.hpp"
#include "sparsepose/stage2.hpp"
#include "sparsepose/synthdata.hpp"
#include "sparsepose/types.hpp"

namespace sparsepose {

enum class CropShape { kCircle, kSquare };

struct WindowOptions {
  int length = kWindow;
  int history_shift = kWindow;  // history row t is source row start + t - shift
  CropShape crop = CropShape::kCircle;
  double crop_radius = 1.0;  // half side for squares
  int crop_points = kCropPoints;
  double stationary_speed = 0.2;  // m/s, feet slower than this anchor terrain

  void validate() const;
  nlohmann::json to_json() const;
  static WindowOptions from_json(const nlohmann::json& j);
};

// One tracking stream with its environment, plus targets when known.
struct SequenceData {
  std::string name;
  std::string kind;
  std::uint64_t seed = 0;
  double fps = kDefaultFps;
  RowMatrixXd x;          // T x 36, world frame
  RowMatrixXd pose;       // T x 132 ground truth, empty at inference
  RowMatrixXd positions;  // T x 66 ground truth, empty at inference
  ContactMatrix contacts;
  EnvironmentCloud cloud;
  EnvironmentCloud no_ground;
  std::vector<ScenePrimitive> primitives;

  int frames() const { return static_cast<int>(x.rows()); }
  bool has_targets() const { return pose.rows() == x.rows() && x.rows() > 0; }
};

SequenceData prepare_sequence(const LabeledSequence& seq, const KinematicTree& tree,
                              const TrackerNoise& noise = {});
SequenceData stream_sequence(const RowMatrixXd& x, const EnvironmentCloud& cloud,
                             std::uint64_t seed = 0, double fps = kDefaultFps);

// A window in its canonical frame: world coordinates shifted by `offset`,
// the first-frame head position projected to the ground plane.
struct Window {
  int start = 0;
  Vec3 offset = Vec3::Zero();
  torch::Tensor x;        // (T, 36)
  torch::Tensor x_new;    // (T, 40)
  torch::Tensor head;     // (T, 3) head tracker position
  torch::Tensor history;  // (T, 132)
  // Environment; undefined when built without it.
  torch::Tensor env_xyz;           // (P, 3) relative to the human center
  torch::Tensor salience;          // (P, 4)
  EnvGeometry geometry;
  torch::Tensor collision_points;  // (P, 3) ground removed, canonical frame
  double collision_valid = 0.0;
  double z_ground = 0.0;
  // Targets; undefined without ground truth.
  torch::Tensor pose_gt;       // (T, 132)
  torch::Tensor positions_gt;  // (T, 22, 3)
  torch::Tensor contacts_gt;   // (T, 22)
};

// history_source supplies past poses (ground truth for teacher forcing,
// predictions at inference); rows needed by the window must exist.
// env_config == nullptr skips the environment part.
Window build_window(const SequenceData& seq, const RowMatrixXd& history_source, int start,
                    const WindowOptions& options, const KinematicTree& tree,
                    const EnvEncoderConfig* env_config);

struct WindowBatch {
  torch::Tensor x, x_new, head, history;
  EnvBatch env;
  torch::Tensor salience;
  torch::Tensor collision_points, collision_valid, z_ground;
  torch::Tensor pose_gt, positions_gt, contacts_gt;

  int64_t size() const { return x.size(0); }
};

WindowBatch collate(const std::vector<const Window*>& windows);

}  // namespace sparsepose

#endif  // SPARSEPOSE_WINDOWS_HPP_
