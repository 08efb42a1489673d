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


#ifndef SPARSEPOSE_OBJECTIVES_HPP_
#define SPARSEPOSE_OBJECTIVES_HPP_

#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "sparsepose/tensor_kinematics.hpp"

namespace sparsepose {

// Batched conventions: poses (B, T, 132), positions (B, T, J, 3), contacts
// (B, T, J) in {0, 1}. Unbatched inputs (no leading B) are accepted too.
// Norm terms are taken per window and averaged over the batch.

struct LossWeights {
  double posi = 2.0;
  double hand = 1.0;
  double foot_contact = 0.75;
  double contact = 0.75;
  double foot_height = 0.75;
  double ground = 1.0;
  double collision = 0.1;
  double motion = 1.0;        // first-stage motion term
  double uncertainty = 0.001; // first-stage uncertainty term
  // Apply the foot-height term to every frame instead of contact frames.
  bool foot_height_all_frames = false;

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

// Euclidean norm of the whole-window pose difference.
torch::Tensor final_motion_loss(const torch::Tensor& final_pose, const torch::Tensor& target_pose);

// Soft penetration of crop points into the body capsules. points (B, P, 3)
// must exclude ground points; valid (B) zeroes crops that hold no real
// points. Mean over frames and batch of sum_i sigmoid(f_i) [f_i > 0] / P.
torch::Tensor collision_loss(const torch::Tensor& positions, const torch::Tensor& points,
                             const TensorSkeleton& skel,
                             const torch::Tensor& valid = torch::Tensor());

struct FootLosses {
  torch::Tensor contact;  // foot position error on contact frames
  torch::Tensor height;   // foot height above ground on contact frames
  torch::Tensor ground;   // lowest joint below ground
};

// z_ground broadcasts to (B, T).
FootLosses foot_losses(const torch::Tensor& positions, const torch::Tensor& positions_gt,
                       const torch::Tensor& contacts_gt, const torch::Tensor& z_ground,
                       bool height_all_frames = false);

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
torch::Tensor contact_loss(const torch::Tensor& c_hat, const torch::Tensor& c_gt);

struct PositionLosses {
  torch::Tensor all;    // L2 over all joints
  torch::Tensor hands;  // L1 over both wrists
};
PositionLosses position_losses(const torch::Tensor& positions,
                               const torch::Tensor& positions_gt);

// Scalar terms of the second-stage objective. Undefined terms count as 0.
struct LossTerms {
  torch::Tensor stage1;  // weighted first-stage loss
  torch::Tensor final_motion;
  torch::Tensor posi;
  torch::Tensor hand;
  torch::Tensor foot_contact;
  torch::Tensor contact;
  torch::Tensor foot_height;
  torch::Tensor ground;
  torch::Tensor collision;
};

struct LossReport {
  LossTerms terms;
  torch::Tensor total;

  std::map<std::string, double> values() const;
  nlohmann::json to_json() const;
};

// Throws NumericError when a term is not finite.
LossReport total_stage2(const LossTerms& terms, const LossWeights& weights);

}  // namespace sparsepose

#endif  // SPARSEPOSE_OBJECTIVES_HPP_
