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


#ifndef SPARSEPOSE_TENSOR_KINEMATICS_HPP_
#define SPARSEPOSE_TENSOR_KINEMATICS_HPP_

#include <vector>

#include <torch/torch.h>

#include "sparsepose/skeleton.hpp"
#include "sparsepose/types.hpp"

namespace sparsepose {

// Differentiable counterparts of the rotations and skeleton modules over
// batched tensors. Leading dimensions are arbitrary.

// (..., 6) -> (..., 3, 3) by Gram-Schmidt. Column norms are clamped at
// kRot6dDegeneracyEps instead of raising so the map stays total during
// training.
torch::Tensor rot6d_to_matrix(const torch::Tensor& r6);
// (..., 3, 3) -> (..., 6), first two columns.
torch::Tensor matrix_to_rot6d(const torch::Tensor& m);

struct TensorSkeleton {
  std::vector<int> parent;
  torch::Tensor offsets;  // J x 3
  torch::Tensor radii;    // J, bone radius by child joint

  static TensorSkeleton from(const KinematicTree& tree,
                             torch::Dtype dtype = torch::kFloat32);
  int size() const { return static_cast<int>(parent.size()); }
};

struct TensorFk {
  torch::Tensor positions;  // (..., J, 3)
  torch::Tensor rotations;  // (..., J, 3, 3)
};

// pose (..., 6J), translation (..., 3).
TensorFk forward_kinematics(const torch::Tensor& pose,
                            const torch::Tensor& translation,
                            const TensorSkeleton& skel);

// Root translation that puts the FK head joint at head_position.
torch::Tensor head_anchored_translation(const torch::Tensor& pose,
                                        const torch::Tensor& head_position,
                                        const TensorSkeleton& skel);

// World joint positions of pose with the root placed by head anchoring.
torch::Tensor head_anchored_positions(const torch::Tensor& pose,
                                      const torch::Tensor& head_position,
                                      const TensorSkeleton& skel);

// Distance from points (N, 3) to segments a (N, 3) -> b (N, 3).
torch::Tensor point_segment_distance(const torch::Tensor& p,
                                     const torch::Tensor& a,
                                     const torch::Tensor& b);

// Row-major Eigen copy helpers.
torch::Tensor to_tensor(const RowMatrixXd& m, torch::Dtype dtype = torch::kFloat32);
RowMatrixXd to_matrix(const torch::Tensor& t);

}  // namespace sparsepose

#endif  // SPARSEPOSE_TENSOR_KINEMATICS_HPP_
