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


#include "sparsepose/tensor_kinematics.hpp"

#include <cstring>

#include "sparsepose/rotations.hpp"

namespace sparsepose {

using torch::indexing::Slice;

torch::Tensor rot6d_to_matrix(const torch::Tensor& r6) {
  const auto a = r6.index({"...", Slice(0, 3)});
  const auto b = r6.index({"...", Slice(3, 6)});
  const auto c0 = a / a.norm(2, -1, true).clamp_min(kRot6dDegeneracyEps);
  const auto b_perp = b - (c0 * b).sum(-1, true) * c0;
  const auto c1 = b_perp / b_perp.norm(2, -1, true).clamp_min(kRot6dDegeneracyEps);
  const auto c2 = torch::cross(c0, c1, -1);
  return torch::stack({c0, c1, c2}, -1);
}

torch::Tensor matrix_to_rot6d(const torch::Tensor& m) {
  return torch::cat({m.index({"...", Slice(), 0}), m.index({"...", Slice(), 1})}, -1);
}

TensorSkeleton TensorSkeleton::from(const KinematicTree& tree, torch::Dtype dtype) {
  tree.validate();
  TensorSkeleton s;
  s.parent = tree.parent;
  s.offsets = torch::zeros({tree.size(), 3}, torch::kFloat64);
  s.radii = torch::zeros({tree.size()}, torch::kFloat64);
  auto o = s.offsets.accessor<double, 2>();
  auto r = s.radii.accessor<double, 1>();
  for (int j = 0; j < tree.size(); ++j) {
    for (int c = 0; c < 3; ++c) o[j][c] = tree.rest_offset[j][c];
    r[j] = tree.bone_radius[j];
  }
  s.offsets = s.offsets.to(dtype);
  s.radii = s.radii.to(dtype);
  return s;
}

TensorFk forward_kinematics(const torch::Tensor& pose,
                            const torch::Tensor& translation,
                            const TensorSkeleton& skel) {
  const int J = skel.size();
  TORCH_CHECK(pose.size(-1) == 6 * J, "forward_kinematics: pose width ", pose.size(-1),
              " does not match ", J, " joints");
  auto lead = pose.sizes().vec();
  lead.pop_back();
  auto shape = lead;
  shape.push_back(J);
  shape.push_back(6);
  const auto local = rot6d_to_matrix(pose.reshape(shape));  // (..., J, 3, 3)
  const auto offsets = skel.offsets.to(pose.dtype());
  std::vector<torch::Tensor> rot(J), pos(J);
  for (int j = 0; j < J; ++j) {
    const auto lj = local.select(-3, j);
    const int p = skel.parent[j];
    if (p < 0) {
      rot[j] = lj;
      pos[j] = translation;
    } else {
      rot[j] = torch::matmul(rot[p], lj);
      pos[j] = pos[p] + torch::matmul(rot[p], offsets[j]);
    }
  }
  return {torch::stack(pos, -2), torch::stack(rot, -3)};
}

torch::Tensor head_anchored_translation(const torch::Tensor& pose,
                                        const torch::Tensor& head_position,
                                        const TensorSkeleton& skel) {
  const auto zero = torch::zeros_like(head_position);
  const auto fk = forward_kinematics(pose, zero, skel);
  return head_position - fk.positions.select(-2, joints::kHead);
}

torch::Tensor head_anchored_positions(const torch::Tensor& pose,
                                      const torch::Tensor& head_position,
                                      const TensorSkeleton& skel) {
  const auto zero = torch::zeros_like(head_position);
  const auto rel = forward_kinematics(pose, zero, skel).positions;
  const auto shift = head_position - rel.select(-2, joints::kHead);
  return rel + shift.unsqueeze(-2);
}

torch::Tensor point_segment_distance(const torch::Tensor& p, const torch::Tensor& a,
                                     const torch::Tensor& b) {
  const auto ab = b - a;
  const auto len2 = (ab * ab).sum(-1);
  const auto safe = len2.clamp_min(1e-12);
  const auto s = torch::where(len2 > 0, ((p - a) * ab).sum(-1) / safe,
                              torch::zeros_like(len2))
                     .clamp(0.0, 1.0);
  const auto d = p - (a + s.unsqueeze(-1) * ab);
  return (d * d).sum(-1).clamp_min(1e-18).sqrt();
}

torch::Tensor to_tensor(const RowMatrixXd& m, torch::Dtype dtype) {
  auto t = torch::from_blob(const_cast<double*>(m.data()), {m.rows(), m.cols()},
                            torch::kFloat64)
               .clone();
  return t.to(dtype);
}

RowMatrixXd to_matrix(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat64).contiguous().reshape({t.size(0), -1});
  RowMatrixXd m(c.size(0), c.size(1));
  std::memcpy(m.data(), c.data_ptr<double>(), sizeof(double) * m.size());
  return m;
}

}  // namespace sparsepose
