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


#include "sparsepose/objectives.hpp"

#include <cmath>

#include "sparsepose/skeleton.hpp"

namespace sparsepose {

namespace {

torch::Tensor batched(const torch::Tensor& t, int64_t unbatched_dim) {
  return t.dim() == unbatched_dim ? t.unsqueeze(0) : t;
}

void same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.defined() || !b.defined() || a.sizes() != b.sizes()) {
    throw ShapeError(std::string(what) + ": shape mismatch");
  }
}

torch::Tensor window_l2(const torch::Tensor& diff) {
  return diff.flatten(1).norm(2, 1).mean();
}

torch::Tensor index_list(const int* idx, int n) {
  return torch::tensor(std::vector<int64_t>(idx, idx + n), torch::kInt64);
}

double scalar(const torch::Tensor& t) {
  return t.defined() ? t.detach().to(torch::kFloat64).item<double>() : 0.0;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {posi, hand, foot_contact, contact, foot_height, ground, collision, motion,
                   uncertainty}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be >= 0");
  }
}

nlohmann::json LossWeights::to_json() const {
  return {{"posi", posi},
          {"hand", hand},
          {"foot_contact", foot_contact},
          {"contact", contact},
          {"foot_height", foot_height},
          {"ground", ground},
          {"collision", collision},
          {"motion", motion},
          {"uncertainty", uncertainty},
          {"foot_height_all_frames", foot_height_all_frames}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.posi = j.value("posi", w.posi);
  w.hand = j.value("hand", w.hand);
  w.foot_contact = j.value("foot_contact", w.foot_contact);
  w.contact = j.value("contact", w.contact);
  w.foot_height = j.value("foot_height", w.foot_height);
  w.ground = j.value("ground", w.ground);
  w.collision = j.value("collision", w.collision);
  w.motion = j.value("motion", w.motion);
  w.uncertainty = j.value("uncertainty", w.uncertainty);
  w.foot_height_all_frames = j.value("foot_height_all_frames", w.foot_height_all_frames);
  w.validate();
  return w;
}

torch::Tensor final_motion_loss(const torch::Tensor& final_pose, const torch::Tensor& target_pose) {
  same_shape(final_pose, target_pose, "final_motion_loss");
  return window_l2(batched(final_pose, 2) - batched(target_pose, 2));
}

torch::Tensor collision_loss(const torch::Tensor& positions, const torch::Tensor& points,
                             const TensorSkeleton& skel, const torch::Tensor& valid) {
  const auto pos = batched(positions, 3);  // (B, T, J, 3)
  const auto pts = batched(points, 2);     // (B, P, 3)
  if (pos.dim() != 4 || pos.size(2) != skel.size() || pts.dim() != 3 ||
      pts.size(0) != pos.size(0)) {
    throw ShapeError("collision_loss: expected (B, T, J, 3) joints and (B, P, 3) points");
  }
  const auto B = pos.size(0), T = pos.size(1), P = pts.size(1);
  if (P == 0) return pos.sum() * 0.0;

  std::vector<int64_t> parent, child;
  for (int j = 0; j < skel.size(); ++j) {
    if (skel.parent[j] < 0) continue;
    parent.push_back(skel.parent[j]);
    child.push_back(j);
  }
  const auto pi = torch::tensor(parent, torch::kInt64);
  const auto ci = torch::tensor(child, torch::kInt64);
  const auto radii = skel.radii.to(pos.dtype()).index_select(0, ci);  // (C)
  const auto a = pos.index_select(2, pi);                             // (B, T, C, 3)
  const auto b = pos.index_select(2, ci);
  const auto pts_c = pts.to(pos.dtype());

  auto occupancy = [&](const torch::Tensor& p, const torch::Tensor& a_, const torch::Tensor& b_,
                       const torch::Tensor& r) {
    return (r - point_segment_distance(p, a_, b_)) / r;
  };

  // Locate penetrating (b, t, point) triples and their deepest capsule.
  std::vector<torch::Tensor> hits;
  {
    torch::NoGradGuard guard;
    for (int64_t bi = 0; bi < B; ++bi) {
      if (valid.defined() && valid[bi].item<double>() == 0.0) continue;
      const auto p = pts_c[bi].view({1, P, 1, 3});
      const auto f = occupancy(p, a[bi].unsqueeze(1), b[bi].unsqueeze(1), radii);  // (T,P,C)
      const auto [fmax, arg] = f.max(-1);
      const auto idx = torch::nonzero(fmax > 0);  // (n, 2): t, p
      if (idx.size(0) == 0) continue;
      const auto cap = arg.index({idx.select(1, 0), idx.select(1, 1)});
      hits.push_back(torch::cat({torch::full({idx.size(0), 1}, bi, torch::kInt64), idx,
                                 cap.unsqueeze(1)},
                                1));
    }
  }
  if (hits.empty()) return pos.sum() * 0.0;
  const auto h = torch::cat(hits, 0);
  const auto hb = h.select(1, 0), ht = h.select(1, 1), hp = h.select(1, 2), hc = h.select(1, 3);
  const auto f = occupancy(pts_c.index({hb, hp}), a.index({hb, ht, hc}), b.index({hb, ht, hc}),
                           radii.index_select(0, hc));
  return torch::sigmoid(f).sum() / static_cast<double>(P * T * B);
}

FootLosses foot_losses(const torch::Tensor& positions, const torch::Tensor& positions_gt,
                       const torch::Tensor& contacts_gt, const torch::Tensor& z_ground,
                       bool height_all_frames) {
  same_shape(positions, positions_gt, "foot_losses");
  const auto pos = batched(positions, 3);
  const auto gt = batched(positions_gt, 3);
  const auto c = batched(contacts_gt, 2).to(pos.dtype());
  if (pos.dim() != 4 || c.sizes() != pos.sizes().slice(0, 3)) {
    throw ShapeError("foot_losses: contacts must be (B, T, J)");
  }
  const auto B = pos.size(0), T = pos.size(1);
  const auto zg = z_ground.to(pos.dtype()).expand({B, T});
  const auto feet = index_list(joints::kFeet, 4);
  const auto pf = pos.index_select(2, feet);  // (B, T, 4, 3)
  const auto gf = gt.index_select(2, feet);
  const auto cf = c.index_select(2, feet);  // (B, T, 4)
  const auto count = cf.sum({1, 2}).clamp_min(1.0);

  FootLosses out;
  out.contact = ((pf - gf).abs() * cf.unsqueeze(-1)).sum({1, 2, 3}).div(count).mean();
  const auto height = (pf.select(-1, 2) - zg.unsqueeze(-1)).abs();
  if (height_all_frames) {
    out.height = height.sum({1, 2}).div(static_cast<double>(T * 4)).mean();
  } else {
    out.height = (height * cf).sum({1, 2}).div(count).mean();
  }
  const auto zmin = std::get<0>(pos.select(-1, 2).min(-1));  // (B, T)
  const auto below = (zmin < zg).to(pos.dtype());
  out.ground = ((zmin - zg).abs() * below).sum(1).div(static_cast<double>(T)).mean();
  return out;
}

torch::Tensor contact_loss(const torch::Tensor& c_hat, const torch::Tensor& c_gt) {
  same_shape(c_hat, c_gt, "contact_loss");
  const auto p = c_hat.clamp(1e-7, 1.0 - 1e-7);
  const auto y = c_gt.to(p.dtype());
  return -(y * p.log() + (1.0 - y) * (1.0 - p).log()).mean();
}

PositionLosses position_losses(const torch::Tensor& positions,
                               const torch::Tensor& positions_gt) {
  same_shape(positions, positions_gt, "position_losses");
  const auto diff = batched(positions, 3) - batched(positions_gt, 3);
  PositionLosses out;
  out.all = window_l2(diff);
  out.hands = diff.index_select(2, index_list(joints::kHands, 2)).abs().sum({1, 2, 3}).mean();
  return out;
}

std::map<std::string, double> LossReport::values() const {
  return {{"stage1", scalar(terms.stage1)},
          {"final_motion", scalar(terms.final_motion)},
          {"posi", scalar(terms.posi)},
          {"hand", scalar(terms.hand)},
          {"foot_contact", scalar(terms.foot_contact)},
          {"contact", scalar(terms.contact)},
          {"foot_height", scalar(terms.foot_height)},
          {"ground", scalar(terms.ground)},
          {"collision", scalar(terms.collision)},
          {"total", scalar(total)}};
}

nlohmann::json LossReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values()) j[k] = v;
  return j;
}

LossReport total_stage2(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  const std::pair<const torch::Tensor*, double> weighted[] = {
      {&terms.stage1, 1.0},
      {&terms.final_motion, 1.0},
      {&terms.posi, weights.posi},
      {&terms.hand, weights.hand},
      {&terms.foot_contact, weights.foot_contact},
      {&terms.contact, weights.contact},
      {&terms.foot_height, weights.foot_height},
      {&terms.ground, weights.ground},
      {&terms.collision, weights.collision},
  };
  LossReport report;
  report.terms = terms;
  torch::Tensor total;
  for (const auto& [term, w] : weighted) {
    if (!term->defined()) continue;
    if (term->numel() != 1) throw ShapeError("total_stage2: terms must be scalars");
    if (!std::isfinite(scalar(*term))) throw NumericError("total_stage2: non-finite term");
    const auto part = *term * w;
    total = total.defined() ? total + part : part;
  }
  report.total = total.defined() ? total : torch::zeros({});
  return report;
}

}  // namespace sparsepose
