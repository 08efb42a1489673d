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


#include "sparsepose/stage2.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace sparsepose {

namespace nn = torch::nn;

namespace {

std::string kind_name(EnvEncoderKind k) {
  return k == EnvEncoderKind::kFlat ? "flat" : "hierarchical";
}

nn::Sequential mlp(std::initializer_list<int> widths, bool final_relu) {
  nn::Sequential seq;
  const std::vector<int> w(widths);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    seq->push_back(nn::Linear(w[i], w[i + 1]));
    if (i + 2 < w.size() || final_relu) seq->push_back(nn::ReLU());
  }
  return seq;
}

// feat (B, N, C), idx (B, ...) -> (B, ..., C).
torch::Tensor gather_rows(const torch::Tensor& feat, const torch::Tensor& idx) {
  const auto B = feat.size(0), N = feat.size(1), C = feat.size(2);
  std::vector<int64_t> view(idx.dim(), 1);
  view[0] = B;
  const auto offsets = torch::arange(B, idx.options()).view(view) * N;
  const auto rows = feat.reshape({B * N, C}).index_select(0, (idx + offsets).reshape(-1));
  auto shape = idx.sizes().vec();
  shape.push_back(C);
  return rows.view(shape);
}

torch::Tensor index_tensor(const std::vector<std::vector<int>>& rows) {
  const int64_t n = rows.size(), k = n ? rows[0].size() : 0;
  auto t = torch::empty({n, k}, torch::kInt64);
  auto a = t.accessor<int64_t, 2>();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < k; ++j) a[i][j] = rows[i][j];
  }
  return t;
}

torch::Tensor index_tensor(const std::vector<int>& v) {
  auto t = torch::empty({static_cast<int64_t>(v.size())}, torch::kInt64);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

RowMatrixXd select_rows(const RowMatrixXd& m, const std::vector<int>& idx) {
  RowMatrixXd out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

// Three nearest sources per target with normalized inverse-distance weights.
void three_nn(const RowMatrixXd& targets, const RowMatrixXd& sources, torch::Tensor& index,
              torch::Tensor& weight) {
  const int n = targets.rows(), m = sources.rows();
  const int k = std::min(3, m);
  index = torch::zeros({n, 3}, torch::kInt64);
  weight = torch::zeros({n, 3}, torch::kFloat32);
  auto ia = index.accessor<int64_t, 2>();
  auto wa = weight.accessor<float, 2>();
  std::vector<std::pair<double, int>> d(m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) d[j] = {(targets.row(i) - sources.row(j)).squaredNorm(), j};
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    double total = 0.0;
    std::array<double, 3> w{};
    for (int c = 0; c < k; ++c) {
      w[c] = 1.0 / (std::sqrt(d[c].first) + 1e-8);
      total += w[c];
    }
    for (int c = 0; c < 3; ++c) {
      ia[i][c] = d[std::min(c, k - 1)].second;
      wa[i][c] = c < k ? static_cast<float>(w[c] / total) : 0.0f;
    }
  }
}

}  // namespace

nlohmann::json EnvEncoderConfig::to_json() const {
  return {{"kind", kind_name(kind)},           {"hidden", hidden},
          {"sa1_centers", sa1_centers},        {"sa1_neighbors", sa1_neighbors},
          {"sa1_radius", sa1_radius},          {"sa2_centers", sa2_centers},
          {"sa2_neighbors", sa2_neighbors},    {"sa2_radius", sa2_radius}};
}

EnvEncoderConfig EnvEncoderConfig::from_json(const nlohmann::json& j) {
  EnvEncoderConfig c;
  const auto kind = j.value("kind", kind_name(c.kind));
  if (kind == "flat") {
    c.kind = EnvEncoderKind::kFlat;
  } else if (kind == "hierarchical") {
    c.kind = EnvEncoderKind::kHierarchical;
  } else {
    throw ConfigError("encoder kind must be 'hierarchical' or 'flat'");
  }
  c.hidden = j.value("hidden", c.hidden);
  c.sa1_centers = j.value("sa1_centers", c.sa1_centers);
  c.sa1_neighbors = j.value("sa1_neighbors", c.sa1_neighbors);
  c.sa1_radius = j.value("sa1_radius", c.sa1_radius);
  c.sa2_centers = j.value("sa2_centers", c.sa2_centers);
  c.sa2_neighbors = j.value("sa2_neighbors", c.sa2_neighbors);
  c.sa2_radius = j.value("sa2_radius", c.sa2_radius);
  if (c.hidden <= 0 || c.sa1_centers <= 0 || c.sa2_centers <= 0 || c.sa1_neighbors <= 0 ||
      c.sa2_neighbors <= 0 || c.sa2_centers > c.sa1_centers || !(c.sa1_radius > 0) ||
      !(c.sa2_radius > 0)) {
    throw ConfigError("encoder: invalid sizes");
  }
  return c;
}

std::vector<int> farthest_point_sample(const RowMatrixXd& points, int m, int start) {
  const int n = points.rows();
  if (n == 0 || m <= 0) throw ShapeError("farthest_point_sample: empty input");
  std::vector<int> out;
  out.reserve(m);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  int cur = ((start % n) + n) % n;
  for (int i = 0; i < m; ++i) {
    out.push_back(cur);
    int best = cur;
    double best_d = -1.0;
    for (int p = 0; p < n; ++p) {
      dist[p] = std::min(dist[p], (points.row(p) - points.row(cur)).squaredNorm());
      if (dist[p] > best_d) {
        best_d = dist[p];
        best = p;
      }
    }
    cur = best;
  }
  return out;
}

std::vector<std::vector<int>> ball_query(const RowMatrixXd& points,
                                         const std::vector<int>& centers, double radius,
                                         int k) {
  const double r2 = radius * radius;
  std::vector<std::vector<int>> groups;
  groups.reserve(centers.size());
  for (int c : centers) {
    std::vector<int> g;
    g.reserve(k);
    for (int p = 0; p < points.rows() && static_cast<int>(g.size()) < k; ++p) {
      if ((points.row(p) - points.row(c)).squaredNorm() <= r2) g.push_back(p);
    }
    if (g.empty()) g.push_back(c);
    const int first = g.front();
    while (static_cast<int>(g.size()) < k) g.push_back(first);
    groups.push_back(std::move(g));
  }
  return groups;
}

EnvGeometry build_env_geometry(const RowMatrixXd& points, const EnvEncoderConfig& config,
                               std::uint64_t seed) {
  if (points.cols() != 3 || points.rows() == 0) {
    throw ShapeError("build_env_geometry: expected P x 3 points");
  }
  EnvGeometry g;
  if (config.kind == EnvEncoderKind::kFlat) return g;
  const int m1 = std::min<int>(config.sa1_centers, points.rows());
  const int m2 = std::min(config.sa2_centers, m1);
  const auto c1 = farthest_point_sample(points, m1, static_cast<int>(seed % points.rows()));
  const RowMatrixXd p1 = select_rows(points, c1);
  const auto c2 = farthest_point_sample(p1, m2, 0);
  const RowMatrixXd p2 = select_rows(p1, c2);
  g.sa1_centers = index_tensor(c1);
  g.sa1_groups = index_tensor(ball_query(points, c1, config.sa1_radius, config.sa1_neighbors));
  g.sa2_centers = index_tensor(c2);
  g.sa2_groups = index_tensor(ball_query(p1, c2, config.sa2_radius, config.sa2_neighbors));
  three_nn(p1, p2, g.up2_index, g.up2_weight);
  three_nn(points, p1, g.up1_index, g.up1_weight);
  return g;
}

EnvBatch stack_env(const std::vector<torch::Tensor>& xyz,
                   const std::vector<EnvGeometry>& geometry) {
  if (xyz.size() != geometry.size() || xyz.empty()) {
    throw ShapeError("stack_env: mismatched batch");
  }
  EnvBatch b;
  b.xyz = torch::stack(xyz);
  if (!geometry[0].sa1_centers.defined()) return b;
  auto stack = [&](torch::Tensor EnvGeometry::*field) {
    std::vector<torch::Tensor> parts;
    for (const auto& g : geometry) parts.push_back(g.*field);
    return torch::stack(parts);
  };
  b.geometry.sa1_centers = stack(&EnvGeometry::sa1_centers);
  b.geometry.sa1_groups = stack(&EnvGeometry::sa1_groups);
  b.geometry.sa2_centers = stack(&EnvGeometry::sa2_centers);
  b.geometry.sa2_groups = stack(&EnvGeometry::sa2_groups);
  b.geometry.up2_index = stack(&EnvGeometry::up2_index);
  b.geometry.up2_weight = stack(&EnvGeometry::up2_weight);
  b.geometry.up1_index = stack(&EnvGeometry::up1_index);
  b.geometry.up1_weight = stack(&EnvGeometry::up1_weight);
  return b;
}

EnvEncoderImpl::EnvEncoderImpl(const EnvEncoderConfig& config, int out_width)
    : config_(config) {
  const int h = config.hidden;
  if (config.kind == EnvEncoderKind::kHierarchical) {
    sa1_ = register_module("sa1", mlp({6, h, h}, true));
    sa2_ = register_module("sa2", mlp({3 + h, 2 * h, 2 * h}, true));
    up2_ = register_module("up2", mlp({3 * h, 2 * h}, true));
    up1_ = register_module("up1", mlp({3 + 2 * h, out_width, out_width}, false));
  } else {
    point_ = register_module("point", mlp({3, h, h}, true));
    token_ = register_module("token", mlp({2 * h, out_width, out_width}, false));
  }
}

torch::Tensor EnvEncoderImpl::forward(const EnvBatch& env) {
  if (env.xyz.dim() != 3 || env.xyz.size(2) != 3) {
    throw ShapeError("encode_environment: expected (B, P, 3) points");
  }
  return config_.kind == EnvEncoderKind::kFlat ? flat(env) : hierarchical(env);
}

torch::Tensor EnvEncoderImpl::hierarchical(const EnvBatch& env) {
  const auto& g = env.geometry;
  if (!g.sa1_centers.defined()) throw ShapeError("encode_environment: missing geometry");
  const auto& xyz = env.xyz;
  const auto c1 = gather_rows(xyz, g.sa1_centers);                  // (B, M1, 3)
  const auto g1 = gather_rows(xyz, g.sa1_groups);                   // (B, M1, K1, 3)
  const auto f1 = std::get<0>(
      sa1_->forward(torch::cat({g1 - c1.unsqueeze(2), g1}, -1)).max(2));  // (B, M1, h)
  const auto c2 = gather_rows(c1, g.sa2_centers);                   // (B, M2, 3)
  const auto g2 = gather_rows(c1, g.sa2_groups);                    // (B, M2, K2, 3)
  const auto g2f = gather_rows(f1, g.sa2_groups);                   // (B, M2, K2, h)
  const auto f2 = std::get<0>(
      sa2_->forward(torch::cat({g2 - c2.unsqueeze(2), g2f}, -1)).max(2));  // (B, M2, 2h)
  const auto w2 = g.up2_weight.to(f2.dtype()).unsqueeze(-1);
  const auto i2 = (gather_rows(f2, g.up2_index) * w2).sum(2);       // (B, M1, 2h)
  const auto u2 = up2_->forward(torch::cat({i2, f1}, -1));          // (B, M1, 2h)
  const auto w1 = g.up1_weight.to(u2.dtype()).unsqueeze(-1);
  const auto i1 = (gather_rows(u2, g.up1_index) * w1).sum(2);       // (B, P, 2h)
  return up1_->forward(torch::cat({i1, xyz}, -1));
}

torch::Tensor EnvEncoderImpl::flat(const EnvBatch& env) {
  const auto h = point_->forward(env.xyz);
  const auto pooled = std::get<0>(h.max(1, true)).expand_as(h);
  return token_->forward(torch::cat({h, pooled}, -1));
}

void Stage2Config::validate() const {
  if (width <= 0 || env_width <= 0 || salience_hidden <= 0 || points < 0) {
    throw ConfigError("stage2: widths must be positive");
  }
}

nlohmann::json Stage2Config::to_json() const {
  return {{"width", width},
          {"env_width", env_width},
          {"points", points},
          {"encoder", encoder.to_json()},
          {"salience_hidden", salience_hidden},
          {"salience_pre_softmax", salience_pre_softmax},
          {"residual_decoder", residual_decoder},
          {"env_semantic", env_semantic},
          {"contact_head", contact_head}};
}

Stage2Config Stage2Config::from_json(const nlohmann::json& j) {
  Stage2Config c;
  c.width = j.value("width", c.width);
  c.env_width = j.value("env_width", c.env_width);
  c.points = j.value("points", c.points);
  if (j.contains("encoder")) c.encoder = EnvEncoderConfig::from_json(j.at("encoder"));
  c.salience_hidden = j.value("salience_hidden", c.salience_hidden);
  c.salience_pre_softmax = j.value("salience_pre_softmax", c.salience_pre_softmax);
  c.residual_decoder = j.value("residual_decoder", c.residual_decoder);
  c.env_semantic = j.value("env_semantic", c.env_semantic);
  c.contact_head = j.value("contact_head", c.contact_head);
  c.validate();
  return c;
}

Stage2Impl::Stage2Impl(const Stage2Config& config) : config_(config) {
  config_.validate();
  const int D = config_.width, E = config_.env_width;
  encoder = register_module("encoder", EnvEncoder(config_.encoder, E));
  motion_embed = register_module("motion_embed", nn::Linear(kMotionConcatDim, D));
  query = register_module("query", nn::Linear(D, D));
  key = register_module("key", nn::Linear(E, D));
  value = register_module("value", nn::Linear(E, D));
  salience_hidden = register_module("salience_hidden", nn::Linear(4, config_.salience_hidden));
  salience_out = register_module("salience_out", nn::Linear(config_.salience_hidden, 1));
  fuse_hidden = register_module("fuse_hidden", nn::Linear(2 * D, D));
  fuse_out = register_module("fuse_out", nn::Linear(D, D));
  contact_hidden = register_module("contact_hidden", nn::Linear(kExtObsDim + D, D));
  contact_out = register_module("contact_out", nn::Linear(D, kNumJoints));
  decode_hidden = register_module("decode_hidden", nn::Linear(D + kNumJoints, D));
  decode_out = register_module("decode_out", nn::Linear(D, kPoseDim));
  // Salience starts neutral so early attention is the plain softmax.
  torch::NoGradGuard guard;
  salience_out->weight.zero_();
  salience_out->bias.zero_();
  // A residual decoder starts as the identity on the sample.
  if (config_.residual_decoder) {
    decode_out->weight.zero_();
    decode_out->bias.zero_();
  }
}

torch::Tensor Stage2Impl::encode_environment(const EnvBatch& env) {
  if (config_.points > 0 && env.xyz.defined() && env.xyz.dim() == 3 &&
      env.xyz.size(1) != config_.points) {
    throw ShapeError("encode_environment: expected " + std::to_string(config_.points) +
                     " points, got " + std::to_string(env.xyz.size(1)));
  }
  return encoder->forward(env);
}

torch::Tensor Stage2Impl::embed_motion(const torch::Tensor& pose_sample,
                                       const torch::Tensor& head_translation,
                                       const torch::Tensor& x_new) {
  if (pose_sample.size(-1) != kPoseDim || head_translation.size(-1) != 3 ||
      x_new.size(-1) != kExtObsDim) {
    throw ShapeError("embed_motion: expected widths 132, 3 and 40");
  }
  const auto concat = torch::cat({pose_sample, head_translation, x_new}, -1);
  return motion_embed->forward(concat);
}

torch::Tensor Stage2Impl::salience(const torch::Tensor& features) {
  if (features.size(-1) != 4) throw ShapeError("salience: expected 4 features per point");
  return salience_out->forward(torch::relu(salience_hidden->forward(features))).squeeze(-1);
}

torch::Tensor Stage2Impl::cross_attend(const torch::Tensor& motion_latent, const torch::Tensor& env_tokens,
                                       const torch::Tensor& salience_scores,
                                       torch::Tensor* attention) {
  if (motion_latent.size(0) != env_tokens.size(0) || env_tokens.size(1) != salience_scores.size(1)) {
    throw ShapeError("cross_attend: batch or point count mismatch");
  }
  const auto q = query->forward(motion_latent);
  const auto k = key->forward(env_tokens);
  const auto v = value->forward(env_tokens);
  auto logits = torch::matmul(q, k.transpose(1, 2)) / std::sqrt(static_cast<double>(q.size(-1)));
  const auto s = salience_scores.unsqueeze(1);  // broadcast over time
  torch::Tensor weights;
  if (config_.salience_pre_softmax) {
    weights = torch::softmax(logits + s, -1);
  } else {
    weights = torch::softmax(logits, -1);
    if (attention) *attention = weights;
    weights = weights + s;
  }
  if (attention && config_.salience_pre_softmax) *attention = weights;
  return torch::matmul(weights, v);
}

torch::Tensor Stage2Impl::fuse(const torch::Tensor& env_context, const torch::Tensor& motion_latent) {
  return fuse_out->forward(torch::relu(fuse_hidden->forward(torch::cat({env_context, motion_latent}, -1))));
}

torch::Tensor Stage2Impl::contact_logits(const torch::Tensor& x_new, const torch::Tensor& refined) {
  return contact_out->forward(torch::relu(contact_hidden->forward(torch::cat({x_new, refined}, -1))));
}

torch::Tensor Stage2Impl::decode_pose(const torch::Tensor& refined, const torch::Tensor& contact,
                                      const torch::Tensor& pose_sample) {
  auto out = decode_out->forward(torch::relu(decode_hidden->forward(torch::cat({refined, contact}, -1))));
  if (config_.residual_decoder) out = out + pose_sample;
  return out;
}

Stage2Output Stage2Impl::forward(const Stage2Input& in) {
  if (in.pose_sample.dim() != 3 || in.x_new.dim() != 3) {
    throw ShapeError("stage2: expected batched (B, T, C) inputs");
  }
  Stage2Output out;
  out.motion_latent = embed_motion(in.pose_sample, in.head_translation, in.x_new);
  if (config_.env_semantic) {
    out.env_tokens = encode_environment(in.env);
    out.env_context = cross_attend(out.motion_latent, out.env_tokens, salience(in.salience));
  } else {
    out.env_context = torch::zeros_like(out.motion_latent);
  }
  out.refined = fuse(out.env_context, out.motion_latent);
  if (config_.contact_head) {
    out.contact_logits = contact_logits(in.x_new, out.refined);
    out.contact = torch::sigmoid(out.contact_logits);
  } else {
    out.contact_logits = torch::zeros(
        {out.refined.size(0), out.refined.size(1), kNumJoints}, out.refined.options());
    out.contact = torch::zeros_like(out.contact_logits);
  }
  out.final_pose = decode_pose(out.refined, out.contact, in.pose_sample);
  return out;
}

}  // namespace sparsepose
