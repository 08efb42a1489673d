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


#include "sparsepose/stage1.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "sparsepose/rotations.hpp"

namespace sparsepose {

namespace nn = torch::nn;

void Stage1Config::validate() const {
  if (width <= 0 || layers <= 0 || heads <= 0 || ff_mult <= 0) {
    throw ConfigError("stage1: sizes must be positive");
  }
  if (width % heads != 0) throw ConfigError("stage1: heads must divide width");
  if (width % 2 != 0) throw ConfigError("stage1: width must be even");
}

nlohmann::json Stage1Config::to_json() const {
  return {{"width", width}, {"layers", layers}, {"heads", heads},
          {"ff_mult", ff_mult}, {"bias", bias}};
}

Stage1Config Stage1Config::from_json(const nlohmann::json& j) {
  Stage1Config c;
  c.width = j.value("width", c.width);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.bias = j.value("bias", c.bias);
  c.validate();
  return c;
}

torch::Tensor sinusoidal_encoding(int length, int width, torch::Dtype dtype) {
  auto pe = torch::zeros({length, width}, torch::kFloat64);
  auto a = pe.accessor<double, 2>();
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < width; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / width);
      a[t][i] = std::sin(t * freq);
      if (i + 1 < width) a[t][i + 1] = std::cos(t * freq);
    }
  }
  return pe.to(dtype);
}

SelfAttentionImpl::SelfAttentionImpl(int width, int heads) : heads_(heads) {
  qkv_ = register_module("qkv", nn::Linear(width, 3 * width));
  out_ = register_module("out", nn::Linear(width, width));
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x, torch::Tensor* weights) {
  const auto B = x.size(0), T = x.size(1), D = x.size(2);
  const auto hd = D / heads_;
  auto qkv = qkv_->forward(x).view({B, T, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
  const auto q = qkv[0], k = qkv[1], v = qkv[2];  // (B, H, T, hd)
  const auto w = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) /
                                    std::sqrt(static_cast<double>(hd)),
                                -1);
  if (weights) *weights = w;
  const auto y = torch::matmul(w, v).transpose(1, 2).reshape({B, T, D});
  return out_->forward(y);
}

EncoderLayerImpl::EncoderLayerImpl(int width, int heads, int ff_mult) {
  norm1_ = register_module("norm1", nn::LayerNorm(nn::LayerNormOptions({width})));
  attn_ = register_module("attn", SelfAttention(width, heads));
  norm2_ = register_module("norm2", nn::LayerNorm(nn::LayerNormOptions({width})));
  ff1_ = register_module("ff1", nn::Linear(width, ff_mult * width));
  ff2_ = register_module("ff2", nn::Linear(ff_mult * width, width));
}

torch::Tensor EncoderLayerImpl::forward(const torch::Tensor& x, torch::Tensor* weights) {
  auto h = x + attn_->forward(norm1_->forward(x), weights);
  return h + ff2_->forward(torch::gelu(ff1_->forward(norm2_->forward(h))));
}

Stage1Impl::Stage1Impl(const Stage1Config& config) : config_(config) {
  config_.validate();
  const int D = config_.width;
  obs_embed = register_module(
      "obs_embed", nn::Linear(nn::LinearOptions(kObsDim, D / 2).bias(config_.bias)));
  history_embed = register_module(
      "history_embed", nn::Linear(nn::LinearOptions(kPoseDim, D / 2).bias(config_.bias)));
  layers = register_module("layers", nn::ModuleList());
  for (int l = 0; l < config_.layers; ++l) {
    layers->push_back(EncoderLayer(D, config_.heads, config_.ff_mult));
  }
  final_norm = register_module("final_norm", nn::LayerNorm(nn::LayerNormOptions({D})));
  pose_hidden = register_module("pose_hidden", nn::Linear(D, D));
  pose_out = register_module("pose_out", nn::Linear(D, kPoseDim));
  unc_hidden = register_module("unc_hidden", nn::Linear(D, D));
  unc_out = register_module("unc_out", nn::Linear(D, kPoseDim));
}

torch::Tensor Stage1Impl::embed_inputs(const torch::Tensor& x, const torch::Tensor& history) {
  if (x.dim() != 3 || x.size(2) != kObsDim || history.dim() != 3 ||
      history.size(2) != kPoseDim || x.size(0) != history.size(0) ||
      x.size(1) != history.size(1)) {
    throw ShapeError("stage1: expected x (B, T, 36) and history (B, T, 132)");
  }
  return torch::cat({obs_embed->forward(x), history_embed->forward(history)}, -1);
}

torch::Tensor Stage1Impl::encode(const torch::Tensor& embedded, std::vector<torch::Tensor>* weights) {
  if (embedded.dim() != 3 || embedded.size(2) != config_.width) {
    throw ShapeError("stage1: encode expects (B, T, D)");
  }
  auto h = embedded + sinusoidal_encoding(embedded.size(1), config_.width, embedded.scalar_type())
                     .unsqueeze(0);
  for (const auto& m : *layers) {
    torch::Tensor w;
    h = m->as<EncoderLayer>()->forward(h, weights ? &w : nullptr);
    if (weights) weights->push_back(w);
  }
  return final_norm->forward(h);
}

torch::Tensor Stage1Impl::regress_pose(const torch::Tensor& encoded) {
  return pose_out->forward(torch::relu(pose_hidden->forward(encoded)));
}

torch::Tensor Stage1Impl::regress_uncertainty(const torch::Tensor& encoded) {
  return torch::softplus(unc_out->forward(torch::relu(unc_hidden->forward(encoded)))) + kMinSpread;
}

Stage1Output Stage1Impl::forward(const torch::Tensor& x, const torch::Tensor& history) {
  const auto encoded = encode(embed_inputs(x, history));
  return {regress_pose(encoded), regress_uncertainty(encoded), encoded};
}

std::vector<torch::Tensor> Stage1Impl::uncertainty_parameters() {
  auto a = unc_hidden->parameters();
  auto b = unc_out->parameters();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<torch::Tensor> Stage1Impl::motion_parameters() {
  std::vector<torch::Tensor> out;
  const auto unc = uncertainty_parameters();
  for (const auto& p : parameters()) {
    bool skip = false;
    for (const auto& u : unc) skip |= p.is_same(u);
    if (!skip) out.push_back(p);
  }
  return out;
}

torch::Tensor sample_pose(const torch::Tensor& pose_mean, const torch::Tensor& spread,
                          const torch::Tensor& epsilon) {
  if (!pose_mean.sizes().equals(spread.sizes()) || !spread.sizes().equals(epsilon.sizes())) {
    throw ShapeError("sample_pose: shapes differ");
  }
  return pose_mean + spread * epsilon;
}

Stage1Loss loss_stage1(const torch::Tensor& pose_mean, const torch::Tensor& spread,
                       const torch::Tensor& target_pose, double lambda_motion,
                       double lambda_uncertainty, UncertaintyForm form,
                       bool include_uncertainty) {
  if (!pose_mean.sizes().equals(target_pose.sizes()) ||
      !pose_mean.sizes().equals(spread.sizes())) {
    throw ShapeError("loss_stage1: shapes differ");
  }
  if ((spread <= 0).any().item<bool>()) {
    throw ValidationError("loss_stage1: spread must be strictly positive");
  }
  auto per_window = [](const torch::Tensor& t) {
    return t.dim() >= 3 ? t.flatten(1) : t.reshape({1, -1});
  };
  const auto r = per_window(pose_mean - target_pose);
  const auto d = per_window(spread);
  Stage1Loss out;
  out.motion = r.norm(2, 1).mean();
  if (form == UncertaintyForm::kLiteral) {
    out.uncertainty = ((r / d).norm(2, 1) + torch::log(d.norm(2, 1))).mean();
  } else {
    out.uncertainty = (0.5 * (r / d).pow(2) + torch::log(d)).mean();
  }
  out.total = lambda_motion * out.motion;
  if (include_uncertainty) out.total = out.total + lambda_uncertainty * out.uncertainty;
  return out;
}

Eigen::RowVectorXd standing_rest_pose() {
  Eigen::RowVectorXd pose(kPoseDim);
  const Rot6D identity = matrix_to_rot6d(Mat3::Identity());
  for (int j = 0; j < kNumJoints; ++j) pose.segment<6>(6 * j) = identity.transpose();
  const Mat3 upright = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX()).toRotationMatrix();
  pose.segment<6>(0) = matrix_to_rot6d(upright).transpose();
  return pose;
}

RowMatrixXd history_window(const RowMatrixXd& source, int start, int length, int shift) {
  if (source.cols() != kPoseDim) throw ShapeError("history_window: source must be N x 132");
  if (length <= 0 || shift < 1) throw ValidationError("history_window: bad length or shift");
  RowMatrixXd out(length, kPoseDim);
  const Eigen::RowVectorXd rest = standing_rest_pose();
  for (int t = 0; t < length; ++t) {
    const int src = start + t - shift;
    if (src >= source.rows()) throw ValidationError("history_window: source too short");
    out.row(t) = src < 0 ? rest : Eigen::RowVectorXd(source.row(src));
  }
  return out;
}

}  // namespace sparsepose
