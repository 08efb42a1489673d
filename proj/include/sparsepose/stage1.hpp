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


#ifndef SPARSEPOSE_STAGE1_HPP_
#define SPARSEPOSE_STAGE1_HPP_

#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "sparsepose/types.hpp"

namespace sparsepose {

inline constexpr double kMinSpread = 1e-3;

struct Stage1Config {
  int width = 256;
  int layers = 3;
  int heads = 8;
  int ff_mult = 4;
  bool bias = true;

  void validate() const;
  nlohmann::json to_json() const;
  static Stage1Config from_json(const nlohmann::json& j);
};

// T x D sinusoidal table (sin on even channels, cos on odd).
torch::Tensor sinusoidal_encoding(int length, int width,
                                  torch::Dtype dtype = torch::kFloat32);

class SelfAttentionImpl : public torch::nn::Module {
 public:
  SelfAttentionImpl(int width, int heads);
  // x (B, T, D). If weights is given, receives (B, H, T, T) attention.
  torch::Tensor forward(const torch::Tensor& x, torch::Tensor* weights = nullptr);

 private:
  int heads_;
  torch::nn::Linear qkv_{nullptr}, out_{nullptr};
};
TORCH_MODULE(SelfAttention);

// Pre-norm transformer encoder layer.
class EncoderLayerImpl : public torch::nn::Module {
 public:
  EncoderLayerImpl(int width, int heads, int ff_mult);
  torch::Tensor forward(const torch::Tensor& x, torch::Tensor* weights = nullptr);

 private:
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  SelfAttention attn_{nullptr};
  torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
};
TORCH_MODULE(EncoderLayer);

struct Stage1Output {
  torch::Tensor pose_mean;  // (B, T, 132)
  torch::Tensor spread;       // (B, T, 132), >= kMinSpread
  torch::Tensor features;    // (B, T, D)
};

class Stage1Impl : public torch::nn::Module {
 public:
  explicit Stage1Impl(const Stage1Config& config);

  // x (B, T, 36), history (B, T, 132) -> (B, T, D).
  torch::Tensor embed_inputs(const torch::Tensor& x, const torch::Tensor& history);
  torch::Tensor encode(const torch::Tensor& embedded,
                       std::vector<torch::Tensor>* weights = nullptr);
  torch::Tensor regress_pose(const torch::Tensor& encoded);
  torch::Tensor regress_uncertainty(const torch::Tensor& encoded);
  Stage1Output forward(const torch::Tensor& x, const torch::Tensor& history);

  // Uncertainty head only / everything else.
  std::vector<torch::Tensor> uncertainty_parameters();
  std::vector<torch::Tensor> motion_parameters();

  const Stage1Config& config() const { return config_; }

  torch::nn::Linear obs_embed{nullptr}, history_embed{nullptr};
  torch::nn::ModuleList layers{nullptr};
  torch::nn::LayerNorm final_norm{nullptr};
  torch::nn::Linear pose_hidden{nullptr}, pose_out{nullptr};
  torch::nn::Linear unc_hidden{nullptr}, unc_out{nullptr};

 private:
  Stage1Config config_;
};
TORCH_MODULE(Stage1);

// pose_mean + spread * epsilon.
torch::Tensor sample_pose(const torch::Tensor& pose_mean, const torch::Tensor& spread,
                          const torch::Tensor& epsilon);

enum class UncertaintyForm {
  kLiteral,      // ||r / spread||_2 + log ||spread||_2 over the whole window
  kGaussianNll,  // mean(0.5 (r / spread)^2 + log spread)
};

struct Stage1Loss {
  torch::Tensor motion;       // pose error norm
  torch::Tensor uncertainty;  // uncertainty-scaled error plus log-spread
  torch::Tensor total;        // weighted sum
};

// Inputs are (T, 132) or (B, T, 132); norms are taken per window and
// averaged over the batch. Throws ValidationError if any spread <= 0.
Stage1Loss loss_stage1(const torch::Tensor& pose_mean, const torch::Tensor& spread,
                       const torch::Tensor& target_pose, double lambda_motion = 1.0,
                       double lambda_uncertainty = 0.001,
                       UncertaintyForm form = UncertaintyForm::kLiteral,
                       bool include_uncertainty = true);

// Upright pose used before the first frame: root maps body +y to world +z
// facing world +y; all other joints at rest.
Eigen::RowVectorXd standing_rest_pose();

// History for frames [start, start + length): row t holds source row
// start + t - shift, or the rest pose where that index is negative. Rows at
// or beyond source.rows() are an error.
RowMatrixXd history_window(const RowMatrixXd& source, int start, int length, int shift);

}  // namespace sparsepose

#endif  // SPARSEPOSE_STAGE1_HPP_
