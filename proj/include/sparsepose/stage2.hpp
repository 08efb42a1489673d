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


#ifndef SPARSEPOSE_STAGE2_HPP_
#define SPARSEPOSE_STAGE2_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "sparsepose/types.hpp"

namespace sparsepose {

enum class EnvEncoderKind { kHierarchical, kFlat };

struct EnvEncoderConfig {
  EnvEncoderKind kind = EnvEncoderKind::kHierarchical;
  int hidden = 64;  // first-level feature width; the second level uses 2x
  int sa1_centers = 256;
  int sa1_neighbors = 16;
  double sa1_radius = 0.2;
  int sa2_centers = 64;
  int sa2_neighbors = 16;
  double sa2_radius = 0.4;

  nlohmann::json to_json() const;
  static EnvEncoderConfig from_json(const nlohmann::json& j);
};

// Index structure of the hierarchical encoder for one crop. Built from point
// coordinates only, so it carries no gradient and can be cached.
struct EnvGeometry {
  torch::Tensor sa1_centers;  // (M1) into points
  torch::Tensor sa1_groups;   // (M1, K1) into points
  torch::Tensor sa2_centers;  // (M2) into level-1 centers
  torch::Tensor sa2_groups;   // (M2, K2) into level-1 centers
  torch::Tensor up2_index;    // (M1, 3) into level-2 centers
  torch::Tensor up2_weight;   // (M1, 3)
  torch::Tensor up1_index;    // (P, 3) into level-1 centers
  torch::Tensor up1_weight;   // (P, 3)
};

// Farthest-point sampling starting at `start`; returns m indices.
std::vector<int> farthest_point_sample(const RowMatrixXd& points, int m, int start = 0);

// Up to k indices within radius of each center (in index order), padded by
// repeating the first hit; the center itself always qualifies.
std::vector<std::vector<int>> ball_query(const RowMatrixXd& points,
                                         const std::vector<int>& centers,
                                         double radius, int k);

// points are P x 3 crop coordinates in the human-centered frame.
EnvGeometry build_env_geometry(const RowMatrixXd& points, const EnvEncoderConfig& config,
                               std::uint64_t seed = 0);

// Batch of crops: xyz (B, P, 3) and the stacked geometry (leading B).
struct EnvBatch {
  torch::Tensor xyz;
  EnvGeometry geometry;
};
EnvBatch stack_env(const std::vector<torch::Tensor>& xyz,
                   const std::vector<EnvGeometry>& geometry);

class EnvEncoderImpl : public torch::nn::Module {
 public:
  EnvEncoderImpl(const EnvEncoderConfig& config, int out_width);
  // (B, P, 3) -> (B, P, out_width), one token per point.
  torch::Tensor forward(const EnvBatch& env);

 private:
  torch::Tensor hierarchical(const EnvBatch& env);
  torch::Tensor flat(const EnvBatch& env);

  EnvEncoderConfig config_;
  torch::nn::Sequential sa1_{nullptr}, sa2_{nullptr}, up2_{nullptr}, up1_{nullptr};
  torch::nn::Sequential point_{nullptr}, token_{nullptr};
};
TORCH_MODULE(EnvEncoder);

struct Stage2Config {
  int width = 256;      // latent width of motion and refined representations
  int env_width = 256;  // per-point token width
  int points = kCropPoints;  // expected crop size; 0 accepts any
  EnvEncoderConfig encoder;
  int salience_hidden = 16;
  bool salience_pre_softmax = false;  // add salience to logits instead
  bool residual_decoder = false;      // decode a correction to the sample
  bool env_semantic = true;           // cross-attention path enabled
  bool contact_head = true;

  void validate() const;
  nlohmann::json to_json() const;
  static Stage2Config from_json(const nlohmann::json& j);
};

struct Stage2Input {
  torch::Tensor pose_sample;      // (B, T, 132)
  torch::Tensor head_translation;  // (B, T, 3)
  torch::Tensor x_new;             // (B, T, 40)
  torch::Tensor salience;          // (B, P, 4)
  EnvBatch env;
};

struct Stage2Output {
  torch::Tensor env_tokens;      // (B, P, E)
  torch::Tensor motion_latent;             // (B, T, D)
  torch::Tensor env_context;            // (B, T, D)
  torch::Tensor refined;            // (B, T, D)
  torch::Tensor contact_logits;  // (B, T, 22)
  torch::Tensor contact;         // (B, T, 22)
  torch::Tensor final_pose;           // (B, T, 132)
};

class Stage2Impl : public torch::nn::Module {
 public:
  explicit Stage2Impl(const Stage2Config& config);

  torch::Tensor encode_environment(const EnvBatch& env);
  torch::Tensor embed_motion(const torch::Tensor& pose_sample,
                             const torch::Tensor& head_translation,
                             const torch::Tensor& x_new);
  // Per-point salience scalar (B, P) from (B, P, 4) features.
  torch::Tensor salience(const torch::Tensor& features);
  // (B, T, D), (B, P, E), (B, P) -> (B, T, D). attention receives the
  // post-softmax weights (B, T, P) when given.
  torch::Tensor cross_attend(const torch::Tensor& motion_latent, const torch::Tensor& env_tokens,
                             const torch::Tensor& salience_scores,
                             torch::Tensor* attention = nullptr);
  torch::Tensor fuse(const torch::Tensor& env_context, const torch::Tensor& motion_latent);
  torch::Tensor contact_logits(const torch::Tensor& x_new, const torch::Tensor& refined);
  torch::Tensor decode_pose(const torch::Tensor& refined, const torch::Tensor& contact,
                            const torch::Tensor& pose_sample);
  Stage2Output forward(const Stage2Input& in);

  const Stage2Config& config() const { return config_; }

  EnvEncoder encoder{nullptr};
  torch::nn::Linear motion_embed{nullptr};
  torch::nn::Linear query{nullptr}, key{nullptr}, value{nullptr};
  torch::nn::Linear salience_hidden{nullptr}, salience_out{nullptr};
  torch::nn::Linear fuse_hidden{nullptr}, fuse_out{nullptr};
  torch::nn::Linear contact_hidden{nullptr}, contact_out{nullptr};
  torch::nn::Linear decode_hidden{nullptr}, decode_out{nullptr};

 private:
  Stage2Config config_;
};
TORCH_MODULE(Stage2);

}  // namespace sparsepose

#endif  // SPARSEPOSE_STAGE2_HPP_
