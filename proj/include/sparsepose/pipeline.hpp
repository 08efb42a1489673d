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


#ifndef SPARSEPOSE_PIPELINE_HPP_
#define SPARSEPOSE_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "sparsepose/checkpoint.hpp"
#include "sparsepose/metrics.hpp"
#include "sparsepose/objectives.hpp"
#include "sparsepose/stage1.hpp"
#include "sparsepose/stage2.hpp"
#include "sparsepose/synthdata.hpp"
#include "sparsepose/windows.hpp"

namespace sparsepose {

// Environment variable that overrides the configured global seed.
inline constexpr const char* kSeedEnvVar = "SPARSEPOSE_SEED";

struct TrainSchedule {
  double lr = 1e-4;
  int batch_size = 32;
  int stage1_motion_steps = 1500;       // pose term only
  int stage1_uncertainty_steps = 500;   // pose and uncertainty terms
  int stage2_steps = 1500;
  int stage2_frozen_steps = 1500;       // first-stage weights frozen this long
  bool cosine = false;
  double grad_clip = 0.0;               // global norm, 0 disables
  int window_stride = 4;                // spacing of training window starts
  int max_windows = 2000;
  int log_every = 50;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainSchedule from_json(const nlohmann::json& j);
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int stage = 2;  // last stage a training run produces
  std::string dataset = "data/toy";
  std::string output = "runs/default";
  Stage1Config stage1;
  Stage2Config stage2;
  WindowOptions windows;
  TrainSchedule train;
  LossWeights loss;
  UncertaintyForm uncertainty_form = UncertaintyForm::kLiteral;
  bool uncertainty = true;   // sample hypotheses and train the uncertainty head
  bool env_geometry = true;  // foot, ground and collision terms
  TrackerNoise noise;

  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys are a ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  std::string hash() const;
};

// Variant keys: name, stage, crop, n_points, env_semantic, env_geometry,
// contact_head, uncertainty.
PipelineConfig apply_variant(PipelineConfig config, const nlohmann::json& variant);
// Loss weights after the ablation switches zero the disabled terms.
LossWeights effective_weights(const PipelineConfig& config);
// Applies kSeedEnvVar when set; throws ConfigError when it does not parse.
void apply_seed_override(PipelineConfig& config);

struct Model {
  PipelineConfig config;
  KinematicTree tree;
  Stage1 stage1{nullptr};
  Stage2 stage2{nullptr};
  // Adam moments of the last training run, named after their parameters.
  std::vector<std::pair<std::string, torch::Tensor>> optimizer_state;

  bool has_stage2() const { return !stage2.is_empty(); }
};

// Fresh parameters drawn from config.seed.
Model make_model(const PipelineConfig& config, const KinematicTree& tree, bool with_stage2);

Checkpoint make_checkpoint(const Model& model);
Model model_from_checkpoint(const Checkpoint& ckpt);

struct TrainResult {
  Model model;
  std::vector<nlohmann::json> log;  // one record per logged step
};

// Phase A trains the pose path on the pose term, phase B adds the
// uncertainty head and term. Throws NumericError on a non-finite loss after
// writing <output>/nan_batch.json.
TrainResult train_stage1(const PipelineConfig& config, const Dataset& data);
// Starts from the first-stage weights of `init`.
TrainResult train_stage2(const PipelineConfig& config, const Dataset& data, const Model& init);

enum class EpsilonMode { kZero, kSample };

struct InferenceResult {
  RowMatrixXd pose;         // T x 132
  RowMatrixXd translation;  // T x 3
  RowMatrixXd positions;    // T x 66
  RowMatrixXd contacts;     // T x 22 probabilities (zero without a contact head)
  RowMatrixXd uncertainty;  // T x 132
  // Mean per-window loss terms, when ground truth is available.
  std::map<std::string, double> losses;
  int windows = 0;
};

// Non-overlapping windows with autoregressive history. A trailing partial
// window is covered by the last full-length window and only its new frames
// are kept. Throws ValidationError for streams shorter than one window.
InferenceResult infer(const Model& model, const SequenceData& seq,
                      EpsilonMode mode = EpsilonMode::kZero, std::uint64_t seed = 0);

// Frame-by-frame equivalent of infer().
class StreamingInference {
 public:
  StreamingInference(const Model& model, const EnvironmentCloud& cloud,
                     EpsilonMode mode = EpsilonMode::kZero, std::uint64_t seed = 0);
  // Returns the number of frames finalized by this call.
  int push(const Eigen::RowVectorXd& frame);
  int finish();
  const InferenceResult& result() const { return result_; }

 private:
  int run(int start);

  const Model& model_;
  SequenceData seq_;
  EpsilonMode mode_;
  torch::Generator generator_;
  InferenceResult result_;
  int produced_ = 0;
};

// Mean over frames of the deepest body-capsule penetration into the
// primitives, meters.
double mean_penetration_depth(const RowMatrixXd& positions, const KinematicTree& tree,
                              const std::vector<ScenePrimitive>& primitives);

struct EvalResult {
  MetricsReport metrics;
  double penetration_mm = 0.0;
  std::map<std::string, double> losses;

  nlohmann::json to_json() const;
  // metrics.{txt,json} and report.json under dir.
  void write(const std::filesystem::path& dir) const;
};

EvalResult evaluate(const Model& model, const std::vector<SequenceData>& sequences);
std::vector<SequenceData> prepare_split(const Dataset& data, const std::string& split,
                                        const TrackerNoise& noise = {});

struct AblationRow {
  std::string name;
  nlohmann::json variant;
  std::vector<EvalResult> per_seed;
  MetricsReport mean;
  double penetration_mm = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Trains and evaluates every variant for every seed. First-stage models
// are shared between variants with identical first-stage settings.
AblationTable ablation_run(const PipelineConfig& base, const nlohmann::json& variants,
                           const Dataset& data, const std::vector<std::uint64_t>& seeds,
                           const std::string& split = "test");

}  // namespace sparsepose

#endif  // SPARSEPOSE_PIPELINE_HPP_
