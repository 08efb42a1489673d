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


#ifndef SPARSEPOSE_METRICS_HPP_
#define SPARSEPOSE_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sparsepose/types.hpp"

namespace sparsepose {

// Poses are T x 132 (6D blocks). Positions are T x 66 meters (joint-major
// xyz). Velocities and jerks use backward differences at `fps`.

// Mean geodesic angle between local joint rotations, degrees.
double mpjre(const RowMatrixXd& pred_pose, const RowMatrixXd& gt_pose);
// Mean joint Euclidean distance, millimeters.
double mpjpe(const RowMatrixXd& pred_pos, const RowMatrixXd& gt_pos);
// Mean joint velocity error magnitude, millimeters per second.
double mpjve(const RowMatrixXd& pred_pos, const RowMatrixXd& gt_pos,
             double fps = kDefaultFps);
// Mean jerk magnitude in units of 1e2 m/s^3.
double jitter(const RowMatrixXd& pred_pos, double fps = kDefaultFps);

struct MetricsReport {
  double mpjre_deg = 0.0;
  double mpjpe_mm = 0.0;
  double mpjve_mm_s = 0.0;
  double jitter_e2_m_s3 = 0.0;
  std::int64_t frames = 0;
  std::int64_t sequences = 0;

  // "key = value" lines, keys as in to_json().
  std::string to_text() const;
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  // Writes <stem>.txt and <stem>.json.
  void write(const std::filesystem::path& stem) const;
};

// Streaming accumulation over sequences; report() equals the pooled
// one-shot means over all frames and joints.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(double fps = kDefaultFps) : fps_(fps) {}

  void add(const RowMatrixXd& pred_pose, const RowMatrixXd& gt_pose,
           const RowMatrixXd& pred_pos, const RowMatrixXd& gt_pos);
  MetricsReport report() const;

 private:
  double fps_;
  double rot_sum_ = 0.0;
  double pos_sum_ = 0.0;
  double vel_sum_ = 0.0;
  double jerk_sum_ = 0.0;
  std::int64_t rot_n_ = 0;
  std::int64_t pos_n_ = 0;
  std::int64_t vel_n_ = 0;
  std::int64_t jerk_n_ = 0;
  std::int64_t frames_ = 0;
  std::int64_t sequences_ = 0;
};

}  // namespace sparsepose

#endif  // SPARSEPOSE_METRICS_HPP_
