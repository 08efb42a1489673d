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

#ifndef SPARSEPOSE_TYPES_HPP_
#define SPARSEPOSE_TYPES_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sparsepose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ContactMatrix =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fixed dimensions of the problem.
inline constexpr int kNumJoints = 22;
inline constexpr int kRot6dDim = 6;
inline constexpr int kPoseDim = kNumJoints * kRot6dDim;  // 132
inline constexpr int kTrackerChannels = 12;              // p(3) R6d(6) v(3)
inline constexpr int kNumTrackers = 3;                   // head, left, right
inline constexpr int kObsDim = kNumTrackers * kTrackerChannels;  // 36
inline constexpr int kExtObsDim = kObsDim + 1 + 3;               // 40
inline constexpr int kMotionConcatDim = kPoseDim + 3 + kExtObsDim;  // 175
inline constexpr int kWindow = 40;
inline constexpr int kCropPoints = 1000;
inline constexpr double kDefaultFps = 30.0;

// Error taxonomy. The CLI maps these onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateRotationError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A pose stream with its root translation. pose is T x 132 (per-joint 6D
// blocks, local rotations, root block is the global root orientation),
// translation is T x 3 meters in the world frame (z up).
struct Motion {
  RowMatrixXd pose;
  RowMatrixXd translation;

  int frames() const { return static_cast<int>(pose.rows()); }
};

}  // namespace sparsepose

#endif  // SPARSEPOSE_TYPES_HPP_
