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


#ifndef SPARSEPOSE_OBSERVATIONS_HPP_
#define SPARSEPOSE_OBSERVATIONS_HPP_

#include <vector>

#include "sparsepose/skeleton.hpp"
#include "sparsepose/types.hpp"

namespace sparsepose {

// Channel layout of one sparse observation row (36 values):
//   [0, 12)  head        [12, 24) left wrist     [24, 36) right wrist
// and within each tracker block:
//   +0 position (3, m)   +3 rotation 6D (6)       +9 linear velocity (3, m/s)
namespace obs {
inline constexpr int kHead = 0;
inline constexpr int kLeftHand = 12;
inline constexpr int kRightHand = 24;
inline constexpr int kPos = 0;
inline constexpr int kRot = 3;
inline constexpr int kVel = 9;
inline constexpr int kHeight = 36;  // extended stream: relative head height
inline constexpr int kUp = 37;      // extended stream: head up-vector (3)
}  // namespace obs

// Tracker joints in observation order.
inline constexpr int kTrackerJoints[kNumTrackers] = {
    joints::kHead, joints::kLeftWrist, joints::kRightWrist};

// T x 36 sparse stream from FK of the motion. Velocity is the backward
// difference times fps; frame 0 copies frame 1. Throws ValidationError for
// fewer than 2 frames or non-positive fps.
RowMatrixXd extract_sparse(const Motion& motion, const KinematicTree& tree,
                           double fps = kDefaultFps);
// Same, from precomputed FK frames.
RowMatrixXd extract_sparse(const std::vector<FramePose>& frames,
                           double fps = kDefaultFps);

// World image of the head's local +Y axis (second column).
Vec3 head_up_vector(const Mat3& head_rotation);

inline double relative_head_height(const Vec3& head_position, double terrain_z) {
  return head_position.z() - terrain_z;
}

// [x | h | up] -> T x 40. Throws ShapeError on mismatched rows or widths.
RowMatrixXd build_extended(const RowMatrixXd& x, const Eigen::VectorXd& h,
                           const RowMatrixXd& up);

}  // namespace sparsepose

#endif  // SPARSEPOSE_OBSERVATIONS_HPP_
