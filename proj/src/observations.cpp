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


#include "sparsepose/observations.hpp"

#include "sparsepose/rotations.hpp"

namespace sparsepose {

RowMatrixXd extract_sparse(const Motion& motion, const KinematicTree& tree,
                           double fps) {
  if (motion.frames() < 2) {
    throw ValidationError("extract_sparse: need at least 2 frames");
  }
  return extract_sparse(forward_kinematics(motion, tree), fps);
}

RowMatrixXd extract_sparse(const std::vector<FramePose>& frames, double fps) {
  const int T = static_cast<int>(frames.size());
  if (T < 2) throw ValidationError("extract_sparse: need at least 2 frames");
  if (!(fps > 0.0)) throw ValidationError("extract_sparse: fps must be positive");
  RowMatrixXd x(T, kObsDim);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < kNumTrackers; ++k) {
      const int j = kTrackerJoints[k];
      const int base = k * kTrackerChannels;
      x.block<1, 3>(t, base + obs::kPos) = frames[t].positions[j].transpose();
      x.block<1, 6>(t, base + obs::kRot) =
          matrix_to_rot6d(frames[t].rotations[j]).transpose();
    }
  }
  for (int t = 1; t < T; ++t) {
    for (int k = 0; k < kNumTrackers; ++k) {
      const int base = k * kTrackerChannels;
      x.block<1, 3>(t, base + obs::kVel) =
          (x.block<1, 3>(t, base + obs::kPos) -
           x.block<1, 3>(t - 1, base + obs::kPos)) * fps;
    }
  }
  for (int k = 0; k < kNumTrackers; ++k) {
    const int base = k * kTrackerChannels + obs::kVel;
    x.block<1, 3>(0, base) = x.block<1, 3>(1, base);
  }
  return x;
}

Vec3 head_up_vector(const Mat3& head_rotation) { return head_rotation.col(1); }

RowMatrixXd build_extended(const RowMatrixXd& x, const Eigen::VectorXd& h,
                           const RowMatrixXd& up) {
  if (x.cols() != kObsDim || up.cols() != 3 || h.size() != x.rows() ||
      up.rows() != x.rows()) {
    throw ShapeError("build_extended: expected T x 36, T x 1, T x 3");
  }
  RowMatrixXd out(x.rows(), kExtObsDim);
  out.leftCols(kObsDim) = x;
  out.col(obs::kHeight) = h;
  out.rightCols(3) = up;
  return out;
}

}  // namespace sparsepose
