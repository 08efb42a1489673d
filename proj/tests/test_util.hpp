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


#ifndef SPARSEPOSE_TESTS_TEST_UTIL_HPP_
#define SPARSEPOSE_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "sparsepose/rotations.hpp"
#include "sparsepose/skeleton.hpp"
#include "sparsepose/types.hpp"

namespace sparsepose::testing {

// Uniform random rotation from a normalized Gaussian quaternion.
inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Mat3 axis_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// T x (6 * joints) pose with random local rotations.
inline RowMatrixXd random_pose(std::mt19937_64& rng, int frames, int joints) {
  RowMatrixXd pose(frames, 6 * joints);
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < joints; ++j) {
      pose.block<1, 6>(t, 6 * j) = matrix_to_rot6d(random_rotation(rng)).transpose();
    }
  }
  return pose;
}

inline RowMatrixXd identity_pose(int frames, int joints) {
  RowMatrixXd pose(frames, 6 * joints);
  for (int j = 0; j < joints; ++j) {
    pose.block(0, 6 * j, frames, 6).rowwise() =
        Eigen::RowVectorXd::Map(std::array<double, 6>{1, 0, 0, 0, 1, 0}.data(), 6);
  }
  return pose;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace sparsepose::testing

#endif  // SPARSEPOSE_TESTS_TEST_UTIL_HPP_
