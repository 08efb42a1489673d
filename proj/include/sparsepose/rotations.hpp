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


#ifndef SPARSEPOSE_ROTATIONS_HPP_
#define SPARSEPOSE_ROTATIONS_HPP_

#include <Eigen/Core>

#include "sparsepose/types.hpp"

namespace sparsepose {

// 6D rotation encoding: the first two columns of a rotation matrix,
// laid out as [c0.x, c0.y, c0.z, c1.x, c1.y, c1.z].
using Rot6D = Eigen::Matrix<double, 6, 1>;

inline constexpr double kRot6dDegeneracyEps = 1e-8;

// Gram-Schmidt reconstruction. Throws DegenerateRotationError when the first
// column (or the orthogonalized second column) has norm below 1e-8, and
// ValidationError on non-finite input.
Mat3 rot6d_to_matrix(const Rot6D& r);

// Reads off the first two columns. Throws ValidationError when m deviates
// from a proper rotation by more than 1e-4.
Rot6D matrix_to_rot6d(const Mat3& m);

// arccos(clamp((trace(a^T b) - 1) / 2, -1, 1)), in [0, pi].
double geodesic_angle(const Mat3& a, const Mat3& b);

// Max-abs deviation of m^T m from I and |det - 1| both within tol.
bool is_rotation(const Mat3& m, double tol = 1e-6);

}  // namespace sparsepose

#endif  // SPARSEPOSE_ROTATIONS_HPP_
