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


#include "sparsepose/rotations.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace sparsepose {

Mat3 rot6d_to_matrix(const Rot6D& r) {
  if (!r.allFinite()) {
    throw ValidationError("rot6d_to_matrix: non-finite input");
  }
  const Vec3 a = r.head<3>();
  const Vec3 b = r.tail<3>();
  const double na = a.norm();
  if (na < kRot6dDegeneracyEps) {
    throw DegenerateRotationError("rot6d_to_matrix: first column near zero");
  }
  const Vec3 c0 = a / na;
  const Vec3 b_orth = b - c0.dot(b) * c0;
  const double nb = b_orth.norm();
  if (nb < kRot6dDegeneracyEps) {
    throw DegenerateRotationError(
        "rot6d_to_matrix: second column parallel to the first");
  }
  const Vec3 c1 = b_orth / nb;
  Mat3 m;
  m.col(0) = c0;
  m.col(1) = c1;
  m.col(2) = c0.cross(c1);
  return m;
}

Rot6D matrix_to_rot6d(const Mat3& m) {
  if (!m.allFinite() || !is_rotation(m, 1e-4)) {
    throw ValidationError("matrix_to_rot6d: input is not a rotation matrix");
  }
  Rot6D r;
  r << m.col(0), m.col(1);
  return r;
}

double geodesic_angle(const Mat3& a, const Mat3& b) {
  // trace(a^T b) == sum_ij a_ij b_ij; the elementwise form is symmetric in
  // (a, b) bit for bit.
  const double tr = (a.array() * b.array()).sum();
  const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

bool is_rotation(const Mat3& m, double tol) {
  const double ortho =
      (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho < tol && std::abs(m.determinant() - 1.0) < tol;
}

}  // namespace sparsepose
