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


#include <random>

#include <gtest/gtest.h>

#include "sparsepose/rotations.hpp"
#include "sparsepose/skeleton.hpp"
#include "sparsepose/tensor_kinematics.hpp"
#include "test_util.hpp"

namespace sparsepose {
namespace {

using testing::random_pose;
using testing::random_rotation;

TEST(TensorKinematics, Rot6dMatchesEigenDecoder) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    Rot6D r;
    for (int c = 0; c < 6; ++c) r[c] = g(rng);
    auto t = torch::empty({6}, torch::kFloat64);
    for (int c = 0; c < 6; ++c) t[c] = r[c];
    const Mat3 expected = rot6d_to_matrix(r);
    const auto got = rot6d_to_matrix(t);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) EXPECT_NEAR(got[a][b].item<double>(), expected(a, b), 1e-12);
    }
  }
}

TEST(TensorKinematics, MatrixRoundTrip) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Mat3 m = random_rotation(rng);
    auto t = torch::empty({3, 3}, torch::kFloat64);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) t[a][b] = m(a, b);
    }
    EXPECT_LT((rot6d_to_matrix(matrix_to_rot6d(t)) - t).abs().max().item<double>(), 1e-12);
  }
}

TEST(TensorKinematics, ForwardKinematicsMatchesEigen) {
  const auto tree = KinematicTree::default_body();
  const auto skel = TensorSkeleton::from(tree, torch::kFloat64);
  std::mt19937_64 rng(7);
  Motion m;
  m.pose = random_pose(rng, 6, tree.size());
  m.translation = RowMatrixXd::Random(6, 3);
  const auto frames = forward_kinematics(m, tree);
  const auto fk = forward_kinematics(to_tensor(m.pose, torch::kFloat64),
                                     to_tensor(m.translation, torch::kFloat64), skel);
  ASSERT_EQ(fk.positions.sizes(), (torch::IntArrayRef{6, 22, 3}));
  for (int t = 0; t < 6; ++t) {
    for (int j = 0; j < tree.size(); ++j) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(fk.positions[t][j][c].item<double>(), frames[t].positions[j][c], 1e-12);
        for (int d = 0; d < 3; ++d) {
          EXPECT_NEAR(fk.rotations[t][j][c][d].item<double>(), frames[t].rotations[j](c, d),
                      1e-12);
        }
      }
    }
  }
}

TEST(TensorKinematics, HeadAnchoredPlacesHeadOnTarget) {
  const auto tree = KinematicTree::default_body();
  const auto skel = TensorSkeleton::from(tree, torch::kFloat64);
  std::mt19937_64 rng(9);
  const auto pose = to_tensor(random_pose(rng, 4, tree.size()), torch::kFloat64);
  const auto head = torch::randn({4, 3}, torch::kFloat64);
  const auto pos = head_anchored_positions(pose, head, skel);
  EXPECT_LT((pos.select(-2, joints::kHead) - head).abs().max().item<double>(), 1e-12);
  const auto trans = head_anchored_translation(pose, head, skel);
  const auto again = forward_kinematics(pose, trans, skel).positions;
  EXPECT_LT((again - pos).abs().max().item<double>(), 1e-12);
}

TEST(TensorKinematics, SegmentDistanceMatchesEigen) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    Vec3 p(u(rng), u(rng), u(rng)), a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    auto tp = torch::tensor({p.x(), p.y(), p.z()}, torch::kFloat64);
    auto ta = torch::tensor({a.x(), a.y(), a.z()}, torch::kFloat64);
    auto tb = torch::tensor({b.x(), b.y(), b.z()}, torch::kFloat64);
    EXPECT_NEAR(point_segment_distance(tp, ta, tb).item<double>(),
                point_segment_distance(p, a, b), 1e-12);
  }
}

TEST(TensorKinematics, MatrixConversionRoundTrip) {
  RowMatrixXd m = RowMatrixXd::Random(5, 7);
  EXPECT_EQ(to_matrix(to_tensor(m, torch::kFloat64)), m);
}

}  // namespace
}  // namespace sparsepose
