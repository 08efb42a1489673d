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


#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sparsepose/objectives.hpp"
#include "sparsepose/skeleton.hpp"
#include "sparsepose/stage1.hpp"
#include "sparsepose/tensor_kinematics.hpp"
#include "torch_util.hpp"

namespace sparsepose {
namespace {

using testing::gradient_error;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Joint positions (1, J, 3) of the upright rest body.
torch::Tensor rest_positions(const TensorSkeleton& skel) {
  const auto pose = to_tensor(RowMatrixXd(standing_rest_pose()), torch::kFloat64);
  return forward_kinematics(pose, torch::zeros({1, 3}, torch::kFloat64), skel).positions;
}

class Objectives : public ::testing::Test {
 protected:
  KinematicTree tree = KinematicTree::default_body();
  TensorSkeleton skel = TensorSkeleton::from(tree, torch::kFloat64);
};

TEST(FinalMotionLoss, Values) {
  const auto gt = torch::randn({kWindow, kPoseDim}, torch::kFloat64);
  EXPECT_EQ(final_motion_loss(gt, gt).item<double>(), 0.0);
  auto off = gt.clone();
  off[7][100] += 3.0;
  EXPECT_NEAR(final_motion_loss(off, gt).item<double>(), 3.0, 1e-12);
  const auto pred = torch::randn({kWindow, kPoseDim}, torch::kFloat64);
  double ss = 0;
  for (int t = 0; t < kWindow; ++t) {
    for (int c = 0; c < kPoseDim; ++c) {
      const double d = pred[t][c].item<double>() - gt[t][c].item<double>();
      ss += d * d;
    }
  }
  EXPECT_NEAR(final_motion_loss(pred, gt).item<double>(), std::sqrt(ss), 1e-10);
  EXPECT_THROW(final_motion_loss(pred, gt.narrow(0, 0, 3)), ShapeError);
}

TEST_F(Objectives, CollisionSinglePointAtJointCenter) {
  const auto pos = rest_positions(skel);  // (1, 22, 3)
  auto pts = torch::zeros({1000, 3}, torch::kFloat64);
  pts.select(1, 2).fill_(10.0);
  pts[0] = pos[0][joints::kLeftKnee];
  const double l = collision_loss(pos, pts, skel).item<double>();
  EXPECT_NEAR(l, sigmoid(1.0) / 1000.0, 1e-9);
  EXPECT_NEAR(l, 7.3106e-4, 1e-8);
}

TEST_F(Objectives, CollisionZeroCases) {
  const auto pos = rest_positions(skel);
  auto far = torch::randn({200, 3}, torch::kFloat64);
  far.select(1, 2).add_(5.0);
  EXPECT_EQ(collision_loss(pos, far, skel).item<double>(), 0.0);
  EXPECT_EQ(collision_loss(pos, torch::zeros({0, 3}, torch::kFloat64), skel).item<double>(), 0.0);
  auto inside = torch::zeros({1, 3}, torch::kFloat64);
  inside[0] = pos[0][joints::kSpine2];
  EXPECT_GT(collision_loss(pos, inside, skel).item<double>(), 0.0);
  EXPECT_EQ(collision_loss(pos.unsqueeze(0), inside.unsqueeze(0), skel,
                           torch::zeros({1}, torch::kFloat64))
                .item<double>(),
            0.0);
}

TEST_F(Objectives, CollisionVanishesBeyondMaxRadius) {
  const auto pos = rest_positions(skel);
  const double rmax = skel.radii.max().item<double>();
  const double top = pos.select(-1, 2).max().item<double>();
  auto above = torch::randn({100, 3}, torch::kFloat64) * 0.2;
  above.select(1, 2).fill_(top + rmax + 0.01);
  EXPECT_EQ(collision_loss(pos, above, skel).item<double>(), 0.0);
}

TEST_F(Objectives, CollisionIncreasesWithDepth) {
  const auto pos = rest_positions(skel);
  // Walk a point from the thigh surface toward the bone axis.
  const auto hip = pos[0][joints::kLeftHip];
  const auto knee = pos[0][joints::kLeftKnee];
  const auto mid = (hip + knee) / 2;
  const double r = skel.radii[joints::kLeftKnee].item<double>();
  const auto dir = torch::tensor({0.0, 1.0, 0.0}, torch::kFloat64);
  double prev = -1;
  for (double depth = 0.05; depth < 0.95; depth += 0.1) {
    const auto p = (mid + dir * r * (1.0 - depth)).unsqueeze(0);
    const double l = collision_loss(pos, p, skel).item<double>();
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST_F(Objectives, CollisionGradient) {
  const auto pos = rest_positions(skel);
  auto pts = pos[0].index_select(0, torch::tensor({3, 6, 9, 4}, torch::kInt64)).clone();
  pts += torch::tensor({0.02, -0.01, 0.015}, torch::kFloat64);
  auto far = torch::full({4, 3}, 3.0, torch::kFloat64);
  pts = torch::cat({pts, far});
  auto by_points = [&](const torch::Tensor& p) { return collision_loss(pos, p, skel); };
  auto by_joints = [&](const torch::Tensor& j) { return collision_loss(j, pts, skel); };
  EXPECT_LT(gradient_error(by_points, pts), 1e-4);
  EXPECT_LT(gradient_error(by_joints, pos), 1e-4);
}

TEST_F(Objectives, FootLossesPerfectFit) {
  auto pos = rest_positions(skel).repeat({4, 1, 1});
  pos.select(-1, 2).sub_(pos.select(-1, 2).min());
  auto contacts = torch::zeros({4, 22}, torch::kFloat64);
  for (int f : {joints::kLeftFoot, joints::kRightFoot}) {
    contacts.select(1, f).fill_(1.0);
    pos.select(1, f).select(-1, 2).fill_(0.0);
  }
  const auto l = foot_losses(pos, pos, contacts, torch::zeros({}, torch::kFloat64));
  EXPECT_EQ(l.contact.item<double>(), 0.0);
  EXPECT_EQ(l.height.item<double>(), 0.0);
  EXPECT_EQ(l.ground.item<double>(), 0.0);
}

TEST_F(Objectives, FootHeightFloatingFoot) {
  auto pos = torch::ones({1, 22, 3}, torch::kFloat64);
  pos[0][joints::kLeftFoot][2] = 0.05;
  auto contacts = torch::zeros({1, 22}, torch::kFloat64);
  contacts[0][joints::kLeftFoot] = 1.0;
  const auto l = foot_losses(pos, pos, contacts, torch::zeros({}, torch::kFloat64));
  EXPECT_NEAR(l.height.item<double>(), 0.05, 1e-12);
  EXPECT_EQ(l.ground.item<double>(), 0.0);
  // Unconditional variant spreads the four feet over every frame.
  const auto all = foot_losses(pos, pos, contacts, torch::zeros({}, torch::kFloat64), true);
  EXPECT_NEAR(all.height.item<double>(), (0.05 + 3.0) / 4.0, 1e-12);
}

TEST_F(Objectives, GroundPenetrationOfLowestJoint) {
  auto pos = torch::ones({kWindow, 22, 3}, torch::kFloat64);
  pos.select(1, joints::kRightAnkle).select(-1, 2).fill_(-0.02);
  const auto l = foot_losses(pos, pos, torch::zeros({kWindow, 22}, torch::kFloat64),
                             torch::zeros({}, torch::kFloat64));
  EXPECT_NEAR(l.ground.item<double>(), 0.02, 1e-12);
  EXPECT_EQ(l.contact.item<double>(), 0.0);
}

TEST_F(Objectives, FootLossGradients) {
  torch::manual_seed(1);
  const auto gt = torch::randn({3, 22, 3}, torch::kFloat64);
  const auto pred = gt + torch::randn({3, 22, 3}, torch::kFloat64) * 0.1;
  const auto contacts = torch::randint(0, 2, {3, 22}, torch::kFloat64);
  const auto zg = torch::zeros({}, torch::kFloat64);
  auto fc = [&](const torch::Tensor& p) { return foot_losses(p, gt, contacts, zg).contact; };
  auto gfh = [&](const torch::Tensor& p) { return foot_losses(p, gt, contacts, zg).height; };
  auto gp = [&](const torch::Tensor& p) { return foot_losses(p, gt, contacts, zg).ground; };
  EXPECT_LT(gradient_error(fc, pred), 1e-4);
  EXPECT_LT(gradient_error(gfh, pred), 1e-4);
  EXPECT_LT(gradient_error(gp, pred), 1e-4);
}

TEST(ContactLoss, Values) {
  const auto gt = torch::randint(0, 2, {kWindow, 22}, torch::kFloat64);
  const auto near = (gt - 1e-6).abs();
  EXPECT_LT(contact_loss(near, gt).item<double>(), 1e-5);
  EXPECT_NEAR(contact_loss(torch::full_like(gt, 0.5), gt).item<double>(), std::log(2.0), 1e-12);
  const auto exact = contact_loss(gt, gt).item<double>();
  EXPECT_GE(exact, 0.0);
  EXPECT_LT(exact, 1e-5);
}

TEST(ContactLoss, GradientPushesTowardTarget) {
  const auto gt = torch::tensor({{1.0, 0.0, 1.0, 0.0}}, torch::kFloat64);
  const auto c = torch::tensor({{0.3, 0.6, 0.8, 0.1}}, torch::kFloat64);
  auto f = [&](const torch::Tensor& x) { return contact_loss(x, gt); };
  const auto g = testing::numeric_gradient(f, c);
  EXPECT_LT(g[0][0].item<double>(), 0.0);
  EXPECT_GT(g[0][1].item<double>(), 0.0);
  EXPECT_LT(g[0][2].item<double>(), 0.0);
  EXPECT_GT(g[0][3].item<double>(), 0.0);
  EXPECT_LT(gradient_error(f, c), 1e-4);
}

TEST(PositionLosses, Values) {
  const auto gt = torch::randn({kWindow, 22, 3}, torch::kFloat64);
  auto l = position_losses(gt, gt);
  EXPECT_EQ(l.all.item<double>(), 0.0);
  EXPECT_EQ(l.hands.item<double>(), 0.0);
  auto off = gt.clone();
  off[4][joints::kLeftWrist] += 0.01;
  EXPECT_NEAR(position_losses(off, gt).hands.item<double>(), 0.03, 1e-12);
  const auto pred = torch::randn({kWindow, 22, 3}, torch::kFloat64);
  double ss = 0, l1 = 0;
  for (int t = 0; t < kWindow; ++t) {
    for (int j = 0; j < 22; ++j) {
      for (int c = 0; c < 3; ++c) {
        const double d = pred[t][j][c].item<double>() - gt[t][j][c].item<double>();
        ss += d * d;
        if (j == joints::kLeftWrist || j == joints::kRightWrist) l1 += std::abs(d);
      }
    }
  }
  l = position_losses(pred, gt);
  EXPECT_NEAR(l.all.item<double>(), std::sqrt(ss), 1e-10);
  EXPECT_NEAR(l.hands.item<double>(), l1, 1e-10);
  auto all = [&](const torch::Tensor& p) { return position_losses(p, gt).all; };
  auto hands = [&](const torch::Tensor& p) { return position_losses(p, gt).hands; };
  EXPECT_LT(gradient_error(hands, pred), 1e-4);
  EXPECT_LT(gradient_error(all, pred), 1e-4);
}

TEST(TotalObjective, UnitTermsGiveWeightSum) {
  LossTerms t;
  const auto one = torch::ones({}, torch::kFloat64);
  t.stage1 = t.final_motion = t.posi = t.hand = t.foot_contact = t.contact = t.foot_height =
      t.ground = t.collision = one;
  const auto r = total_stage2(t, LossWeights{});
  EXPECT_NEAR(r.total.item<double>(), 8.35, 1e-12);
  LossTerms z;
  z.stage1 = z.posi = torch::zeros({}, torch::kFloat64);
  EXPECT_EQ(total_stage2(z, LossWeights{}).total.item<double>(), 0.0);
}

TEST(TotalObjective, DefaultWeights) {
  const LossWeights w;
  EXPECT_EQ(w.posi, 2.0);
  EXPECT_EQ(w.hand, 1.0);
  EXPECT_EQ(w.foot_contact, 0.75);
  EXPECT_EQ(w.contact, 0.75);
  EXPECT_EQ(w.foot_height, 0.75);
  EXPECT_EQ(w.ground, 1.0);
  EXPECT_EQ(w.collision, 0.1);
  EXPECT_EQ(w.motion, 1.0);
  EXPECT_EQ(w.uncertainty, 0.001);
}

TEST(TotalObjective, RecomputationAndLinearity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 2);
  LossWeights w;
  w.posi = 0.5;
  w.collision = 3.0;
  auto s = [&] { return torch::full({}, u(rng), torch::kFloat64); };
  LossTerms t{s(), s(), s(), s(), s(), s(), s(), s(), s()};
  const auto r = total_stage2(t, w);
  const auto v = r.values();
  const double manual = v.at("stage1") + v.at("final_motion") + 0.5 * v.at("posi") +
                        1.0 * v.at("hand") + 0.75 * v.at("foot_contact") +
                        0.75 * v.at("contact") + 0.75 * v.at("foot_height") +
                        1.0 * v.at("ground") + 3.0 * v.at("collision");
  EXPECT_NEAR(v.at("total"), manual, 1e-12);
  auto t2 = t;
  t2.collision = t.collision + 1.0;
  EXPECT_NEAR(total_stage2(t2, w).total.item<double>() - r.total.item<double>(), 3.0, 1e-12);
  auto grad = [&](const torch::Tensor& x) {
    auto t3 = t;
    t3.hand = x;
    return total_stage2(t3, w).total;
  };
  EXPECT_LT(gradient_error(grad, t.hand), 1e-4);
  EXPECT_EQ(r.to_json().size(), 10u);
}

TEST(TotalObjective, RejectsNonFiniteAndBadWeights) {
  LossTerms t;
  t.posi = torch::full({}, std::nan(""), torch::kFloat64);
  EXPECT_THROW(total_stage2(t, LossWeights{}), NumericError);
  auto j = LossWeights{}.to_json();
  j["ground"] = -1.0;
  EXPECT_THROW(LossWeights::from_json(j), ConfigError);
  LossWeights w;
  w.foot_height_all_frames = true;
  w.collision = 0.25;
  EXPECT_EQ(LossWeights::from_json(w.to_json()).to_json(), w.to_json());
}

}  // namespace
}  // namespace sparsepose
