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


#include "sparsepose/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace sparsepose {
namespace {

using testing::axis_rotation;
using testing::random_pose;
using testing::random_rotation;

constexpr double kPi = std::numbers::pi;

TEST(Mpjre, ZeroAndQuarterTurn) {
  std::mt19937_64 rng(1);
  const RowMatrixXd gt = random_pose(rng, 6, kNumJoints);
  EXPECT_NEAR(mpjre(gt, gt), 0.0, 1e-5);
  RowMatrixXd pred = gt;
  const Mat3 rz = axis_rotation(Vec3::UnitZ(), kPi / 2);
  for (int t = 0; t < 6; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      const Mat3 r = rot6d_to_matrix(gt.block<1, 6>(t, 6 * j).transpose());
      pred.block<1, 6>(t, 6 * j) = matrix_to_rot6d(r * rz).transpose();
    }
  }
  EXPECT_NEAR(mpjre(pred, gt), 90.0, 1e-9);
}

TEST(Mpjre, AxisAngleOracle) {
  std::mt19937_64 rng(2);
  const RowMatrixXd a = random_pose(rng, 5, kNumJoints);
  const RowMatrixXd b = random_pose(rng, 5, kNumJoints);
  double sum = 0.0;
  for (int t = 0; t < 5; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      const Mat3 ra = rot6d_to_matrix(a.block<1, 6>(t, 6 * j).transpose());
      const Mat3 rb = rot6d_to_matrix(b.block<1, 6>(t, 6 * j).transpose());
      sum += Eigen::AngleAxisd(ra.transpose() * rb).angle();
    }
  }
  EXPECT_NEAR(mpjre(a, b), sum / (5 * kNumJoints) * 180.0 / kPi, 1e-7);
}

TEST(Mpjpe, UniformOffsetAndOracle) {
  const RowMatrixXd gt = RowMatrixXd::Random(10, 3 * kNumJoints);
  RowMatrixXd pred = gt;
  for (int j = 0; j < kNumJoints; ++j) pred.col(3 * j).array() += 0.03;
  EXPECT_NEAR(mpjpe(pred, gt), 30.0, 1e-9);
  EXPECT_EQ(mpjpe(gt, gt), 0.0);

  const RowMatrixXd other = RowMatrixXd::Random(10, 3 * kNumJoints);
  double sum = 0.0;
  for (int t = 0; t < 10; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += std::pow(other(t, 3 * j + c) - gt(t, 3 * j + c), 2);
      sum += std::sqrt(s);
    }
  }
  EXPECT_NEAR(mpjpe(other, gt), 1000.0 * sum / (10 * kNumJoints), 1e-9);
}

TEST(Mpjpe, TranslationCovariance) {
  const RowMatrixXd gt = RowMatrixXd::Random(7, 3 * kNumJoints);
  const Vec3 t(0.01, -0.02, 0.005);
  RowMatrixXd pred = gt;
  for (int j = 0; j < kNumJoints; ++j) pred.middleCols(3 * j, 3).rowwise() += t.transpose();
  EXPECT_NEAR(mpjpe(pred, gt), 1000.0 * t.norm(), 1e-9);
}

TEST(Mpjve, OffsetInvarianceAndOracle) {
  const RowMatrixXd gt = RowMatrixXd::Random(12, 3 * kNumJoints);
  RowMatrixXd pred = gt.array() + 0.25;
  EXPECT_NEAR(mpjve(pred, gt, 30.0), 0.0, 1e-9);
  EXPECT_EQ(mpjve(gt, gt, 30.0), 0.0);

  const RowMatrixXd other = RowMatrixXd::Random(12, 3 * kNumJoints);
  double sum = 0.0;
  int n = 0;
  for (int t = 1; t < 12; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      Vec3 e;
      for (int c = 0; c < 3; ++c) {
        e[c] = 30.0 * ((other(t, 3 * j + c) - other(t - 1, 3 * j + c)) -
                       (gt(t, 3 * j + c) - gt(t - 1, 3 * j + c)));
      }
      sum += e.norm();
      ++n;
    }
  }
  EXPECT_NEAR(mpjve(other, gt, 30.0), 1000.0 * sum / n, 1e-7);
}

RowMatrixXd trajectory(int frames, const std::function<Vec3(double)>& f) {
  RowMatrixXd p(frames, 3 * kNumJoints);
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      p.block<1, 3>(t, 3 * j) = (f(t / 30.0) + Vec3(0.1 * j, 0.0, 0.0)).transpose();
    }
  }
  return p;
}

TEST(Jitter, AffineAndQuadraticMotionHaveNoJerk) {
  const auto linear = trajectory(50, [](double t) { return Vec3(1.2 * t, -0.4 * t, 0.3); });
  const auto quadratic = trajectory(50, [](double t) { return Vec3(0.5 * t * t, t, -2.0 * t * t); });
  EXPECT_NEAR(jitter(linear, 30.0), 0.0, 1e-6);
  EXPECT_NEAR(jitter(quadratic, 30.0), 0.0, 1e-6);
}

TEST(Jitter, SinusoidMatchesAnalyticJerk) {
  // x = A sin(w t): |x'''| = A w^3 |cos(w t)|, whose mean over whole periods
  // is A w^3 * 2 / pi.
  const double amplitude = 0.01, w = 2.0 * kPi;
  const auto p = trajectory(30 * 10 + 3, [&](double t) { return Vec3(amplitude * std::sin(w * t), 0, 0); });
  const double analytic = amplitude * std::pow(w, 3) * 2.0 / kPi / 100.0;
  EXPECT_NEAR(jitter(p, 30.0) / analytic, 1.0, 0.02);
}

TEST(MetricsAccumulator, StreamingEqualsOneShot) {
  std::mt19937_64 rng(4);
  const RowMatrixXd gp = random_pose(rng, 30, kNumJoints), pp = random_pose(rng, 30, kNumJoints);
  const RowMatrixXd gx = RowMatrixXd::Random(30, 3 * kNumJoints);
  const RowMatrixXd px = RowMatrixXd::Random(30, 3 * kNumJoints);
  MetricsAccumulator one;
  one.add(pp, gp, px, gx);
  const auto r1 = one.report();
  EXPECT_NEAR(r1.mpjre_deg, mpjre(pp, gp), 1e-9);
  EXPECT_NEAR(r1.mpjpe_mm, mpjpe(px, gx), 1e-9);
  EXPECT_NEAR(r1.mpjve_mm_s, mpjve(px, gx), 1e-9);
  EXPECT_NEAR(r1.jitter_e2_m_s3, jitter(px), 1e-9);

  // Two sequences in either order give identical pooled results.
  MetricsAccumulator ab, ba;
  ab.add(pp.topRows(12), gp.topRows(12), px.topRows(12), gx.topRows(12));
  ab.add(pp.bottomRows(18), gp.bottomRows(18), px.bottomRows(18), gx.bottomRows(18));
  ba.add(pp.bottomRows(18), gp.bottomRows(18), px.bottomRows(18), gx.bottomRows(18));
  ba.add(pp.topRows(12), gp.topRows(12), px.topRows(12), gx.topRows(12));
  EXPECT_NEAR(ab.report().mpjpe_mm, ba.report().mpjpe_mm, 1e-9);
  EXPECT_NEAR(ab.report().jitter_e2_m_s3, ba.report().jitter_e2_m_s3, 1e-9);
  EXPECT_NEAR(ab.report().mpjpe_mm, r1.mpjpe_mm, 1e-9);
  EXPECT_EQ(ab.report().frames, 30);
  EXPECT_EQ(ab.report().sequences, 2);
}

TEST(MetricsReport, SchemaAndFiles) {
  MetricsReport r;
  r.mpjre_deg = 1.5;
  r.mpjpe_mm = 30.0;
  r.frames = 40;
  r.sequences = 1;
  const auto j = r.to_json();
  for (const char* key : {"mpjre_deg", "mpjpe_mm", "mpjve_mm_s", "jitter_e2_m_s3", "frames", "sequences"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const auto back = MetricsReport::from_json(j);
  EXPECT_EQ(back.mpjpe_mm, 30.0);
  EXPECT_NE(r.to_text().find("mpjpe_mm = 30"), std::string::npos);
  const auto stem = std::filesystem::temp_directory_path() / "sp_metrics";
  r.write(stem);
  EXPECT_TRUE(std::filesystem::exists(stem.string() + ".txt"));
  EXPECT_TRUE(std::filesystem::exists(stem.string() + ".json"));
}

}  // namespace
}  // namespace sparsepose
