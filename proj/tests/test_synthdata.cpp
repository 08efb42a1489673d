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


#include "sparsepose/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "sparsepose/npy.hpp"

namespace sparsepose {
namespace {

const KinematicTree& body() {
  static const KinematicTree tree = KinematicTree::default_body();
  return tree;
}

SceneSpec interaction_spec() {
  SceneSpec s;
  s.min_boxes = 1;
  s.min_walls = 1;
  return s;
}

// Brute-force distance from p to the surface of an axis-aligned box by
// projecting onto each of its six face rectangles.
double brute_surface_distance(const ScenePrimitive& prim, const Vec3& p) {
  const Vec3 lo = prim.min_corner(), hi = prim.max_corner();
  double best = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    for (double plane : {lo[axis], hi[axis]}) {
      Vec3 q = p.cwiseMax(lo).cwiseMin(hi);
      q[axis] = plane;
      best = std::min(best, (p - q).norm());
    }
  }
  return best;
}

TEST(SignedDistance, BoxValues) {
  ScenePrimitive b;
  b.center = Vec3(0, 0, 0.5);
  b.half_extents = Vec3(0.5, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(signed_distance(b, Vec3(0, 0, 1.2)), 0.2);
  EXPECT_DOUBLE_EQ(signed_distance(b, Vec3(0, 0, 0.9)), -0.1);
  EXPECT_NEAR(signed_distance(b, Vec3(0.8, 0.9, 0.5)), 0.5, 1e-12);
}

TEST(GenerateScene, DeterministicInSeed) {
  const Scene a = generate_scene(17, interaction_spec());
  const Scene b = generate_scene(17, interaction_spec());
  const Scene c = generate_scene(18, interaction_spec());
  EXPECT_TRUE(a.cloud.points == b.cloud.points);
  EXPECT_EQ(a.cloud.ground_mask, b.cloud.ground_mask);
  EXPECT_FALSE(a.cloud.points.rows() == c.cloud.points.rows() && a.cloud.points == c.cloud.points);
}

TEST(GenerateScene, PointsLieOnSurfacesAndMaskMatches) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Scene s = generate_scene(seed, interaction_spec());
    ASSERT_GE(s.primitives.size(), 3u);
    for (int i = 0; i < s.cloud.size(); ++i) {
      const Vec3 p = s.cloud.points.row(i).transpose();
      double best = std::numeric_limits<double>::infinity();
      for (const auto& prim : s.primitives) best = std::min(best, brute_surface_distance(prim, p));
      ASSERT_LE(best, 1e-3) << "point " << i;
      EXPECT_EQ(s.cloud.ground_mask[i] != 0, std::abs(p.z() - s.z_ground) <= kGroundBand);
    }
  }
}

TEST(GenerateScene, PropsDoNotOverlapAndDensityHolds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_scene(seed, interaction_spec());
    double exposed = 0.0;
    for (std::size_t a = 1; a < s.primitives.size(); ++a) {
      for (std::size_t b = a + 1; b < s.primitives.size(); ++b) {
        const auto& pa = s.primitives[a];
        const auto& pb = s.primitives[b];
        const Vec3 gap = (pa.center - pb.center).cwiseAbs() - pa.half_extents - pb.half_extents;
        EXPECT_TRUE(gap.x() > 0 || gap.y() > 0);
      }
    }
    const Vec3 room = s.primitives[0].half_extents;
    exposed = 4 * room.x() * room.y();
    for (std::size_t a = 1; a < s.primitives.size(); ++a) {
      const Vec3 h = s.primitives[a].half_extents;
      exposed += 4 * h.x() * h.y() * 0.0;  // footprint swapped for top face
      exposed += 8 * h.z() * (h.x() + h.y());
    }
    EXPECT_GE(s.cloud.size() / exposed, 500.0 * 0.95);
  }
}

TEST(GenerateScene, InvalidRangesRejected) {
  SceneSpec s;
  s.min_boxes = 3;
  s.max_boxes = 1;
  EXPECT_THROW(generate_scene(1, s), ValidationError);
}

TEST(LabelContacts, MatchesBruteForceOracle) {
  const Scene s = generate_scene(5, interaction_spec());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.5, 2.5), uz(-0.05, 1.2);
  std::vector<FramePose> frames(6);
  for (auto& f : frames) {
    f.positions.resize(kNumJoints);
    for (auto& p : f.positions) p = Vec3(u(rng), u(rng), uz(rng));
  }
  frames[0].positions[0] = Vec3(0.0, 0.0, 1.0 + s.z_ground + 1.0);  // far from everything
  frames[0].positions[1] = Vec3(2.4, 2.4, s.z_ground + 0.01);       // on the floor
  const ContactMatrix c = label_contacts(frames, s.primitives);
  for (int t = 0; t < 6; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& prim : s.primitives) {
        best = std::min(best, brute_surface_distance(prim, frames[t].positions[j]));
      }
      EXPECT_EQ(c(t, j) != 0, best <= kContactThreshold);
    }
  }
  EXPECT_EQ(c(0, 0), 0);
  EXPECT_EQ(c(0, 1), 1);
}

}  // namespace

void PrintTo(MotionKind kind, std::ostream* os) { *os << to_string(kind); }

namespace {

class MotionKinds : public ::testing::TestWithParam<MotionKind> {};

TEST_P(MotionKinds, ValidDeterministicAndReproducible) {
  const MotionKind kind = GetParam();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Scene scene = generate_scene(100 + seed, interaction_spec());
    const auto a = generate_motion(seed, scene, kind, body());
    const auto b = generate_motion(seed, scene, kind, body());
    EXPECT_TRUE(a.motion.pose == b.motion.pose);
    EXPECT_TRUE(a.motion.translation == b.motion.translation);
    EXPECT_GE(a.motion.frames(), kWindow);
    EXPECT_TRUE(a.motion.pose == round_to_f32(a.motion.pose));

    const auto frames = forward_kinematics(a.motion, body());
    EXPECT_LE(max_joint_penetration(frames, scene.primitives), kMaxPenetration);
    EXPECT_TRUE(label_contacts(frames, scene.primitives) == a.contacts);
    // Feet never leave the ground entirely.
    for (int t = 0; t < a.motion.frames(); ++t) {
      int feet = 0;
      for (int j : joints::kFeet) feet += a.contacts(t, j);
      EXPECT_GT(feet, 0) << "frame " << t;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(All, MotionKinds,
                         ::testing::Values(MotionKind::kWalk, MotionKind::kSquat,
                                           MotionKind::kSitOnBox, MotionKind::kReachWall),
                         [](const auto& info) { return to_string(info.param); });

TEST(GenerateMotion, WalkAlternatesFeetWithoutOtherContacts) {
  SceneSpec flat;
  flat.max_boxes = 0;
  flat.max_walls = 0;
  const Scene scene = generate_scene(9, flat);
  const auto seq = generate_motion(9, scene, MotionKind::kWalk, body());
  const auto frames = forward_kinematics(seq.motion, body());
  // Recompute labels from geometry with the floor only.
  const ContactMatrix c = label_contacts(frames, scene.primitives);
  int left_off = 0, right_off = 0, both_on = 0;
  for (int t = 0; t < seq.motion.frames(); ++t) {
    const bool left = c(t, joints::kLeftFoot) || c(t, joints::kLeftAnkle);
    const bool right = c(t, joints::kRightFoot) || c(t, joints::kRightAnkle);
    left_off += !left;
    right_off += !right;
    both_on += left && right;
    for (int j = 0; j < kNumJoints; ++j) {
      const bool foot = std::find(std::begin(joints::kFeet), std::end(joints::kFeet), j) !=
                        std::end(joints::kFeet);
      if (!foot) {
        EXPECT_EQ(c(t, j), 0) << "joint " << j << " frame " << t;
      }
    }
  }
  EXPECT_GT(left_off, 5);
  EXPECT_GT(right_off, 5);
  // Swing phases of the two feet alternate: some frames have one foot off.
  EXPECT_LT(both_on, seq.motion.frames());
}

TEST(GenerateMotion, SitEndsWithPelvisOnBoxTop) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scene scene = generate_scene(200 + seed, interaction_spec());
    const auto seq = generate_motion(seed, scene, MotionKind::kSitOnBox, body());
    const auto frames = forward_kinematics(seq.motion, body());
    const Vec3 pelvis = frames.back().positions[joints::kPelvis];
    bool on_top = false;
    for (const auto& p : scene.primitives) {
      if (p.kind != PrimitiveKind::kBox) continue;
      const bool over = std::abs(pelvis.x() - p.center.x()) <= p.half_extents.x() &&
                        std::abs(pelvis.y() - p.center.y()) <= p.half_extents.y();
      if (over && std::abs(pelvis.z() - p.top()) <= kContactThreshold) on_top = true;
    }
    EXPECT_TRUE(on_top);
    EXPECT_EQ(seq.contacts(seq.motion.frames() - 1, joints::kPelvis), 1);
  }
}

TEST(GenerateMotion, ReachTouchesWall) {
  const Scene scene = generate_scene(300, interaction_spec());
  const auto seq = generate_motion(3, scene, MotionKind::kReachWall, body());
  int touching = 0;
  for (int t = 0; t < seq.motion.frames(); ++t) {
    touching += seq.contacts(t, joints::kLeftWrist) || seq.contacts(t, joints::kRightWrist);
  }
  EXPECT_GT(touching, 10);
}

TEST(GenerateMotion, MissingPropIsRejected) {
  SceneSpec flat;
  flat.max_boxes = 0;
  flat.max_walls = 0;
  const Scene scene = generate_scene(1, flat);
  EXPECT_THROW(generate_motion(1, scene, MotionKind::kSitOnBox, body()), ValidationError);
  EXPECT_THROW(generate_motion(1, scene, MotionKind::kReachWall, body()), ValidationError);
}

TEST(MotionKind, StringRoundTrip) {
  for (auto k : {MotionKind::kWalk, MotionKind::kSquat, MotionKind::kSitOnBox, MotionKind::kReachWall}) {
    EXPECT_EQ(motion_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(motion_kind_from_string("dance"), ConfigError);
}

TEST(TrackerNoise, OffByDefaultAndSeeded) {
  RowMatrixXd x = RowMatrixXd::Zero(5, kObsDim);
  for (int k = 0; k < kNumTrackers; ++k) {
    x.col(k * kTrackerChannels + 3).setOnes();
    x.col(k * kTrackerChannels + 7).setOnes();
  }
  RowMatrixXd y = x;
  add_tracker_noise(y, TrackerNoise{}, 1);
  EXPECT_TRUE(y == x);
  TrackerNoise on;
  on.enabled = true;
  RowMatrixXd a = x, b = x;
  add_tracker_noise(a, on, 4);
  add_tracker_noise(b, on, 4);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == x);
  EXPECT_LT((a - x).cwiseAbs().maxCoeff(), 0.1);
}

TEST(MakeDataset, LayoutRoundTripAndDisjointSplits) {
  const auto root = std::filesystem::temp_directory_path() / "sp_dataset_test";
  std::filesystem::remove_all(root);
  make_dataset(6, 4, 77, root, DatasetSpec{}, body());
  int dirs = 0;
  for (const auto& split : {"train", "test"}) {
    for (const auto& e : std::filesystem::directory_iterator(root / split)) {
      ++dirs;
      for (const char* f : {"pose.npy", "translation.npy", "contacts.npy", "scene.json", "cloud.spc"}) {
        EXPECT_TRUE(std::filesystem::exists(e.path() / f)) << e.path() << "/" << f;
      }
    }
  }
  EXPECT_EQ(dirs, 10);
  const Dataset ds = load_dataset(root);
  EXPECT_EQ(ds.train.size(), 6u);
  EXPECT_EQ(ds.test.size(), 4u);
  EXPECT_EQ(ds.manifest.at("counts").at("train"), 6);
  EXPECT_EQ(ds.manifest.at("fps"), 30.0);
  EXPECT_TRUE(ds.manifest.contains("skeleton_hash"));
  std::set<std::uint64_t> train_seeds, test_seeds;
  for (const auto& s : ds.train) train_seeds.insert(s.seed);
  for (const auto& s : ds.test) test_seeds.insert(s.seed);
  for (auto s : test_seeds) EXPECT_EQ(train_seeds.count(s), 0u);

  // Regenerating in memory reproduces the stored arrays bit-exactly.
  const auto& first = ds.train.front();
  const auto frames = forward_kinematics(first.motion, ds.tree);
  EXPECT_TRUE(label_contacts(frames, first.scene.primitives) == first.contacts);
  const auto again = root.string() + "_again";
  std::filesystem::remove_all(again);
  make_dataset(6, 4, 77, again, DatasetSpec{}, body());
  const Dataset ds2 = load_dataset(again);
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_TRUE(ds.train[i].motion.pose == ds2.train[i].motion.pose);
    EXPECT_TRUE(ds.train[i].scene.cloud.points == ds2.train[i].scene.cloud.points);
  }
  std::filesystem::remove_all(root);
  std::filesystem::remove_all(again);
}

TEST(MakeDataset, SequenceRoundTripIsBitExact) {
  const Scene scene = generate_scene(44, interaction_spec());
  auto seq = generate_motion(44, scene, MotionKind::kSitOnBox, body());
  seq.name = "seq_0000";
  const auto dir = std::filesystem::temp_directory_path() / "sp_seq_rt";
  save_sequence(seq, dir);
  const auto back = load_sequence(dir);
  EXPECT_TRUE(back.motion.pose == seq.motion.pose);
  EXPECT_TRUE(back.motion.translation == seq.motion.translation);
  EXPECT_TRUE(back.contacts == seq.contacts);
  EXPECT_TRUE(back.scene.cloud.points == seq.scene.cloud.points);
  EXPECT_EQ(back.scene.primitives.size(), seq.scene.primitives.size());
  EXPECT_EQ(back.kind, seq.kind);
  std::filesystem::remove_all(dir);
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, 1, 0), derive_seed(1, 2, 0));
  EXPECT_NE(derive_seed(1, 1, 0), derive_seed(1, 1, 1));
  EXPECT_EQ(derive_seed(5, 3, 2), derive_seed(5, 3, 2));
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace sparsepose
