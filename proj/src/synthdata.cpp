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
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include <Eigen/Geometry>

#include "sparsepose/npy.hpp"
#include "sparsepose/rotations.hpp"

namespace sparsepose {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFootClearance = 0.015;
constexpr double kSeatLift = 0.045;  // pelvis joint above the seat surface

double deg(double d) { return d * kPi / 180.0; }

Mat3 rx(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 ry(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rz(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

// C2-continuous easing on [0, 1].
double ease(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

Vec3 heading_dir(double heading) {
  return {std::cos(heading), std::sin(heading), 0.0};
}

// Local joint rotations of one frame.
struct Body {
  std::array<Mat3, kNumJoints> local;
  Body() { local.fill(Mat3::Identity()); }

  // Upright body (local +y to world +z) facing `heading`, pitched forward
  // by `lean`.
  void set_root(double heading, double lean = 0.0) {
    local[joints::kPelvis] = rz(heading + kPi / 2) * rx(kPi / 2) * rx(lean);
  }
  // Flexion is positive forward at the hip and backward at the knee; the
  // ankle keeps the foot parallel to the pelvis.
  void set_leg(bool left, double hip_flex, double knee_flex) {
    local[left ? joints::kLeftHip : joints::kRightHip] = rx(-hip_flex);
    local[left ? joints::kLeftKnee : joints::kRightKnee] = rx(knee_flex);
    local[left ? joints::kLeftAnkle : joints::kRightAnkle] = rx(hip_flex - knee_flex);
  }
  // Arm hanging down, swung forward by `forward` (rad), elbow flexed
  // forward by `elbow`.
  void set_arm(bool left, double forward, double elbow) {
    local[left ? joints::kLeftShoulder : joints::kRightShoulder] =
        rx(-forward) * rz(left ? -kPi / 2 : kPi / 2);
    local[left ? joints::kLeftElbow : joints::kRightElbow] =
        ry(left ? -elbow : elbow);
  }
  void set_spine(double bend) {
    local[joints::kSpine1] = rx(bend * 0.4);
    local[joints::kSpine2] = rx(bend * 0.35);
    local[joints::kSpine3] = rx(bend * 0.25);
  }

  std::vector<double> pose() const {
    std::vector<double> out(kPoseDim);
    for (int j = 0; j < kNumJoints; ++j) {
      const Rot6D r = matrix_to_rot6d(local[j]);
      std::copy(r.data(), r.data() + 6, out.begin() + 6 * j);
    }
    return out;
  }
};

FramePose fk(const Body& b, const Vec3& trans, const KinematicTree& tree) {
  const auto p = b.pose();
  return forward_kinematics_frame(p, trans, tree);
}

Vec3 feet_mid(const FramePose& f) {
  return 0.5 * (f.positions[joints::kLeftFoot] + f.positions[joints::kRightFoot]);
}

double feet_min_z(const FramePose& f) {
  return std::min(f.positions[joints::kLeftFoot].z(),
                  f.positions[joints::kRightFoot].z());
}

// Root translation putting the lowest foot joint kFootClearance above the
// ground and, if given, the feet midpoint at `feet_xy`.
Vec3 plant(const Body& b, double z_ground, const KinematicTree& tree,
           const std::optional<Vec2>& feet_xy, const Vec2& root_xy) {
  const FramePose f = fk(b, Vec3::Zero(), tree);
  Vec3 t;
  if (feet_xy) {
    const Vec3 m = feet_mid(f);
    t.x() = feet_xy->x() - m.x();
    t.y() = feet_xy->y() - m.y();
  } else {
    t.x() = root_xy.x();
    t.y() = root_xy.y();
  }
  t.z() = z_ground + kFootClearance - feet_min_z(f);
  return t;
}

struct Track {
  std::vector<Body> bodies;
  std::vector<Vec3> trans;
};

Motion to_motion(const Track& tr) {
  Motion m;
  const int T = static_cast<int>(tr.bodies.size());
  m.pose.resize(T, kPoseDim);
  m.translation.resize(T, 3);
  for (int t = 0; t < T; ++t) {
    const auto p = tr.bodies[t].pose();
    m.pose.row(t) = Eigen::Map<const Eigen::RowVectorXd>(p.data(), kPoseDim);
    m.translation.row(t) = tr.trans[t].transpose();
  }
  m.pose = round_to_f32(m.pose);
  m.translation = round_to_f32(m.translation);
  return m;
}

std::vector<ScenePrimitive> props(const Scene& scene, PrimitiveKind kind) {
  std::vector<ScenePrimitive> out;
  for (const auto& p : scene.primitives) {
    if (p.kind == kind) out.push_back(p);
  }
  return out;
}

bool inside_room(const std::vector<FramePose>& frames, const Scene& scene,
                 double margin) {
  double half = std::numeric_limits<double>::infinity();
  for (const auto& p : scene.primitives) {
    if (p.kind == PrimitiveKind::kFloor) half = std::min(p.half_extents.x(), p.half_extents.y());
  }
  for (const auto& f : frames) {
    for (const auto& q : f.positions) {
      if (std::abs(q.x()) > half - margin || std::abs(q.y()) > half - margin) return false;
    }
  }
  return true;
}

// Minimum signed distance of any joint to non-floor primitives.
double prop_clearance(const std::vector<FramePose>& frames, const Scene& scene,
                      std::span<const int> joint_subset = {}) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& prim : scene.primitives) {
    if (prim.kind == PrimitiveKind::kFloor) continue;
    for (const auto& f : frames) {
      if (joint_subset.empty()) {
        for (const auto& q : f.positions) best = std::min(best, signed_distance(prim, q));
      } else {
        for (int j : joint_subset) best = std::min(best, signed_distance(prim, f.positions[j]));
      }
    }
  }
  return best;
}

Track make_walk(double heading, const Vec2& start, int frames, double speed,
                double phase0) {
  Track tr;
  const double cadence = 0.9;  // gait cycles per second
  const Vec3 dir = heading_dir(heading);
  for (int t = 0; t < frames; ++t) {
    const double time = t / kDefaultFps;
    const double ph = 2.0 * kPi * cadence * time + phase0;
    Body b;
    b.set_root(heading, deg(3.0));
    const double amp = deg(25.0);
    const double hip_l = amp * std::sin(ph);
    const double hip_r = amp * std::sin(ph + kPi);
    const double knee_l = deg(5.0) + deg(40.0) * std::pow(std::max(0.0, std::cos(ph)), 1.5);
    const double knee_r = deg(5.0) + deg(40.0) * std::pow(std::max(0.0, std::cos(ph + kPi)), 1.5);
    b.set_leg(true, hip_l, knee_l);
    b.set_leg(false, hip_r, knee_r);
    b.set_arm(true, 0.6 * hip_r, deg(15.0));
    b.set_arm(false, 0.6 * hip_l, deg(15.0));
    b.set_spine(deg(4.0));
    tr.bodies.push_back(b);
    const Vec2 xy = start + speed * time * dir.head<2>();
    tr.trans.emplace_back(xy.x(), xy.y(), 0.0);
  }
  return tr;
}

}  // namespace

double signed_distance(const ScenePrimitive& prim, const Vec3& p) {
  const Vec3 q = (p - prim.center).cwiseAbs() - prim.half_extents;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

double surface_distance(const std::vector<ScenePrimitive>& prims, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& prim : prims) best = std::min(best, std::abs(signed_distance(prim, p)));
  return best;
}

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::kWalk: return "walk";
    case MotionKind::kSquat: return "squat";
    case MotionKind::kSitOnBox: return "sit_on_box";
    case MotionKind::kReachWall: return "reach_wall";
  }
  return "unknown";
}

MotionKind motion_kind_from_string(const std::string& s) {
  if (s == "walk") return MotionKind::kWalk;
  if (s == "squat") return MotionKind::kSquat;
  if (s == "sit_on_box" || s == "sit") return MotionKind::kSitOnBox;
  if (s == "reach_wall" || s == "reach") return MotionKind::kReachWall;
  throw ConfigError("unknown motion kind '" + s + "'");
}

Scene generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  if (spec.room_half <= 1.0 || spec.min_boxes > spec.max_boxes ||
      spec.min_walls > spec.max_walls || spec.box_top_min > spec.box_top_max ||
      spec.box_half_min > spec.box_half_max || spec.density <= 0.0) {
    throw ValidationError("generate_scene: invalid spec ranges");
  }
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  Scene scene;
  scene.z_ground = spec.z_ground;
  ScenePrimitive floor;
  floor.kind = PrimitiveKind::kFloor;
  floor.center = {0.0, 0.0, spec.z_ground - 0.005};
  floor.half_extents = {spec.room_half, spec.room_half, 0.005};
  scene.primitives.push_back(floor);

  // xy-footprint separation with a walkway margin.
  auto separated = [](const ScenePrimitive& a, const ScenePrimitive& b, double gap) {
    const Vec3 d = (a.center - b.center).cwiseAbs() - a.half_extents - b.half_extents;
    return d.x() >= gap || d.y() >= gap;
  };

  const int n_walls = pick(spec.min_walls, spec.max_walls);
  const int n_boxes = pick(spec.min_boxes, spec.max_boxes);
  auto fits = [&](const ScenePrimitive& p, double gap) {
    return std::all_of(scene.primitives.begin() + 1, scene.primitives.end(),
                       [&](const ScenePrimitive& o) { return separated(p, o, gap); });
  };
  auto random_wall = [&] {
    ScenePrimitive wall;
    wall.kind = PrimitiveKind::kWall;
    const bool along_x = pick(0, 1) == 1;
    const double half_len = uni(spec.wall_half_length_min, spec.wall_half_length_max);
    // Walls stand off-center with at least 1 m of floor behind them.
    const double offset = (pick(0, 1) ? 1.0 : -1.0) *
                          uni(0.4 * spec.room_half, spec.room_half - 1.0);
    const double slide_lim = std::max(0.0, spec.room_half - half_len - 0.3);
    const double slide = uni(-slide_lim, slide_lim);
    wall.center = along_x ? Vec3(slide, offset, 0.0) : Vec3(offset, slide, 0.0);
    wall.half_extents = along_x ? Vec3(half_len, spec.wall_half_thickness, 0.0)
                                : Vec3(spec.wall_half_thickness, half_len, 0.0);
    wall.half_extents.z() = spec.wall_height / 2;
    wall.center.z() = spec.z_ground + spec.wall_height / 2;
    return wall;
  };
  auto random_box = [&] {
    ScenePrimitive box;
    box.kind = PrimitiveKind::kBox;
    const double hx = uni(spec.box_half_min, spec.box_half_max);
    const double hy = uni(spec.box_half_min, spec.box_half_max);
    const double top = uni(spec.box_top_min, spec.box_top_max);
    const double lim = spec.room_half - 0.9 - std::max(hx, hy);
    box.half_extents = {hx, hy, top / 2};
    box.center = {uni(-lim, lim), uni(-lim, lim), spec.z_ground + top / 2};
    return box;
  };
  // Whole layouts are redrawn until every prop fits with a walkway gap.
  bool complete = false;
  for (int layout = 0; layout < spec.max_retries && !complete; ++layout) {
    scene.primitives.resize(1);
    complete = true;
    for (int k = 0; k < n_walls + n_boxes && complete; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
        const ScenePrimitive p = k < n_walls ? random_wall() : random_box();
        if (fits(p, 1.0)) {
          scene.primitives.push_back(p);
          placed = true;
        }
      }
      complete = placed;
    }
  }
  if (!complete) throw ValidationError("generate_scene: could not place props");

  // Uniform surface samples; the floor skips footprints covered by props.
  std::vector<Vec3> pts;
  auto sample_rect = [&](const Vec3& origin, const Vec3& u, const Vec3& v,
                         const std::function<bool(const Vec3&)>& keep) {
    const double area = u.norm() * v.norm();
    const int n = static_cast<int>(std::ceil(area * spec.density));
    for (int i = 0; i < n; ++i) {
      const Vec3 p = origin + uni(0.0, 1.0) * u + uni(0.0, 1.0) * v;
      if (keep(p)) pts.push_back(p);
    }
  };
  auto always = [](const Vec3&) { return true; };
  for (const auto& prim : scene.primitives) {
    const Vec3 lo = prim.min_corner();
    const Vec3 hi = prim.max_corner();
    const Vec3 ex = Vec3::UnitX() * (hi.x() - lo.x());
    const Vec3 ey = Vec3::UnitY() * (hi.y() - lo.y());
    const Vec3 ez = Vec3::UnitZ() * (hi.z() - lo.z());
    if (prim.kind == PrimitiveKind::kFloor) {
      sample_rect(Vec3(lo.x(), lo.y(), hi.z()), ex, ey, [&](const Vec3& p) {
        for (const auto& o : scene.primitives) {
          if (o.kind == PrimitiveKind::kFloor) continue;
          if (std::abs(p.x() - o.center.x()) <= o.half_extents.x() &&
              std::abs(p.y() - o.center.y()) <= o.half_extents.y()) {
            return false;
          }
        }
        return true;
      });
      continue;
    }
    sample_rect(Vec3(lo.x(), lo.y(), hi.z()), ex, ey, always);  // top
    sample_rect(lo, ex, ez, always);                             // -y face
    sample_rect(Vec3(lo.x(), hi.y(), lo.z()), ex, ez, always);   // +y face
    sample_rect(lo, ey, ez, always);                             // -x face
    sample_rect(Vec3(hi.x(), lo.y(), lo.z()), ey, ez, always);   // +x face
  }
  RowMatrixXd m(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(i) = pts[i].transpose();
  scene.cloud = make_cloud(round_to_f32(m), spec.z_ground);
  return scene;
}

ContactMatrix label_contacts(const std::vector<FramePose>& frames,
                             const std::vector<ScenePrimitive>& prims, double tau) {
  const int T = static_cast<int>(frames.size());
  const int J = T ? static_cast<int>(frames[0].positions.size()) : 0;
  ContactMatrix c(T, J);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < J; ++j) {
      c(t, j) = surface_distance(prims, frames[t].positions[j]) <= tau ? 1 : 0;
    }
  }
  return c;
}

double max_joint_penetration(const std::vector<FramePose>& frames,
                             const std::vector<ScenePrimitive>& prims) {
  double depth = 0.0;
  for (const auto& f : frames) {
    for (const auto& q : f.positions) {
      for (const auto& prim : prims) depth = std::max(depth, -signed_distance(prim, q));
    }
  }
  return depth;
}

LabeledSequence generate_motion(std::uint64_t seed, const Scene& scene,
                                MotionKind kind, const KinematicTree& tree) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
  const double zg = scene.z_ground;
  double room_half = 0.0;
  for (const auto& p : scene.primitives) {
    if (p.kind == PrimitiveKind::kFloor) room_half = p.half_extents.x();
  }

  const auto boxes = props(scene, PrimitiveKind::kBox);
  const auto walls = props(scene, PrimitiveKind::kWall);
  if (kind == MotionKind::kSitOnBox && boxes.empty()) {
    throw ValidationError("generate_motion: sit_on_box needs a box in the scene");
  }
  if (kind == MotionKind::kReachWall && walls.empty()) {
    throw ValidationError("generate_motion: reach_wall needs a wall in the scene");
  }

  std::optional<Motion> result;
  constexpr int kAttempts = 300;
  for (int attempt = 0; attempt < kAttempts && !result; ++attempt) {
    Track tr;
    switch (kind) {
      case MotionKind::kWalk: {
        const int frames = pick(90, 150);
        const double speed = uni(0.6, 1.0);
        const double heading = uni(-kPi, kPi);
        const double lim = room_half - 0.5;
        const Vec2 start(uni(-lim, lim), uni(-lim, lim));
        tr = make_walk(heading, start, frames, speed, uni(0.0, 2 * kPi));
        for (int t = 0; t < frames; ++t) {
          tr.trans[t] = plant(tr.bodies[t], zg, tree, std::nullopt, tr.trans[t].head<2>());
        }
        break;
      }
      case MotionKind::kSquat: {
        const double heading = uni(-kPi, kPi);
        const double lim = room_half - 0.8;
        const Vec2 feet(uni(-lim, lim), uni(-lim, lim));
        const double hip_max = deg(uni(70.0, 100.0));
        const double knee_max = hip_max + deg(uni(15.0, 30.0));
        const int hold0 = pick(10, 20), down = pick(30, 40), hold1 = pick(10, 20),
                  up = pick(30, 40), hold2 = pick(10, 15);
        const int frames = hold0 + down + hold1 + up + hold2;
        for (int t = 0; t < frames; ++t) {
          double s;
          if (t < hold0) s = 0.0;
          else if (t < hold0 + down) s = ease(double(t - hold0) / down);
          else if (t < hold0 + down + hold1) s = 1.0;
          else if (t < hold0 + down + hold1 + up) s = 1.0 - ease(double(t - hold0 - down - hold1) / up);
          else s = 0.0;
          Body b;
          b.set_root(heading);
          b.set_leg(true, s * hip_max, s * knee_max);
          b.set_leg(false, s * hip_max, s * knee_max);
          b.set_spine(s * deg(25.0));
          b.set_arm(true, s * deg(70.0), deg(10.0));
          b.set_arm(false, s * deg(70.0), deg(10.0));
          tr.bodies.push_back(b);
          tr.trans.push_back(plant(b, zg, tree, feet, Vec2::Zero()));
        }
        break;
      }
      case MotionKind::kSitOnBox: {
        const ScenePrimitive& box = boxes[pick(0, static_cast<int>(boxes.size()) - 1)];
        const int face = pick(0, 3);
        const int axis = face / 2;
        const double sign = (face % 2 == 0) ? 1.0 : -1.0;
        Vec3 n = Vec3::Zero();
        n[axis] = sign;
        const double heading = std::atan2(n.y(), n.x());
        const double top = box.top();
        const double hip_seat = deg(90.0);

        auto seated = [&](double knee) {
          Body b;
          b.set_root(heading);
          b.set_leg(true, hip_seat, knee);
          b.set_leg(false, hip_seat, knee);
          b.set_spine(deg(10.0));
          b.set_arm(true, deg(45.0), deg(20.0));
          b.set_arm(false, deg(45.0), deg(20.0));
          return b;
        };
        // Knee flexion that lands the feet on the floor with the pelvis on
        // the seat; foot height falls monotonically with knee flexion here.
        const double target = zg + kFootClearance - (top + kSeatLift);
        double lo = deg(40.0), hi = deg(90.0);
        auto foot_rel = [&](double knee) { return feet_min_z(fk(seated(knee), Vec3::Zero(), tree)); };
        if (foot_rel(hi) > target || foot_rel(lo) < target) continue;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (foot_rel(mid) > target ? lo : hi) = mid;
        }
        const double knee_seat = 0.5 * (lo + hi);
        Vec3 pelvis_seat = box.center + n * (box.half_extents[axis] - 0.10);
        pelvis_seat.z() = top + kSeatLift;
        // Small lateral jitter along the face.
        const int lateral = 1 - axis;
        pelvis_seat[lateral] += uni(-0.5, 0.5) * std::max(0.0, box.half_extents[lateral] - 0.2);
        const FramePose seat_fk = fk(seated(knee_seat), pelvis_seat, tree);
        const Vec2 feet = feet_mid(seat_fk).head<2>();

        const int hold0 = pick(10, 20), down = pick(40, 50), hold1 = pick(30, 40);
        const int frames = hold0 + down + hold1;
        for (int t = 0; t < frames; ++t) {
          const double s = t < hold0 ? 0.0 : ease(double(t - hold0) / down);
          Body b;
          b.set_root(heading);
          b.set_leg(true, s * hip_seat, s * knee_seat);
          b.set_leg(false, s * hip_seat, s * knee_seat);
          b.set_spine(s * deg(10.0) + deg(20.0) * std::sin(kPi * s));
          b.set_arm(true, s * deg(45.0), deg(20.0));
          b.set_arm(false, s * deg(45.0), deg(20.0));
          tr.bodies.push_back(b);
          tr.trans.push_back(plant(b, zg, tree, feet, Vec2::Zero()));
        }
        break;
      }
      case MotionKind::kReachWall: {
        const ScenePrimitive& wall = walls[pick(0, static_cast<int>(walls.size()) - 1)];
        const int axis = wall.half_extents.x() < wall.half_extents.y() ? 0 : 1;
        const int lateral = 1 - axis;
        const double sign = pick(0, 1) ? 1.0 : -1.0;
        Vec3 n = Vec3::Zero();
        n[axis] = sign;  // outward normal of the touched face
        const double heading = std::atan2(-n.y(), -n.x());
        const bool left = pick(0, 1) == 1;
        const double elev = deg(uni(0.0, 35.0));
        auto reach_body = [&](double s) {
          Body b;
          b.set_root(heading);
          b.set_spine(s * deg(5.0));
          b.set_arm(left, s * (kPi / 2 + elev), (1.0 - s) * deg(15.0));
          b.set_arm(!left, 0.0, deg(10.0));
          return b;
        };
        const FramePose full = fk(reach_body(1.0), Vec3::Zero(), tree);
        const Vec3 wrist = full.positions[left ? joints::kLeftWrist : joints::kRightWrist];
        const double face = wall.center[axis] + sign * wall.half_extents[axis];
        Vec3 root = Vec3::Zero();
        root[axis] = face + sign * 0.02 - wrist[axis];
        const double span = std::max(0.0, wall.half_extents[lateral] - 0.4);
        root[lateral] = wall.center[lateral] + uni(-span, span);
        const Vec2 root_xy = root.head<2>();

        const int hold0 = pick(10, 20), raise = pick(25, 35), hold1 = pick(20, 30),
                  lower = pick(25, 35), hold2 = pick(8, 12);
        const int frames = hold0 + raise + hold1 + lower + hold2;
        for (int t = 0; t < frames; ++t) {
          double s;
          if (t < hold0) s = 0.0;
          else if (t < hold0 + raise) s = ease(double(t - hold0) / raise);
          else if (t < hold0 + raise + hold1) s = 1.0;
          else if (t < hold0 + raise + hold1 + lower) s = 1.0 - ease(double(t - hold0 - raise - hold1) / lower);
          else s = 0.0;
          const Body b = reach_body(s);
          tr.bodies.push_back(b);
          tr.trans.push_back(plant(b, zg, tree, std::nullopt, root_xy));
        }
        break;
      }
    }

    Motion m = to_motion(tr);
    const auto frames = forward_kinematics(m, tree);
    if (!inside_room(frames, scene, 0.15)) continue;
    if (max_joint_penetration(frames, scene.primitives) > kMaxPenetration) continue;
    if (kind == MotionKind::kWalk || kind == MotionKind::kSquat) {
      // Keep free-space motions clear of props so props are never touched.
      if (prop_clearance(frames, scene) < kContactThreshold + 0.1) continue;
    }
    if (kind == MotionKind::kSitOnBox) {
      const Vec3 pelvis = frames.back().positions[joints::kPelvis];
      bool seated = false;
      for (const auto& b : boxes) {
        if (std::abs(signed_distance(b, pelvis)) <= kContactThreshold) seated = true;
      }
      if (!seated) continue;
    }
    result = std::move(m);
  }
  if (!result) {
    throw ValidationError("generate_motion: no valid " + to_string(kind) +
                          " placement in this scene");
  }

  LabeledSequence seq;
  seq.kind = kind;
  seq.seed = seed;
  seq.fps = kDefaultFps;
  seq.motion = std::move(*result);
  seq.contacts = label_contacts(forward_kinematics(seq.motion, tree), scene.primitives);
  seq.scene = scene;
  return seq;
}

void add_tracker_noise(RowMatrixXd& x, const TrackerNoise& noise,
                       std::uint64_t seed) {
  if (!noise.enabled) return;
  if (x.cols() != kObsDim) throw ShapeError("add_tracker_noise: expected T x 36");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (int k = 0; k < kNumTrackers; ++k) {
      const int base = k * kTrackerChannels;
      for (int c = 0; c < 3; ++c) x(t, base + c) += noise.sigma_pos * g(rng);
      const Vec3 w(g(rng), g(rng), g(rng));
      const Vec3 aa = w * deg(noise.sigma_rot_deg);
      const Mat3 dR = aa.norm() > 0 ? Mat3(Eigen::AngleAxisd(aa.norm(), aa.normalized()))
                                    : Mat3::Identity();
      const Mat3 R = rot6d_to_matrix(x.block<1, 6>(t, base + 3).transpose());
      x.block<1, 6>(t, base + 3) = matrix_to_rot6d(dR * R).transpose();
    }
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ (stream * 0x632be59bd9b4e019ULL)) ^ index);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json primitives_to_json(const std::vector<ScenePrimitive>& prims) {
  auto arr = nlohmann::json::array();
  for (const auto& p : prims) {
    const char* kind = p.kind == PrimitiveKind::kFloor ? "floor"
                       : p.kind == PrimitiveKind::kBox ? "box"
                                                       : "wall";
    arr.push_back({{"kind", kind},
                   {"center", {p.center.x(), p.center.y(), p.center.z()}},
                   {"half_extents", {p.half_extents.x(), p.half_extents.y(), p.half_extents.z()}}});
  }
  return arr;
}

std::vector<ScenePrimitive> primitives_from_json(const nlohmann::json& j) {
  std::vector<ScenePrimitive> out;
  for (const auto& e : j) {
    ScenePrimitive p;
    const auto kind = e.at("kind").get<std::string>();
    p.kind = kind == "floor" ? PrimitiveKind::kFloor
             : kind == "box" ? PrimitiveKind::kBox
                             : PrimitiveKind::kWall;
    const auto c = e.at("center").get<std::vector<double>>();
    const auto h = e.at("half_extents").get<std::vector<double>>();
    p.center = {c.at(0), c.at(1), c.at(2)};
    p.half_extents = {h.at(0), h.at(1), h.at(2)};
    out.push_back(p);
  }
  return out;
}

void save_sequence(const LabeledSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_npy_f32(dir / "pose.npy", seq.motion.pose);
  write_npy_f32(dir / "translation.npy", seq.motion.translation);
  write_npy_u8(dir / "contacts.npy", seq.contacts);
  nlohmann::json scene = {{"name", seq.name},
                          {"kind", to_string(seq.kind)},
                          {"seed", seq.seed},
                          {"fps", seq.fps},
                          {"z_ground", seq.scene.z_ground},
                          {"primitives", primitives_to_json(seq.scene.primitives)}};
  std::ofstream out(dir / "scene.json");
  if (!out) throw IoError("cannot write " + (dir / "scene.json").string());
  out << scene.dump(2) << "\n";
  save_cloud(seq.scene.cloud, dir / "cloud.spc");
}

LabeledSequence load_sequence(const std::filesystem::path& dir) {
  LabeledSequence seq;
  std::ifstream in(dir / "scene.json");
  if (!in) throw IoError("cannot open " + (dir / "scene.json").string());
  nlohmann::json scene;
  try {
    in >> scene;
    seq.name = scene.at("name").get<std::string>();
    seq.kind = motion_kind_from_string(scene.at("kind").get<std::string>());
    seq.seed = scene.at("seed").get<std::uint64_t>();
    seq.fps = scene.at("fps").get<double>();
    seq.scene.z_ground = scene.at("z_ground").get<double>();
    seq.scene.primitives = primitives_from_json(scene.at("primitives"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad scene.json in " + dir.string() + ": " + e.what());
  }
  seq.motion.pose = read_npy_f32(dir / "pose.npy");
  seq.motion.translation = read_npy_f32(dir / "translation.npy");
  seq.contacts = read_npy_u8(dir / "contacts.npy");
  seq.scene.cloud = load_cloud(dir / "cloud.spc");
  if (seq.motion.pose.cols() != kPoseDim || seq.motion.translation.cols() != 3 ||
      seq.contacts.cols() != kNumJoints ||
      seq.motion.translation.rows() != seq.motion.pose.rows() ||
      seq.contacts.rows() != seq.motion.pose.rows()) {
    throw IoError("inconsistent array shapes in " + dir.string());
  }
  return seq;
}

void make_dataset(int n_train, int n_test, std::uint64_t seed,
                  const std::filesystem::path& out, const DatasetSpec& spec,
                  const KinematicTree& tree) {
  if (n_train < 0 || n_test < 0) throw ValidationError("make_dataset: negative count");
  if (spec.kind_weights.size() != 4) throw ConfigError("make_dataset: need 4 kind weights");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  save_skeleton(tree, out / "skeleton.json");
  std::ifstream sk(out / "skeleton.json");
  const std::string sk_text((std::istreambuf_iterator<char>(sk)), {});

  nlohmann::json manifest = {{"format", "sparsepose-dataset"},
                             {"version", 1},
                             {"fps", kDefaultFps},
                             {"seed", seed},
                             {"counts", {{"train", n_train}, {"test", n_test}}},
                             {"skeleton_hash", fnv1a_hex(sk_text)},
                             {"sequences", nlohmann::json::array()}};
  const std::array<MotionKind, 4> kinds = {MotionKind::kWalk, MotionKind::kSquat,
                                           MotionKind::kSitOnBox, MotionKind::kReachWall};
  auto build_split = [&](const std::string& split, int count, std::uint64_t stream) {
    for (int i = 0; i < count; ++i) {
      const std::uint64_t s = derive_seed(seed, stream, i);
      std::mt19937_64 rng(s);
      std::discrete_distribution<int> kd(spec.kind_weights.begin(), spec.kind_weights.end());
      const MotionKind kind = kinds[kd(rng)];
      SceneSpec ss = spec.scene;
      if (kind == MotionKind::kSitOnBox) ss.min_boxes = std::max(ss.min_boxes, 1);
      if (kind == MotionKind::kReachWall) ss.min_walls = std::max(ss.min_walls, 1);
      ss.max_boxes = std::max(ss.max_boxes, ss.min_boxes);
      ss.max_walls = std::max(ss.max_walls, ss.min_walls);
      // A scene that admits no valid placement is regenerated.
      std::optional<LabeledSequence> seq;
      for (int retry = 0; retry < 20 && !seq; ++retry) {
        const Scene scene = generate_scene(derive_seed(s, 1, retry), ss);
        try {
          seq = generate_motion(derive_seed(s, 2, retry), scene, kind, tree);
        } catch (const ValidationError&) {
        }
      }
      if (!seq) throw ValidationError("make_dataset: could not generate " + to_string(kind));
      char name[32];
      std::snprintf(name, sizeof(name), "seq_%04d", i);
      seq->name = name;
      save_sequence(*seq, out / split / name);
      manifest["sequences"].push_back({{"name", name},
                                       {"split", split},
                                       {"kind", to_string(kind)},
                                       {"frames", seq->motion.frames()},
                                       {"seed", s}});
    }
  };
  build_split("train", n_train, 1);
  build_split("test", n_test, 2);
  std::ofstream mf(out / "manifest.json");
  if (!mf) throw IoError("cannot write manifest in " + out.string());
  mf << manifest.dump(2) << "\n";
}

const std::vector<LabeledSequence>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "'");
}

Dataset load_dataset(const std::filesystem::path& root) {
  Dataset ds;
  std::ifstream in(root / "manifest.json");
  if (!in) throw IoError("cannot open " + (root / "manifest.json").string());
  try {
    in >> ds.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest: " + std::string(e.what()));
  }
  ds.tree = load_skeleton(root / "skeleton.json");
  for (const auto& entry : ds.manifest.at("sequences")) {
    const auto split = entry.at("split").get<std::string>();
    auto seq = load_sequence(root / split / entry.at("name").get<std::string>());
    (split == "train" ? ds.train : ds.test).push_back(std::move(seq));
  }
  return ds;
}

}  // namespace sparsepose
