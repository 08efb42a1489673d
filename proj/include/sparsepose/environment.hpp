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


#ifndef SPARSEPOSE_ENVIRONMENT_HPP_
#define SPARSEPOSE_ENVIRONMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sparsepose/types.hpp"

namespace sparsepose {

// Half-width of the band around z_ground classified as ground.
inline constexpr double kGroundBand = 0.02;
// Horizontal radius of the terrain-height query.
inline constexpr double kTerrainRadius = 0.3;

struct EnvironmentCloud {
  RowMatrixXd points;                    // N x 3, world frame
  std::vector<std::uint8_t> ground_mask;  // N
  double z_ground = 0.0;

  int size() const { return static_cast<int>(points.rows()); }
  bool empty() const { return points.rows() == 0; }
};

// Builds a cloud and sets the ground mask from |z - z_ground| <= kGroundBand.
EnvironmentCloud make_cloud(RowMatrixXd points, double z_ground);

struct CroppedCloud {
  RowMatrixXd points;  // n x 3, world frame
  Vec2 center = Vec2::Zero();
  // True when no input point fell in the footprint and the points were
  // synthesized on the ground plane.
  bool synthesized = false;

  int size() const { return static_cast<int>(points.rows()); }
};

// Points with horizontal distance <= radius from center, resampled to
// exactly n points: without replacement when enough points are present;
// otherwise all points plus draws with replacement; an empty footprint is
// filled with uniform points on the disk at z_ground.
CroppedCloud crop_circular(const EnvironmentCloud& cloud, const Vec2& center,
                           double radius = 1.0, int n = kCropPoints,
                           std::uint64_t seed = 0);

// Axis-aligned square footprint variant of crop_circular.
CroppedCloud crop_square(const EnvironmentCloud& cloud, const Vec2& center,
                         double half_side = 1.0, int n = kCropPoints,
                         std::uint64_t seed = 0);

// Non-ground subset; z_ground preserved. May be empty.
EnvironmentCloud remove_ground(const EnvironmentCloud& cloud);

// Median z of ground points within kTerrainRadius of xy (z_ground when there
// are none), averaged with the median of stationary foot heights if given.
double terrain_height(const EnvironmentCloud& cloud, const Vec2& xy,
                      std::span<const double> stationary_foot_heights = {});

// n x 4 rows [|d|, d/|d|] with d = point - human_center; direction is zero
// when |d| < 1e-8.
RowMatrixXd spatial_salience_features(const CroppedCloud& crop,
                                      const Vec3& human_center);

// Binary point-cloud container (.spc):
//   bytes 0-7   magic "SPCLOUD\0"
//   bytes 8-11  uint32 LE version (1)
//   bytes 12-15 uint32 LE manifest length M
//   M bytes     JSON manifest {"points": N, "z_ground": z, "mask": true}
//   N*3 float32 LE xyz, then N uint8 ground mask.
void save_cloud(const EnvironmentCloud& cloud, const std::filesystem::path& path);

// Loads .spc, or whitespace-separated "x y z" text. For text input the
// ground plane defaults to the minimum z and the mask is inferred.
EnvironmentCloud load_cloud(const std::filesystem::path& path,
                            std::optional<double> text_z_ground = std::nullopt);

}  // namespace sparsepose

#endif  // SPARSEPOSE_ENVIRONMENT_HPP_
