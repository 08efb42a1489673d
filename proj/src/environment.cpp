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


#include "sparsepose/environment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sparsepose {
namespace {

static_assert(std::endian::native == std::endian::little,
              "cloud I/O assumes a little-endian host");

constexpr char kCloudMagic[8] = {'S', 'P', 'C', 'L', 'O', 'U', 'D', '\0'};

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

enum class Footprint { kCircle, kSquare };

CroppedCloud crop_impl(const EnvironmentCloud& cloud, const Vec2& center,
                       double extent, int n, std::uint64_t seed,
                       Footprint shape) {
  if (!(extent > 0.0)) throw ValidationError("crop: extent must be positive");
  if (n < 1) throw ValidationError("crop: n must be >= 1");
  std::vector<int> inside;
  for (int i = 0; i < cloud.size(); ++i) {
    const double dx = cloud.points(i, 0) - center.x();
    const double dy = cloud.points(i, 1) - center.y();
    const bool in = shape == Footprint::kCircle
                        ? dx * dx + dy * dy <= extent * extent
                        : std::abs(dx) <= extent && std::abs(dy) <= extent;
    if (in) inside.push_back(i);
  }

  std::mt19937_64 rng(seed);
  CroppedCloud out;
  out.center = center;
  out.points.resize(n, 3);
  const int m = static_cast<int>(inside.size());
  if (m == 0) {
    out.synthesized = true;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < n; ++k) {
      double x, y;
      if (shape == Footprint::kCircle) {
        const double r = extent * std::sqrt(u(rng));
        const double a = 2.0 * std::numbers::pi * u(rng);
        x = r * std::cos(a);
        y = r * std::sin(a);
      } else {
        x = extent * (2.0 * u(rng) - 1.0);
        y = extent * (2.0 * u(rng) - 1.0);
      }
      out.points.row(k) << center.x() + x, center.y() + y, cloud.z_ground;
    }
    return out;
  }
  if (m >= n) {
    // Partial Fisher-Yates: uniform subset without replacement.
    for (int k = 0; k < n; ++k) {
      std::uniform_int_distribution<int> pick(k, m - 1);
      std::swap(inside[k], inside[pick(rng)]);
      out.points.row(k) = cloud.points.row(inside[k]);
    }
    return out;
  }
  for (int k = 0; k < m; ++k) out.points.row(k) = cloud.points.row(inside[k]);
  std::uniform_int_distribution<int> pick(0, m - 1);
  for (int k = m; k < n; ++k) out.points.row(k) = cloud.points.row(inside[pick(rng)]);
  return out;
}

}  // namespace

EnvironmentCloud make_cloud(RowMatrixXd points, double z_ground) {
  if (points.cols() != 3) throw ShapeError("make_cloud: points must be N x 3");
  EnvironmentCloud cloud;
  cloud.z_ground = z_ground;
  cloud.ground_mask.resize(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    cloud.ground_mask[i] = std::abs(points(i, 2) - z_ground) <= kGroundBand;
  }
  cloud.points = std::move(points);
  return cloud;
}

CroppedCloud crop_circular(const EnvironmentCloud& cloud, const Vec2& center,
                           double radius, int n, std::uint64_t seed) {
  return crop_impl(cloud, center, radius, n, seed, Footprint::kCircle);
}

CroppedCloud crop_square(const EnvironmentCloud& cloud, const Vec2& center,
                         double half_side, int n, std::uint64_t seed) {
  return crop_impl(cloud, center, half_side, n, seed, Footprint::kSquare);
}

EnvironmentCloud remove_ground(const EnvironmentCloud& cloud) {
  std::vector<int> keep;
  for (int i = 0; i < cloud.size(); ++i) {
    if (!cloud.ground_mask[i]) keep.push_back(i);
  }
  EnvironmentCloud out;
  out.z_ground = cloud.z_ground;
  out.points.resize(keep.size(), 3);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.points.row(k) = cloud.points.row(keep[k]);
  }
  out.ground_mask.assign(keep.size(), 0);
  return out;
}

double terrain_height(const EnvironmentCloud& cloud, const Vec2& xy,
                      std::span<const double> stationary_foot_heights) {
  std::vector<double> near;
  const double r2 = kTerrainRadius * kTerrainRadius;
  for (int i = 0; i < cloud.size(); ++i) {
    if (!cloud.ground_mask[i]) continue;
    const double dx = cloud.points(i, 0) - xy.x();
    const double dy = cloud.points(i, 1) - xy.y();
    if (dx * dx + dy * dy <= r2) near.push_back(cloud.points(i, 2));
  }
  const double from_cloud = near.empty() ? cloud.z_ground : median(std::move(near));
  if (stationary_foot_heights.empty()) return from_cloud;
  const double from_feet = median(std::vector<double>(
      stationary_foot_heights.begin(), stationary_foot_heights.end()));
  return 0.5 * (from_cloud + from_feet);
}

RowMatrixXd spatial_salience_features(const CroppedCloud& crop,
                                      const Vec3& human_center) {
  RowMatrixXd out(crop.size(), 4);
  for (int i = 0; i < crop.size(); ++i) {
    const Vec3 d = crop.points.row(i).transpose() - human_center;
    const double norm = d.norm();
    out(i, 0) = norm;
    if (norm < 1e-8) {
      out.block<1, 3>(i, 1).setZero();
    } else {
      out.block<1, 3>(i, 1) = (d / norm).transpose();
    }
  }
  return out;
}

void save_cloud(const EnvironmentCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write cloud " + path.string());
  nlohmann::json manifest = {
      {"points", cloud.size()}, {"z_ground", cloud.z_ground}, {"mask", true}};
  const std::string text = manifest.dump();
  const std::uint32_t version = 1;
  const auto mlen = static_cast<std::uint32_t>(text.size());
  out.write(kCloudMagic, 8);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&mlen), 4);
  out.write(text.data(), text.size());
  std::vector<float> xyz(static_cast<std::size_t>(cloud.size()) * 3);
  for (int i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) xyz[3 * i + c] = static_cast<float>(cloud.points(i, c));
  }
  out.write(reinterpret_cast<const char*>(xyz.data()), xyz.size() * sizeof(float));
  out.write(reinterpret_cast<const char*>(cloud.ground_mask.data()),
            cloud.ground_mask.size());
  if (!out) throw IoError("short write to " + path.string());
}

EnvironmentCloud load_cloud(const std::filesystem::path& path,
                            std::optional<double> text_z_ground) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cloud " + path.string());
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() == 8 && std::memcmp(magic, kCloudMagic, 8) == 0) {
    std::uint32_t version = 0, mlen = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&mlen), 4);
    if (!in || version != 1) throw IoError("unsupported cloud version in " + path.string());
    std::string text(mlen, '\0');
    in.read(text.data(), mlen);
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad cloud manifest in " + path.string() + ": " + e.what());
    }
    const auto n = manifest.at("points").get<std::int64_t>();
    EnvironmentCloud cloud;
    cloud.z_ground = manifest.at("z_ground").get<double>();
    std::vector<float> xyz(static_cast<std::size_t>(n) * 3);
    in.read(reinterpret_cast<char*>(xyz.data()), xyz.size() * sizeof(float));
    cloud.ground_mask.resize(n);
    in.read(reinterpret_cast<char*>(cloud.ground_mask.data()), n);
    if (!in) throw IoError("truncated cloud " + path.string());
    cloud.points.resize(n, 3);
    for (std::int64_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) cloud.points(i, c) = xyz[3 * i + c];
    }
    return cloud;
  }

  in.clear();
  in.seekg(0);
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) throw IoError("malformed point line in " + path.string());
    vals.insert(vals.end(), {x, y, z});
  }
  if (vals.empty()) throw IoError("no points in " + path.string());
  const Eigen::Index n = static_cast<Eigen::Index>(vals.size() / 3);
  RowMatrixXd pts = Eigen::Map<RowMatrixXd>(vals.data(), n, 3);
  const double zg = text_z_ground ? *text_z_ground : pts.col(2).minCoeff();
  return make_cloud(std::move(pts), zg);
}

}  // namespace sparsepose
