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
#include <fstream>
#include <numbers>
#include <sstream>

#include "sparsepose/rotations.hpp"

namespace sparsepose {
namespace {

struct Sum {
  double total = 0.0;
  std::int64_t count = 0;
  double mean() const { return count == 0 ? 0.0 : total / count; }
};

void check_same(const RowMatrixXd& a, const RowMatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch");
  }
}

void check_positions(const RowMatrixXd& p, const char* what) {
  if (p.cols() % 3 != 0) throw ShapeError(std::string(what) + ": width must be 3 * J");
}

Sum rotation_errors(const RowMatrixXd& pred, const RowMatrixXd& gt) {
  check_same(pred, gt, "mpjre");
  if (pred.cols() % kRot6dDim != 0) throw ShapeError("mpjre: width must be 6 * J");
  Sum s;
  const int J = static_cast<int>(pred.cols() / kRot6dDim);
  for (Eigen::Index t = 0; t < pred.rows(); ++t) {
    for (int j = 0; j < J; ++j) {
      const Mat3 a = rot6d_to_matrix(pred.block<1, 6>(t, 6 * j).transpose());
      const Mat3 b = rot6d_to_matrix(gt.block<1, 6>(t, 6 * j).transpose());
      s.total += geodesic_angle(a, b);
      ++s.count;
    }
  }
  return s;
}

Sum position_errors(const RowMatrixXd& pred, const RowMatrixXd& gt) {
  check_same(pred, gt, "mpjpe");
  check_positions(pred, "mpjpe");
  Sum s;
  const Eigen::Index J = pred.cols() / 3;
  for (Eigen::Index t = 0; t < pred.rows(); ++t) {
    for (Eigen::Index j = 0; j < J; ++j) {
      s.total += (pred.block<1, 3>(t, 3 * j) - gt.block<1, 3>(t, 3 * j)).norm();
      ++s.count;
    }
  }
  return s;
}

Sum velocity_errors(const RowMatrixXd& pred, const RowMatrixXd& gt, double fps) {
  check_same(pred, gt, "mpjve");
  check_positions(pred, "mpjve");
  if (pred.rows() < 2) throw ValidationError("mpjve: need at least 2 frames");
  Sum s;
  const Eigen::Index J = pred.cols() / 3;
  for (Eigen::Index t = 1; t < pred.rows(); ++t) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const Eigen::RowVector3d vp =
          (pred.block<1, 3>(t, 3 * j) - pred.block<1, 3>(t - 1, 3 * j)) * fps;
      const Eigen::RowVector3d vg =
          (gt.block<1, 3>(t, 3 * j) - gt.block<1, 3>(t - 1, 3 * j)) * fps;
      s.total += (vp - vg).norm();
      ++s.count;
    }
  }
  return s;
}

Sum jerks(const RowMatrixXd& pred, double fps) {
  check_positions(pred, "jitter");
  if (pred.rows() < 4) throw ValidationError("jitter: need at least 4 frames");
  Sum s;
  const Eigen::Index J = pred.cols() / 3;
  const double f3 = fps * fps * fps;
  for (Eigen::Index t = 3; t < pred.rows(); ++t) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const Eigen::RowVector3d d3 =
          pred.block<1, 3>(t, 3 * j) - 3.0 * pred.block<1, 3>(t - 1, 3 * j) +
          3.0 * pred.block<1, 3>(t - 2, 3 * j) - pred.block<1, 3>(t - 3, 3 * j);
      s.total += d3.norm() * f3;
      ++s.count;
    }
  }
  return s;
}

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

double mpjre(const RowMatrixXd& pred_pose, const RowMatrixXd& gt_pose) {
  return rotation_errors(pred_pose, gt_pose).mean() * kRadToDeg;
}

double mpjpe(const RowMatrixXd& pred_pos, const RowMatrixXd& gt_pos) {
  return position_errors(pred_pos, gt_pos).mean() * 1000.0;
}

double mpjve(const RowMatrixXd& pred_pos, const RowMatrixXd& gt_pos, double fps) {
  return velocity_errors(pred_pos, gt_pos, fps).mean() * 1000.0;
}

double jitter(const RowMatrixXd& pred_pos, double fps) {
  return jerks(pred_pos, fps).mean() / 100.0;
}

void MetricsAccumulator::add(const RowMatrixXd& pred_pose,
                             const RowMatrixXd& gt_pose,
                             const RowMatrixXd& pred_pos,
                             const RowMatrixXd& gt_pos) {
  const Sum r = rotation_errors(pred_pose, gt_pose);
  const Sum p = position_errors(pred_pos, gt_pos);
  const Sum v = velocity_errors(pred_pos, gt_pos, fps_);
  const Sum j = jerks(pred_pos, fps_);
  rot_sum_ += r.total;
  rot_n_ += r.count;
  pos_sum_ += p.total;
  pos_n_ += p.count;
  vel_sum_ += v.total;
  vel_n_ += v.count;
  jerk_sum_ += j.total;
  jerk_n_ += j.count;
  frames_ += pred_pos.rows();
  ++sequences_;
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  auto mean = [](double s, std::int64_t n) { return n == 0 ? 0.0 : s / n; };
  r.mpjre_deg = mean(rot_sum_, rot_n_) * kRadToDeg;
  r.mpjpe_mm = mean(pos_sum_, pos_n_) * 1000.0;
  r.mpjve_mm_s = mean(vel_sum_, vel_n_) * 1000.0;
  r.jitter_e2_m_s3 = mean(jerk_sum_, jerk_n_) / 100.0;
  r.frames = frames_;
  r.sequences = sequences_;
  return r;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "mpjre_deg = " << mpjre_deg << "\n"
     << "mpjpe_mm = " << mpjpe_mm << "\n"
     << "mpjve_mm_s = " << mpjve_mm_s << "\n"
     << "jitter_e2_m_s3 = " << jitter_e2_m_s3 << "\n"
     << "frames = " << frames << "\n"
     << "sequences = " << sequences << "\n";
  return os.str();
}

nlohmann::json MetricsReport::to_json() const {
  return {{"mpjre_deg", mpjre_deg},   {"mpjpe_mm", mpjpe_mm},
          {"mpjve_mm_s", mpjve_mm_s}, {"jitter_e2_m_s3", jitter_e2_m_s3},
          {"frames", frames},         {"sequences", sequences}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.mpjre_deg = j.at("mpjre_deg").get<double>();
  r.mpjpe_mm = j.at("mpjpe_mm").get<double>();
  r.mpjve_mm_s = j.at("mpjve_mm_s").get<double>();
  r.jitter_e2_m_s3 = j.at("jitter_e2_m_s3").get<double>();
  r.frames = j.at("frames").get<std::int64_t>();
  r.sequences = j.at("sequences").get<std::int64_t>();
  return r;
}

void MetricsReport::write(const std::filesystem::path& stem) const {
  auto txt = stem;
  txt += ".txt";
  auto js = stem;
  js += ".json";
  std::ofstream t(txt), j(js);
  if (!t || !j) throw IoError("cannot write report " + stem.string());
  t << to_text();
  j << to_json().dump(2) << "\n";
}

}  // namespace sparsepose
