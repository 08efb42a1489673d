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


#include "sparsepose/pipeline.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "sparsepose/observations.hpp"
#include "sparsepose/tensor_kinematics.hpp"

namespace sparsepose {

namespace {

using nlohmann::json;

// Rejects keys absent from the defaults, recursing into nested objects.
void check_keys(const json& j, const json& defaults, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError(section + ": unknown key '" + key + "'");
    if (defaults[key].is_object()) check_keys(value, defaults[key], section + "." + key);
  }
}

template <typename T>
T read(const json& j, const char* key, T fallback) {
  try {
    return j.value(key, fallback);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

json noise_to_json(const TrackerNoise& n) {
  return {{"enabled", n.enabled}, {"sigma_pos", n.sigma_pos}, {"sigma_rot_deg", n.sigma_rot_deg}};
}

TrackerNoise noise_from_json(const json& j) {
  TrackerNoise n;
  n.enabled = read(j, "enabled", n.enabled);
  n.sigma_pos = read(j, "sigma_pos", n.sigma_pos);
  n.sigma_rot_deg = read(j, "sigma_rot_deg", n.sigma_rot_deg);
  if (n.sigma_pos < 0 || n.sigma_rot_deg < 0) throw ConfigError("tracker_noise: negative sigma");
  return n;
}

std::string form_name(UncertaintyForm f) {
  return f == UncertaintyForm::kGaussianNll ? "gaussian_nll" : "literal";
}

double lr_at(const TrainSchedule& s, int step, int total) {
  if (!s.cosine || total <= 1) return s.lr;
  return 0.5 * s.lr * (1.0 + std::cos(std::numbers::pi * step / (total - 1)));
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
}

void clip(torch::optim::Optimizer& opt, double max_norm) {
  if (max_norm <= 0) return;
  std::vector<torch::Tensor> params;
  for (auto& g : opt.param_groups()) {
    for (auto& p : g.params()) params.push_back(p);
  }
  torch::nn::utils::clip_grad_norm_(params, max_norm);
}

std::vector<std::pair<std::string, torch::Tensor>> named_parameters(const Model& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : m.stage1->named_parameters()) out.emplace_back("stage1." + p.key(), p.value());
  if (m.has_stage2()) {
    for (const auto& p : m.stage2->named_parameters()) {
      out.emplace_back("stage2." + p.key(), p.value());
    }
  }
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> capture_optimizer(
    torch::optim::Adam& opt, const Model& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto& state = opt.state();
  for (const auto& [name, p] : named_parameters(m)) {
    const auto it = state.find(p.unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    out.emplace_back("adam." + name + ".step", torch::tensor(s.step(), torch::kInt64));
    out.emplace_back("adam." + name + ".exp_avg", s.exp_avg().detach().clone());
    out.emplace_back("adam." + name + ".exp_avg_sq", s.exp_avg_sq().detach().clone());
  }
  return out;
}

void copy_parameters(torch::nn::Module& dst, const torch::nn::Module& src) {
  torch::NoGradGuard guard;
  const auto from = src.named_parameters();
  for (auto& p : dst.named_parameters()) {
    const auto* s = from.find(p.key());
    if (!s || !s->sizes().equals(p.value().sizes())) {
      throw ConfigError("first-stage parameters do not match: " + p.key());
    }
    p.value().copy_(*s);
  }
}

// Training windows of one split, built on first use.
class TrainingSet {
 public:
  TrainingSet(const Dataset& data, const PipelineConfig& cfg, const EnvEncoderConfig* env)
      : cfg_(cfg), tree_(data.tree), env_(env) {
    seqs_ = prepare_split(data, "train", cfg.noise);
    const int T = cfg.windows.length;
    for (int s = 0; s < static_cast<int>(seqs_.size()); ++s) {
      for (int start = 0; start + T <= seqs_[s].frames(); start += cfg.train.window_stride) {
        cand_.emplace_back(s, start);
      }
    }
    if (cand_.empty()) throw ValidationError("training split has no full-length window");
    if (static_cast<int>(cand_.size()) > cfg.train.max_windows) {
      std::vector<std::pair<int, int>> kept;
      const double step = static_cast<double>(cand_.size()) / cfg.train.max_windows;
      for (int i = 0; i < cfg.train.max_windows; ++i) kept.push_back(cand_[static_cast<int>(i * step)]);
      cand_ = std::move(kept);
    }
    cache_.resize(cand_.size());
  }

  std::vector<int> draw(std::mt19937_64& rng, int n) const {
    std::uniform_int_distribution<int> u(0, static_cast<int>(cand_.size()) - 1);
    std::vector<int> idx(n);
    for (auto& i : idx) i = u(rng);
    return idx;
  }

  const Window& window(int i) {
    if (!cache_[i]) {
      const auto& [s, start] = cand_[i];
      cache_[i] = std::make_unique<Window>(
          build_window(seqs_[s], seqs_[s].pose, start, cfg_.windows, tree_, env_));
    }
    return *cache_[i];
  }

  WindowBatch batch(const std::vector<int>& idx) {
    std::vector<const Window*> ws;
    for (int i : idx) ws.push_back(&window(i));
    return collate(ws);
  }

  json describe(const std::vector<int>& idx) const {
    json out = json::array();
    for (int i : idx) out.push_back({{"sequence", seqs_[cand_[i].first].name}, {"start", cand_[i].second}});
    return out;
  }

  std::size_t size() const { return cand_.size(); }

 private:
  const PipelineConfig& cfg_;
  const KinematicTree& tree_;
  const EnvEncoderConfig* env_;
  std::vector<SequenceData> seqs_;
  std::vector<std::pair<int, int>> cand_;
  std::vector<std::unique_ptr<Window>> cache_;
};

json tensor_stats(const torch::Tensor& t) {
  if (!t.defined()) return nullptr;
  const auto d = t.detach().to(torch::kFloat64);
  const auto finite = torch::isfinite(d);
  return {{"shape", d.sizes().vec()},
          {"non_finite", (d.numel() - finite.sum()).item<int64_t>()},
          {"min", torch::where(finite, d, torch::zeros_like(d)).min().item<double>()},
          {"max", torch::where(finite, d, torch::zeros_like(d)).max().item<double>()}};
}

[[noreturn]] void numeric_failure(const PipelineConfig& cfg, int stage, int step,
                                  const json& windows, const WindowBatch& b,
                                  const json& losses) {
  json dump = {{"stage", stage},
               {"step", step},
               {"windows", windows},
               {"losses", losses},
               {"inputs",
                {{"x", tensor_stats(b.x)},
                 {"x_new", tensor_stats(b.x_new)},
                 {"history", tensor_stats(b.history)},
                 {"pose_gt", tensor_stats(b.pose_gt)},
                 {"env_xyz", tensor_stats(b.env.xyz)}}}};
  std::string where;
  if (!cfg.output.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output, ec);
    const auto path = std::filesystem::path(cfg.output) / "nan_batch.json";
    std::ofstream f(path);
    if (f) {
      f << dump.dump(2) << "\n";
      where = "; batch dump in " + path.string();
    }
  }
  throw NumericError("non-finite loss at stage " + std::to_string(stage) + " step " +
                     std::to_string(step) + where);
}

bool finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

struct Forward {
  Stage1Output s1;
  torch::Tensor pose_sample;
  Stage2Output s2;
  torch::Tensor final_pose;      // final pose
  torch::Tensor positions;  // (B, T, 22, 3)
};

Forward run_forward(const Model& m, const WindowBatch& b, bool sample,
                    std::optional<torch::Generator> gen, bool stage1_grad,
                    const TensorSkeleton& skel) {
  Forward f;
  Stage1 stage1 = m.stage1;
  Stage2 stage2 = m.stage2;
  {
    std::optional<torch::NoGradGuard> guard;
    if (!stage1_grad) guard.emplace();
    f.s1 = stage1->forward(b.x, b.history);
  }
  f.pose_sample = f.s1.pose_mean;
  if (sample && m.config.uncertainty) {
    const auto eps = torch::randn(f.s1.spread.sizes(), gen, f.s1.spread.options());
    f.pose_sample = sample_pose(f.s1.pose_mean, f.s1.spread, eps);
  }
  if (m.has_stage2()) {
    Stage2Input in{f.pose_sample, b.head, b.x_new, b.salience, b.env};
    f.s2 = stage2->forward(in);
    f.final_pose = f.s2.final_pose;
  } else {
    f.final_pose = f.s1.pose_mean;
  }
  f.positions = head_anchored_positions(f.final_pose, b.head, skel);
  return f;
}

LossReport batch_losses(const Model& m, const WindowBatch& b, const Forward& f,
                        const LossWeights& w, bool with_uncertainty, const TensorSkeleton& skel) {
  LossTerms t;
  t.stage1 = loss_stage1(f.s1.pose_mean, f.s1.spread, b.pose_gt, w.motion, w.uncertainty,
                         m.config.uncertainty_form, with_uncertainty)
                 .total;
  t.final_motion = final_motion_loss(f.final_pose, b.pose_gt);
  const auto pos = position_losses(f.positions, b.positions_gt);
  t.posi = pos.all;
  t.hand = pos.hands;
  if (w.foot_contact > 0 || w.foot_height > 0 || w.ground > 0) {
    const auto feet = foot_losses(f.positions, b.positions_gt, b.contacts_gt, b.z_ground,
                                  w.foot_height_all_frames);
    t.foot_contact = feet.contact;
    t.foot_height = feet.height;
    t.ground = feet.ground;
  }
  if (m.has_stage2() && m.stage2->config().contact_head && w.contact > 0) {
    t.contact = contact_loss(f.s2.contact, b.contacts_gt);
  }
  if (w.collision > 0 && b.collision_points.defined()) {
    t.collision = collision_loss(f.positions, b.collision_points, skel, b.collision_valid);
  }
  return total_stage2(t, w);
}

json step_record(int stage, int step, const std::map<std::string, double>& values) {
  json r = {{"stage", stage}, {"step", step}};
  for (const auto& [k, v] : values) r[k] = v;
  return r;
}

void progress(const TrainSchedule& s, int step, int total, const json& record) {
  if (s.log_every <= 0 || (step % s.log_every != 0 && step + 1 != total)) return;
  std::clog << "[stage " << record["stage"] << "] step " << step + 1 << "/" << total
            << " total " << record.value("total", 0.0) << "\n";
}

}  // namespace

void TrainSchedule::validate() const {
  if (!(lr > 0) || batch_size <= 0 || stage1_motion_steps < 0 || stage1_uncertainty_steps < 0 ||
      stage2_steps < 0 || stage2_frozen_steps < 0 || grad_clip < 0 || window_stride <= 0 ||
      max_windows <= 0) {
    throw ConfigError("train: rates, counts and strides must be positive");
  }
}

json TrainSchedule::to_json() const {
  return {{"lr", lr},
          {"batch_size", batch_size},
          {"stage1_motion_steps", stage1_motion_steps},
          {"stage1_uncertainty_steps", stage1_uncertainty_steps},
          {"stage2_steps", stage2_steps},
          {"stage2_frozen_steps", stage2_frozen_steps},
          {"cosine", cosine},
          {"grad_clip", grad_clip},
          {"window_stride", window_stride},
          {"max_windows", max_windows},
          {"log_every", log_every}};
}

TrainSchedule TrainSchedule::from_json(const json& j) {
  TrainSchedule s;
  s.lr = read(j, "lr", s.lr);
  s.batch_size = read(j, "batch_size", s.batch_size);
  s.stage1_motion_steps = read(j, "stage1_motion_steps", s.stage1_motion_steps);
  s.stage1_uncertainty_steps = read(j, "stage1_uncertainty_steps", s.stage1_uncertainty_steps);
  s.stage2_steps = read(j, "stage2_steps", s.stage2_steps);
  s.stage2_frozen_steps = read(j, "stage2_frozen_steps", s.stage2_frozen_steps);
  s.cosine = read(j, "cosine", s.cosine);
  s.grad_clip = read(j, "grad_clip", s.grad_clip);
  s.window_stride = read(j, "window_stride", s.window_stride);
  s.max_windows = read(j, "max_windows", s.max_windows);
  s.log_every = read(j, "log_every", s.log_every);
  s.validate();
  return s;
}

void PipelineConfig::validate() const {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  stage1.validate();
  stage2.validate();
  windows.validate();
  train.validate();
  loss.validate();
  if (windows.crop_points != stage2.points && stage2.points != 0) {
    throw ConfigError("windows.crop_points must match stage2.points");
  }
}

json PipelineConfig::to_json() const {
  return {{"seed", seed},
          {"stage", stage},
          {"dataset", dataset},
          {"output", output},
          {"stage1", stage1.to_json()},
          {"stage2", stage2.to_json()},
          {"windows", windows.to_json()},
          {"train", train.to_json()},
          {"loss", loss.to_json()},
          {"uncertainty_form", form_name(uncertainty_form)},
          {"uncertainty", uncertainty},
          {"env_geometry", env_geometry},
          {"tracker_noise", noise_to_json(noise)}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  check_keys(j, c.to_json(), "config");
  try {
    c.seed = read<std::uint64_t>(j, "seed", c.seed);
    c.stage = read(j, "stage", c.stage);
    c.dataset = read(j, "dataset", c.dataset);
    c.output = read(j, "output", c.output);
    if (j.contains("stage1")) c.stage1 = Stage1Config::from_json(j["stage1"]);
    if (j.contains("stage2")) c.stage2 = Stage2Config::from_json(j["stage2"]);
    if (j.contains("windows")) c.windows = WindowOptions::from_json(j["windows"]);
    if (j.contains("train")) c.train = TrainSchedule::from_json(j["train"]);
    if (j.contains("loss")) c.loss = LossWeights::from_json(j["loss"]);
    if (j.contains("tracker_noise")) c.noise = noise_from_json(j["tracker_noise"]);
    const auto form = read(j, "uncertainty_form", form_name(c.uncertainty_form));
    if (form == "literal") {
      c.uncertainty_form = UncertaintyForm::kLiteral;
    } else if (form == "gaussian_nll") {
      c.uncertainty_form = UncertaintyForm::kGaussianNll;
    } else {
      throw ConfigError("uncertainty_form must be 'literal' or 'gaussian_nll'");
    }
    c.uncertainty = read(j, "uncertainty", c.uncertainty);
    c.env_geometry = read(j, "env_geometry", c.env_geometry);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  // Crop size follows the window options unless set explicitly.
  if (!(j.contains("stage2") && j["stage2"].contains("points"))) {
    c.stage2.points = c.windows.crop_points;
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string PipelineConfig::hash() const { return fnv1a_hex(to_json().dump()); }

PipelineConfig apply_variant(PipelineConfig c, const json& v) {
  if (!v.is_object()) throw ConfigError("variant must be an object");
  for (const auto& [key, value] : v.items()) {
    try {
      if (key == "name") {
        continue;
      } else if (key == "stage") {
        c.stage = value.get<int>();
      } else if (key == "crop") {
        const auto s = value.get<std::string>();
        if (s != "circle" && s != "square") throw ConfigError("crop must be circle or square");
        c.windows.crop = s == "square" ? CropShape::kSquare : CropShape::kCircle;
      } else if (key == "n_points") {
        const int n = value.get<int>();
        if (n != 500 && n != 1000 && n != 2000) throw ConfigError("n_points must be 500, 1000 or 2000");
        c.windows.crop_points = n;
        c.stage2.points = n;
      } else if (key == "env_semantic") {
        c.stage2.env_semantic = value.get<bool>();
      } else if (key == "env_geometry") {
        c.env_geometry = value.get<bool>();
      } else if (key == "contact_head") {
        c.stage2.contact_head = value.get<bool>();
      } else if (key == "uncertainty") {
        c.uncertainty = value.get<bool>();
      } else {
        throw ConfigError("unknown variant key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("variant key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

LossWeights effective_weights(const PipelineConfig& c) {
  LossWeights w = c.loss;
  if (!c.env_geometry) w.foot_contact = w.foot_height = w.ground = w.collision = 0.0;
  if (!c.stage2.contact_head) w.contact = 0.0;
  return w;
}

void apply_seed_override(PipelineConfig& c) {
  const char* s = std::getenv(kSeedEnvVar);
  if (!s || !*s) return;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument("trailing");
    c.seed = v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(kSeedEnvVar) + " must be a non-negative integer");
  }
}

Model make_model(const PipelineConfig& config, const KinematicTree& tree, bool with_stage2) {
  config.validate();
  Model m;
  m.config = config;
  m.tree = tree;
  torch::manual_seed(derive_seed(config.seed, 1, 0));
  m.stage1 = Stage1(config.stage1);
  if (with_stage2) {
    torch::manual_seed(derive_seed(config.seed, 2, 0));
    m.stage2 = Stage2(config.stage2);
  }
  return m;
}

Checkpoint make_checkpoint(const Model& m) {
  Checkpoint c;
  c.metadata = {{"format", "sparsepose-checkpoint"},
                {"config", m.config.to_json()},
                {"config_hash", m.config.hash()},
                {"skeleton", skeleton_to_json(m.tree)},
                {"stages", m.has_stage2() ? json{1, 2} : json{1}}};
  for (const auto& [name, p] : named_parameters(m)) c.tensors.emplace_back(name, p.detach().clone());
  for (const auto& [name, t] : m.optimizer_state) c.tensors.emplace_back(name, t);
  return c;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  const auto& meta = ckpt.metadata;
  if (meta.value("format", "") != "sparsepose-checkpoint") {
    throw IoError("checkpoint: unexpected format tag");
  }
  const auto config = PipelineConfig::from_json(meta.at("config"));
  const auto tree = skeleton_from_json(meta.at("skeleton"));
  const bool two = meta.at("stages").size() == 2;
  Model m = make_model(config, tree, two);
  torch::NoGradGuard guard;
  for (auto& [name, p] : named_parameters(m)) {
    const auto* t = ckpt.find(name);
    if (!t || !t->sizes().equals(p.sizes()) || t->scalar_type() != p.scalar_type()) {
      throw IoError("checkpoint: missing or mismatched tensor " + name);
    }
    p.copy_(*t);
  }
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("adam.", 0) == 0) m.optimizer_state.emplace_back(name, t.clone());
  }
  return m;
}

std::vector<SequenceData> prepare_split(const Dataset& data, const std::string& split,
                                        const TrackerNoise& noise) {
  std::vector<SequenceData> out;
  for (const auto& s : data.split(split)) out.push_back(prepare_sequence(s, data.tree, noise));
  return out;
}

TrainResult train_stage1(const PipelineConfig& cfg, const Dataset& data) {
  TrainResult r;
  r.model = make_model(cfg, data.tree, false);
  auto& net = r.model.stage1;
  net->train();
  TrainingSet set(data, cfg, nullptr);
  std::mt19937_64 rng(derive_seed(cfg.seed, 101, 0));
  const auto& s = cfg.train;
  const auto& w = cfg.loss;
  torch::optim::Adam opt(net->motion_parameters(), torch::optim::AdamOptions(s.lr));
  const int total = s.stage1_motion_steps + s.stage1_uncertainty_steps;
  bool head_added = false;
  for (int step = 0; step < total; ++step) {
    const bool phase_b = step >= s.stage1_motion_steps;
    const bool with_unc = phase_b && cfg.uncertainty;
    if (with_unc && !head_added) {
      opt.add_param_group(torch::optim::OptimizerParamGroup(
          net->uncertainty_parameters(), std::make_unique<torch::optim::AdamOptions>(s.lr)));
      head_added = true;
    }
    set_lr(opt, lr_at(s, step, total));
    const auto idx = set.draw(rng, s.batch_size);
    const auto b = set.batch(idx);
    const auto out = net->forward(b.x, b.history);
    const auto loss = loss_stage1(out.pose_mean, out.spread, b.pose_gt, w.motion, w.uncertainty,
                                  cfg.uncertainty_form, with_unc);
    const std::map<std::string, double> values = {
        {"motion", loss.motion.item<double>()},
        {"uncertainty", loss.uncertainty.item<double>()},
        {"total", loss.total.item<double>()}};
    auto record = step_record(1, step, values);
    record["phase"] = phase_b ? "B" : "A";
    if (!finite(loss.total) || (with_unc && !finite(loss.uncertainty))) {
      numeric_failure(cfg, 1, step, set.describe(idx), b, record);
    }
    opt.zero_grad();
    loss.total.backward();
    clip(opt, s.grad_clip);
    opt.step();
    progress(s, step, total, record);
    r.log.push_back(std::move(record));
  }
  r.model.optimizer_state = capture_optimizer(opt, r.model);
  return r;
}

TrainResult train_stage2(const PipelineConfig& cfg, const Dataset& data, const Model& init) {
  TrainResult r;
  r.model = make_model(cfg, data.tree, true);
  if (init.stage1->config().to_json() != cfg.stage1.to_json()) {
    throw ConfigError("stage-1 checkpoint was trained with a different stage1 config");
  }
  copy_parameters(*r.model.stage1, *init.stage1);
  const auto skel = TensorSkeleton::from(data.tree);
  TrainingSet set(data, cfg, &cfg.stage2.encoder);
  std::mt19937_64 rng(derive_seed(cfg.seed, 201, 0));
  auto gen = at::detail::createCPUGenerator(derive_seed(cfg.seed, 202, 0));
  const auto& s = cfg.train;
  const auto w = effective_weights(cfg);
  auto& m = r.model;
  m.stage1->train();
  m.stage2->train();
  for (auto& p : m.stage1->parameters()) p.set_requires_grad(false);
  torch::optim::Adam opt(m.stage2->parameters(), torch::optim::AdamOptions(s.lr));
  bool frozen = true;
  for (int step = 0; step < s.stage2_steps; ++step) {
    if (frozen && step >= s.stage2_frozen_steps) {
      for (auto& p : m.stage1->parameters()) p.set_requires_grad(true);
      opt.add_param_group(torch::optim::OptimizerParamGroup(
          m.stage1->parameters(), std::make_unique<torch::optim::AdamOptions>(s.lr)));
      frozen = false;
    }
    set_lr(opt, lr_at(s, step, s.stage2_steps));
    const auto idx = set.draw(rng, s.batch_size);
    const auto b = set.batch(idx);
    const auto f = run_forward(m, b, true, gen, !frozen, skel);
    LossReport report;
    try {
      report = batch_losses(m, b, f, w, cfg.uncertainty, skel);
    } catch (const NumericError& e) {
      numeric_failure(cfg, 2, step, set.describe(idx), b, {{"error", e.what()}});
    }
    auto record = step_record(2, step, report.values());
    record["frozen"] = frozen;
    if (!finite(report.total)) numeric_failure(cfg, 2, step, set.describe(idx), b, record);
    opt.zero_grad();
    report.total.backward();
    clip(opt, s.grad_clip);
    opt.step();
    progress(s, step, s.stage2_steps, record);
    r.log.push_back(std::move(record));
  }
  for (auto& p : m.stage1->parameters()) p.set_requires_grad(true);
  m.optimizer_state = capture_optimizer(opt, m);
  return r;
}

namespace {

struct WindowOutput {
  RowMatrixXd pose, spread, contacts;
  std::map<std::string, double> losses;
};

WindowOutput run_window(const Model& m, const SequenceData& seq, const RowMatrixXd& history,
                        int start, EpsilonMode mode, torch::Generator& gen) {
  torch::NoGradGuard guard;
  const auto& cfg = m.config;
  const auto skel = TensorSkeleton::from(m.tree);
  const auto w = build_window(seq, history, start, cfg.windows, m.tree,
                              m.has_stage2() ? &cfg.stage2.encoder : nullptr);
  const auto b = collate({&w});
  const auto f = run_forward(m, b, mode == EpsilonMode::kSample, gen, false, skel);
  WindowOutput out;
  out.pose = to_matrix(f.final_pose[0]);
  out.spread = to_matrix(f.s1.spread[0]);
  out.contacts = m.has_stage2() ? to_matrix(f.s2.contact[0])
                                : RowMatrixXd::Zero(cfg.windows.length, kNumJoints);
  if (seq.has_targets()) {
    out.losses = batch_losses(m, b, f, effective_weights(cfg), cfg.uncertainty, skel).values();
  }
  return out;
}

void place(InferenceResult& r, const WindowOutput& w, int start, int from) {
  const int n = static_cast<int>(w.pose.rows()) - (from - start);
  r.pose.middleRows(from, n) = w.pose.bottomRows(n);
  r.uncertainty.middleRows(from, n) = w.spread.bottomRows(n);
  r.contacts.middleRows(from, n) = w.contacts.bottomRows(n);
  for (const auto& [k, v] : w.losses) r.losses[k] += v;
  ++r.windows;
}

void finalize(InferenceResult& r, const Model& m, const RowMatrixXd& x) {
  const auto skel = TensorSkeleton::from(m.tree, torch::kFloat64);
  const auto pose = to_tensor(r.pose, torch::kFloat64);
  const auto head = to_tensor(RowMatrixXd(x.middleCols<3>(obs::kHead + obs::kPos)), torch::kFloat64);
  r.translation = to_matrix(head_anchored_translation(pose, head, skel));
  r.positions = to_matrix(head_anchored_positions(pose, head, skel).flatten(1));
  for (auto& [k, v] : r.losses) v /= std::max(1, r.windows);
}

void allocate(InferenceResult& r, int frames) {
  r.pose.setZero(frames, kPoseDim);
  r.uncertainty.setZero(frames, kPoseDim);
  r.contacts.setZero(frames, kNumJoints);
}

}  // namespace

InferenceResult infer(const Model& m, const SequenceData& seq, EpsilonMode mode,
                      std::uint64_t seed) {
  const int T = seq.frames(), L = m.config.windows.length;
  if (T < L) {
    throw ValidationError("stream has " + std::to_string(T) + " frames; at least " +
                          std::to_string(L) + " are required");
  }
  auto gen = at::detail::createCPUGenerator(seed);
  InferenceResult r;
  allocate(r, T);
  int produced = 0;
  while (produced < T) {
    const int start = std::min(produced, T - L);
    const auto w = run_window(m, seq, r.pose.topRows(produced), start, mode, gen);
    place(r, w, start, produced);
    produced = start + L;
  }
  finalize(r, m, seq.x);
  return r;
}

StreamingInference::StreamingInference(const Model& model, const EnvironmentCloud& cloud,
                                       EpsilonMode mode, std::uint64_t seed)
    : model_(model),
      seq_(stream_sequence(RowMatrixXd(0, kObsDim), cloud, 0)),
      mode_(mode),
      generator_(at::detail::createCPUGenerator(seed)) {
}

int StreamingInference::push(const Eigen::RowVectorXd& frame) {
  if (frame.size() != kObsDim) throw ShapeError("stream frame must hold 36 values");
  seq_.x.conservativeResize(seq_.x.rows() + 1, kObsDim);
  seq_.x.bottomRows(1) = frame;
  const int L = model_.config.windows.length;
  if (seq_.frames() - produced_ < L) return 0;
  return run(produced_);
}

int StreamingInference::finish() {
  const int T = seq_.frames(), L = model_.config.windows.length;
  if (T < L) throw ValidationError("stream shorter than one window");
  const int added = produced_ < T ? run(T - L) : 0;
  finalize(result_, model_, seq_.x);
  return added;
}

int StreamingInference::run(int start) {
  const int L = model_.config.windows.length;
  const int T = seq_.frames();
  RowMatrixXd keep_pose = result_.pose, keep_unc = result_.uncertainty, keep_c = result_.contacts;
  allocate(result_, T);
  result_.pose.topRows(keep_pose.rows()) = keep_pose;
  result_.uncertainty.topRows(keep_unc.rows()) = keep_unc;
  result_.contacts.topRows(keep_c.rows()) = keep_c;
  const auto w = run_window(model_, seq_, result_.pose.topRows(produced_), start, mode_, generator_);
  place(result_, w, start, produced_);
  const int added = start + L - produced_;
  produced_ = start + L;
  return added;
}

double mean_penetration_depth(const RowMatrixXd& positions, const KinematicTree& tree,
                              const std::vector<ScenePrimitive>& primitives) {
  if (positions.rows() == 0 || primitives.empty()) return 0.0;
  double sum = 0.0;
  std::vector<Vec3> joints(tree.size());
  for (int t = 0; t < positions.rows(); ++t) {
    for (int j = 0; j < tree.size(); ++j) joints[j] = positions.block<1, 3>(t, 3 * j).transpose();
    double deepest = 0.0;
    for (const auto& c : body_capsules(joints, tree)) {
      for (int k = 0; k <= 4; ++k) {
        const Vec3 p = c.a + (c.b - c.a) * (k / 4.0);
        for (const auto& prim : primitives) {
          deepest = std::max(deepest, c.radius - signed_distance(prim, p));
        }
      }
    }
    sum += deepest;
  }
  return sum / positions.rows();
}

json EvalResult::to_json() const {
  json l = json::object();
  for (const auto& [k, v] : losses) l[k] = v;
  return {{"metrics", metrics.to_json()}, {"penetration_mm", penetration_mm}, {"losses", l}};
}

void EvalResult::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  metrics.write(dir / "metrics");
  std::ofstream f(dir / "report.json");
  if (!f) throw IoError("cannot write " + (dir / "report.json").string());
  f << to_json().dump(2) << "\n";
}

EvalResult evaluate(const Model& m, const std::vector<SequenceData>& sequences) {
  if (sequences.empty()) throw ValidationError("evaluate: no sequences");
  MetricsAccumulator acc(sequences.front().fps);
  EvalResult r;
  double pen = 0.0;
  int frames = 0, windows = 0;
  for (const auto& seq : sequences) {
    if (!seq.has_targets()) throw ValidationError("evaluate: sequence without ground truth");
    const auto out = infer(m, seq, EpsilonMode::kZero);
    acc.add(out.pose, seq.pose, out.positions, seq.positions);
    pen += mean_penetration_depth(out.positions, m.tree, seq.primitives) * seq.frames();
    frames += seq.frames();
    for (const auto& [k, v] : out.losses) r.losses[k] += v * out.windows;
    windows += out.windows;
  }
  r.metrics = acc.report();
  r.penetration_mm = 1000.0 * pen / frames;
  for (auto& [k, v] : r.losses) v /= windows;
  return r;
}

namespace {

// Settings that determine a first-stage model.
std::string stage1_key(const PipelineConfig& c) {
  json t = c.train.to_json();
  for (const char* k : {"stage2_steps", "stage2_frozen_steps", "log_every"}) t.erase(k);
  return json{{"seed", c.seed},
              {"stage1", c.stage1.to_json()},
              {"length", c.windows.length},
              {"shift", c.windows.history_shift},
              {"train", t},
              {"motion", c.loss.motion},
              {"uncertainty_weight", c.loss.uncertainty},
              {"form", form_name(c.uncertainty_form)},
              {"uncertainty", c.uncertainty},
              {"noise", noise_to_json(c.noise)}}
      .dump();
}

}  // namespace

AblationTable ablation_run(const PipelineConfig& base, const json& variants, const Dataset& data,
                           const std::vector<std::uint64_t>& seeds, const std::string& split) {
  if (!variants.is_array() || variants.empty()) {
    throw ConfigError("variants must be a non-empty array of objects");
  }
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  std::vector<PipelineConfig> configs;
  for (const auto& v : variants) configs.push_back(apply_variant(base, v));
  const auto eval_set = prepare_split(data, split, base.noise);
  std::map<std::string, Model> stage1_models;
  AblationTable table;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    AblationRow row;
    row.variant = variants[i];
    row.name = variants[i].value("name", "variant_" + std::to_string(i));
    for (auto seed : seeds) {
      auto cfg = configs[i];
      cfg.seed = seed;
      const auto key = stage1_key(cfg);
      if (!stage1_models.count(key)) stage1_models.emplace(key, train_stage1(cfg, data).model);
      if (cfg.stage == 2) {
        row.per_seed.push_back(evaluate(train_stage2(cfg, data, stage1_models.at(key)).model, eval_set));
      } else {
        row.per_seed.push_back(evaluate(stage1_models.at(key), eval_set));
      }
    }
    const double n = static_cast<double>(row.per_seed.size());
    for (const auto& e : row.per_seed) {
      row.mean.mpjre_deg += e.metrics.mpjre_deg / n;
      row.mean.mpjpe_mm += e.metrics.mpjpe_mm / n;
      row.mean.mpjve_mm_s += e.metrics.mpjve_mm_s / n;
      row.mean.jitter_e2_m_s3 += e.metrics.jitter_e2_m_s3 / n;
      row.penetration_mm += e.penetration_mm / n;
      row.mean.frames = e.metrics.frames;
      row.mean.sequences = e.metrics.sequences;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

json AblationTable::to_json() const {
  json out = json::array();
  for (const auto& r : rows) {
    json seeds = json::array();
    for (const auto& e : r.per_seed) seeds.push_back(e.to_json());
    out.push_back({{"name", r.name},
                   {"variant", r.variant},
                   {"mean", r.mean.to_json()},
                   {"penetration_mm", r.penetration_mm},
                   {"per_seed", seeds}});
  }
  return {{"rows", out}};
}

std::string AblationTable::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(24) << "variant" << std::right << std::setw(10) << "MPJRE"
     << std::setw(10) << "MPJPE" << std::setw(10) << "MPJVE" << std::setw(10) << "Jitter"
     << std::setw(12) << "Pen(mm)" << "\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.name << std::right << std::setw(10) << r.mean.mpjre_deg
       << std::setw(10) << r.mean.mpjpe_mm << std::setw(10) << r.mean.mpjve_mm_s << std::setw(10)
       << r.mean.jitter_e2_m_s3 << std::setw(12) << r.penetration_mm << "\n";
  }
  return os.str();
}

}  // namespace sparsepose
