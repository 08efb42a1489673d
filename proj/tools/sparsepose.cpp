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


// Command-line front end: dataset generation, training, evaluation,
// inference and ablations.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sparsepose/npy.hpp"
#include "sparsepose/pipeline.hpp"

namespace sp = sparsepose;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3, kIo = 4 };

sp::PipelineConfig load_config(const std::string& path) {
  sp::PipelineConfig c = path.empty() ? sp::PipelineConfig{} : sp::PipelineConfig::load(path);
  sp::apply_seed_override(c);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw sp::IoError("cannot write " + path.string());
  f << text;
}

void write_log(const fs::path& path, const std::vector<json>& log) {
  std::ostringstream os;
  for (const auto& r : log) os << r.dump() << "\n";
  write_text(path, os.str());
}

json read_json_arg(const std::string& value) {
  try {
    if (fs::exists(value)) {
      std::ifstream f(value);
      if (!f) throw sp::IoError("cannot open " + value);
      return json::parse(f);
    }
    return json::parse(value);
  } catch (const json::exception& e) {
    throw sp::ConfigError("variants: " + std::string(e.what()));
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw sp::ConfigError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw sp::ConfigError("no seeds given");
  return seeds;
}

sp::Model load_model(const std::string& path) {
  return sp::model_from_checkpoint(sp::load_checkpoint(path));
}

struct GenerateArgs {
  std::string out = "data/toy";
  std::string skeleton;
  int train = 40;
  int test = 20;
  std::uint64_t seed = 0;
  bool interaction = false;
  std::vector<double> weights;
};

int run_generate(const GenerateArgs& a) {
  const auto tree =
      a.skeleton.empty() ? sp::KinematicTree::default_body() : sp::load_skeleton(a.skeleton);
  sp::DatasetSpec spec;
  if (a.interaction) {
    spec.scene.min_boxes = 1;
    spec.scene.min_walls = 1;
    spec.kind_weights = {0.5, 1.0, 2.0, 2.0};
  }
  if (!a.weights.empty()) spec.kind_weights = a.weights;
  std::uint64_t seed = a.seed;
  if (const char* s = std::getenv(sp::kSeedEnvVar); s && *s) {
    sp::PipelineConfig c;
    sp::apply_seed_override(c);
    seed = c.seed;
  }
  sp::make_dataset(a.train, a.test, seed, a.out, spec, tree);
  std::cout << "wrote " << a.train << " train and " << a.test << " test sequences to " << a.out
            << "\n";
  return kOk;
}

struct TrainArgs {
  std::string config;
  int stage = 0;
  std::string dataset;
  std::string output;
  std::string init;
};

int run_train(const TrainArgs& a) {
  auto cfg = load_config(a.config);
  if (a.stage) cfg.stage = a.stage;
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  if (!a.output.empty()) cfg.output = a.output;
  cfg.validate();
  const auto data = sp::load_dataset(cfg.dataset);
  const fs::path out = cfg.output;
  fs::create_directories(out);
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");
  if (cfg.stage == 1) {
    const auto r = sp::train_stage1(cfg, data);
    write_log(out / "train_stage1.jsonl", r.log);
    sp::save_checkpoint(sp::make_checkpoint(r.model), out / "stage1.ckpt");
    std::cout << "stage 1 checkpoint: " << (out / "stage1.ckpt").string() << "\n";
  } else {
    const fs::path init = a.init.empty() ? out / "stage1.ckpt" : fs::path(a.init);
    const auto first = load_model(init.string());
    const auto r = sp::train_stage2(cfg, data, first);
    write_log(out / "train_stage2.jsonl", r.log);
    sp::save_checkpoint(sp::make_checkpoint(r.model), out / "stage2.ckpt");
    std::cout << "stage 2 checkpoint: " << (out / "stage2.ckpt").string() << "\n";
  }
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const auto model = load_model(a.checkpoint);
  const std::string dataset = a.dataset.empty() ? model.config.dataset : a.dataset;
  const auto data = sp::load_dataset(dataset);
  const auto result = sp::evaluate(model, sp::prepare_split(data, a.split, model.config.noise));
  const fs::path out = a.out.empty() ? fs::path(model.config.output) / ("eval_" + a.split) : fs::path(a.out);
  result.write(out);
  std::cout << result.metrics.to_text() << "penetration_mm = " << result.penetration_mm << "\n";
  return kOk;
}

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string env;
  std::string mode = "zero";
  std::uint64_t seed = 0;
  std::string out = "infer_out";
};

int run_infer(const InferArgs& a) {
  const auto model = load_model(a.checkpoint);
  const auto x = sp::read_npy_f32(a.input);
  const auto cloud = sp::load_cloud(a.env);
  const auto seq = sp::stream_sequence(x, cloud);
  const auto mode = a.mode == "sample" ? sp::EpsilonMode::kSample : sp::EpsilonMode::kZero;
  const auto r = sp::infer(model, seq, mode, a.seed);
  const fs::path out = a.out;
  fs::create_directories(out);
  sp::write_npy_f32(out / "pose.npy", r.pose);
  sp::write_npy_f32(out / "translation.npy", r.translation);
  sp::write_npy_f32(out / "positions.npy", r.positions);
  sp::write_npy_f32(out / "contacts.npy", r.contacts);
  sp::write_npy_f32(out / "uncertainty.npy", r.uncertainty);
  std::cout << r.pose.rows() << " frames in " << r.windows << " windows written to "
            << out.string() << "\n";
  return kOk;
}

struct TrackArgs {
  std::string sequence;
  std::string skeleton;
  std::string out = "tracking.npy";
  bool noise = false;
};

int run_track(const TrackArgs& a) {
  const fs::path dir = a.sequence;
  const fs::path skeleton =
      a.skeleton.empty() ? dir.parent_path().parent_path() / "skeleton.json" : fs::path(a.skeleton);
  const auto tree = sp::load_skeleton(skeleton);
  sp::TrackerNoise noise;
  noise.enabled = a.noise;
  const auto seq = sp::prepare_sequence(sp::load_sequence(dir), tree, noise);
  sp::write_npy_f32(a.out, seq.x);
  std::cout << seq.frames() << " frames written to " << a.out << "\n";
  return kOk;
}

struct AblateArgs {
  std::string config;
  std::string variants;
  std::string seeds = "0,1,2";
  std::string dataset;
  std::string split = "test";
  std::string out;
};

int run_ablate(const AblateArgs& a) {
  auto cfg = load_config(a.config);
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  auto variants = read_json_arg(a.variants);
  if (variants.is_object() && variants.contains("variants")) variants = variants["variants"];
  const auto data = sp::load_dataset(cfg.dataset);
  const auto table = sp::ablation_run(cfg, variants, data, parse_seeds(a.seeds), a.split);
  const fs::path out = a.out.empty() ? fs::path(cfg.output) / "ablation" : fs::path(a.out);
  write_text(out / "ablation.json", table.to_json().dump(2) + "\n");
  write_text(out / "ablation.txt", table.to_text());
  std::cout << table.to_text();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-body pose from three tracked points and a scene point cloud"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Synthesize a toy dataset");
  g->add_option("--out", gen.out, "Output directory")->capture_default_str();
  g->add_option("--train", gen.train, "Training sequences")->capture_default_str();
  g->add_option("--test", gen.test, "Test sequences")->capture_default_str();
  g->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  g->add_option("--skeleton", gen.skeleton, "Skeleton JSON (default: bundled body)");
  g->add_flag("--interaction", gen.interaction, "Every scene has a box and a wall; favor sit/reach");
  g->add_option("--kind-weights", gen.weights, "Relative weights of walk squat sit reach")
      ->expected(4)
      ->delimiter(',');

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one stage");
  t->add_option("--config", tr.config, "Config JSON");
  t->add_option("--stage", tr.stage, "Stage to train")->check(CLI::IsMember({1, 2}));
  t->add_option("--dataset", tr.dataset, "Dataset directory (overrides config)");
  t->add_option("--output", tr.output, "Run directory (overrides config)");
  t->add_option("--init", tr.init, "Stage-1 checkpoint (default: <output>/stage1.ckpt)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--dataset", ev.dataset, "Dataset directory (default: from checkpoint)");
  e->add_option("--split", ev.split, "train or test")->capture_default_str();
  e->add_option("--out", ev.out, "Report directory");

  InferArgs in;
  auto* i = app.add_subcommand("infer", "Run inference on a tracking stream");
  i->add_option("--checkpoint", in.checkpoint, "Checkpoint file")->required();
  i->add_option("--input", in.input, "T x 36 float32 .npy tracking stream")->required();
  i->add_option("--env", in.env, "Point cloud (.spc or x y z text)")->required();
  i->add_option("--mode", in.mode, "Hypothesis noise: zero or sample")
      ->check(CLI::IsMember({"zero", "sample"}))
      ->capture_default_str();
  i->add_option("--seed", in.seed, "Seed for sample mode")->capture_default_str();
  i->add_option("--out", in.out, "Output directory")->capture_default_str();

  TrackArgs tk;
  auto* k = app.add_subcommand("track", "Extract the T x 36 tracking stream of a dataset sequence");
  k->add_option("--sequence", tk.sequence, "Sequence directory")->required();
  k->add_option("--skeleton", tk.skeleton, "Skeleton JSON (default: the dataset's)");
  k->add_option("--out", tk.out, "Output .npy")->capture_default_str();
  k->add_flag("--noise", tk.noise, "Add the default tracker noise");

  std::string shown;
  auto* c = app.add_subcommand("config", "Print the effective config with every key");
  c->add_option("--config", shown, "Config JSON (default: built-in defaults)");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Train and evaluate model variants");
  a->add_option("--config", ab.config, "Base config JSON");
  a->add_option("--variants", ab.variants, "JSON list of variants, inline or as a file")
      ->required();
  a->add_option("--seeds", ab.seeds, "Comma-separated seeds")->capture_default_str();
  a->add_option("--dataset", ab.dataset, "Dataset directory (overrides config)");
  a->add_option("--split", ab.split, "Evaluation split")->capture_default_str();
  a->add_option("--out", ab.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*i) return run_infer(in);
    if (*a) return run_ablate(ab);
    if (*k) return run_track(tk);
    if (*c) {
      std::cout << load_config(shown).to_json().dump(2) << "\n";
      return kOk;
    }
  } catch (const sp::NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return kNumeric;
  } catch (const sp::IoError& err) {
    std::cerr << "i/o error: " << err.what() << "\n";
    return kIo;
  } catch (const sp::Error& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kConfig;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "i/o error: " << err.what() << "\n";
    return kIo;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  return kOk;
}
