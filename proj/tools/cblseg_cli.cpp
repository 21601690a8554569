// Copyright 2026 The cblseg Authors.
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

// cblseg: synthetic scenes, boundary metrics, sub-scene boundary mining,
// gradient checks, training and evaluation from the command line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cblseg/boundary_metrics.hpp"
#include "cblseg/cbl_loss.hpp"
#include "cblseg/checkpoint.hpp"
#include "cblseg/gradcheck.hpp"
#include "cblseg/hierarchy.hpp"
#include "cblseg/manifest.hpp"
#include "cblseg/point_cloud.hpp"
#include "cblseg/scene_synth.hpp"
#include "cblseg/subscene_mining.hpp"
#include "cblseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cblseg {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  double radius = kDefaultBoundaryRadius;
  double tau = 1.0;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  int stages = 3;
  std::string variant = "argmax";
  double kl_threshold = 0.5;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--radius", f.radius, "Boundary neighborhood radius (m)")->capture_default_str();
  cmd->add_option("--tau", f.tau, "CBL temperature")->capture_default_str();
  cmd->add_option("--lambda", f.lambda, "CBL loss weight")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for every random choice")->capture_default_str();
  cmd->add_option("--stages", f.stages, "Number of sampling stages")->capture_default_str();
  cmd->add_option("--variant", f.variant, "Mining variant: argmax | kl | nearest")->capture_default_str();
  cmd->add_option("--kl-threshold", f.kl_threshold, "KL threshold for --variant kl")->capture_default_str();
}

json common_json(const CommonFlags& f) {
  return {{"radius", f.radius}, {"tau", f.tau},         {"lambda", f.lambda},
          {"seed", f.seed},     {"stages", f.stages},   {"variant", f.variant},
          {"kl_threshold", f.kl_threshold}};
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
}

// Synthetic data source: inline JSON or a path to a JSON file with keys
// seed, points, classes, layout, jitter, extent, train, test.
struct SynthSource {
  SynthConfig config;
  int train = 20;
  int test = 10;
  json raw;
};

SynthSource parse_synth(const std::string& arg) {
  json j;
  try {
    if (!arg.empty() && arg.front() == '{') {
      j = json::parse(arg);
    } else {
      std::ifstream in(arg);
      if (!in) throw InputError("cannot open synth config " + arg);
      j = json::parse(in);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("bad synth config: ") + e.what());
  }
  SynthSource s;
  try {
    s.config.seed = j.value("seed", std::uint64_t{42});
    s.config.num_points = j.value("points", 2000);
    s.config.num_classes = j.value("classes", 4);
    s.config.layout = parse_layout(j.value("layout", std::string("planar-rooms")));
    s.config.jitter = j.value("jitter", 0.0);
    s.config.extent = j.value("extent", 2.0);
    s.train = j.value("train", 20);
    s.test = j.value("test", 10);
  } catch (const json::exception& e) {
    throw InputError(std::string("bad synth config: ") + e.what());
  }
  s.config.validate();
  s.raw = j;
  return s;
}

std::vector<fs::path> scene_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no .txt scenes in " + dir);
  return files;
}

struct SceneSet {
  std::vector<PointCloud> scenes;
  std::vector<std::string> names;
  std::map<std::string, std::string> digests;
};

SceneSet load_scenes(const std::string& dir, const std::string& synth, bool test_half) {
  SceneSet set;
  if (!dir.empty() && !synth.empty()) throw InputError("use either --scenes or --synth");
  if (!dir.empty()) {
    for (const auto& f : scene_files(dir)) {
      set.scenes.push_back(read_cloud_file(f.string()));
      set.names.push_back(f.filename().string());
      set.digests[f.string()] = sha256_file(f.string());
    }
    return set;
  }
  if (synth.empty()) throw InputError("one of --scenes or --synth is required");
  SynthSource src = parse_synth(synth);
  auto split = generate_split(src.config, src.train, src.test);
  set.scenes = test_half ? std::move(split.second) : std::move(split.first);
  for (std::size_t i = 0; i < set.scenes.size(); ++i)
    set.names.push_back((test_half ? "test_" : "train_") + std::to_string(i));
  return set;
}

int run_synth(const CommonFlags& f, const std::string& out_dir, int count, int test, int points,
              int classes, const std::string& layout, double jitter, double extent) {
  SynthConfig c;
  c.seed = f.seed;
  c.num_points = points;
  c.num_classes = classes;
  c.layout = parse_layout(layout);
  c.jitter = jitter;
  c.extent = extent;
  c.validate();
  if (count < 1 || test < 0) throw InputError("--count must be >= 1 and --test >= 0");
  fs::create_directories(out_dir);
  auto name = [](int i) {
    std::ostringstream s;
    s << "scene_" << std::setw(3) << std::setfill('0') << i << ".txt";
    return s.str();
  };
  if (test == 0 && count == 1) {
    write_cloud_file((fs::path(out_dir) / name(0)).string(), generate(c));
  } else if (test == 0) {
    for (int i = 0; i < count; ++i) {
      SynthConfig ci = c;
      ci.seed = c.seed + static_cast<std::uint64_t>(i);
      write_cloud_file((fs::path(out_dir) / name(i)).string(), generate(ci));
    }
  } else {
    auto [train, held_out] = generate_split(c, count, test);
    fs::create_directories(fs::path(out_dir) / "train");
    fs::create_directories(fs::path(out_dir) / "test");
    for (std::size_t i = 0; i < train.size(); ++i)
      write_cloud_file((fs::path(out_dir) / "train" / name(static_cast<int>(i))).string(), train[i]);
    for (std::size_t i = 0; i < held_out.size(); ++i)
      write_cloud_file((fs::path(out_dir) / "test" / name(static_cast<int>(i))).string(), held_out[i]);
  }
  RunManifest m{"synth",
                {{"count", count}, {"test", test}, {"points", points}, {"classes", classes},
                 {"layout", layout}, {"jitter", jitter}, {"extent", extent}},
                f.seed, kVersion, {}};
  write_manifest(fs::path(out_dir) / "manifest.json", m);
  return kExitOk;
}

int run_metrics(const CommonFlags& f, const std::string& file) {
  PointCloud cloud = read_cloud_file(file);
  if (!cloud.has_predictions()) throw InputError(file + ": missing pred column");
  std::cout << to_json(full_report(cloud, f.radius)).dump() << '\n';
  return kExitOk;
}

int run_mine(const CommonFlags& f, const std::string& file, double cell) {
  MiningConfig mc;
  mc.variant = parse_mining_variant(f.variant);
  mc.kl_threshold = f.kl_threshold;
  mc.validate();
  PointCloud cloud = read_cloud_file(file);
  SamplingHierarchy h = build_hierarchy(cloud, cell, f.radius, f.stages);
  for (std::size_t n = 0; n < h.num_stages(); ++n) {
    BoundarySet b = mine_stage_boundaries(h, n, mc);
    std::cout << json{{"stage", n}, {"variant", to_string(mc.variant)}, {"indices", b.indices}}.dump()
              << '\n';
  }
  return kExitOk;
}

int run_gradcheck(const CommonFlags& f, int instances, bool network) {
  CblConfig cfg;
  cfg.temperature = f.tau;
  cfg.lambda = f.lambda;
  GradcheckReport r = gradcheck_cbl(instances, f.seed, cfg);
  json out{{"instances", r.instances}, {"max_rel_err", r.max_rel_err}};
  bool pass = r.max_rel_err < kCblGradTolerance;
  if (network) {
    GradcheckReport n = gradcheck_network(f.seed, cfg);
    out["network_max_rel_err"] = n.max_rel_err;
    pass = pass && n.max_rel_err < kNetworkGradTolerance;
  }
  out["pass"] = pass;
  std::cout << out.dump() << '\n';
  return pass ? kExitOk : kExitRuntime;
}

struct TrainFlags {
  std::string scenes;
  std::string synth;
  std::string out;
  std::string log;
  int epochs = 60;
  double lr = 0.01;
  double momentum = 0.98;
  double weight_decay = 1e-3;
  double lr_decay = std::pow(0.1, 1.0 / 20.0);
  double cell = NetConfig{}.base_cell;
  bool no_cbl = false;
  bool cbl_input_only = false;
  bool no_multiscale = false;
};

int run_train(const CommonFlags& f, const TrainFlags& t) {
  SceneSet data = load_scenes(t.scenes, t.synth, false);
  int classes = 1;
  for (const auto& s : data.scenes) classes = std::max(classes, s.num_classes);

  NetConfig nc;
  nc.num_classes = classes;
  nc.widths = NetConfig{}.widths;
  if (f.stages < 1) throw InputError("--stages must be >= 1");
  nc.widths.resize(static_cast<std::size_t>(f.stages), nc.widths.back());
  for (int n = 3; n < f.stages; ++n) nc.widths[static_cast<std::size_t>(n)] = nc.widths[static_cast<std::size_t>(n - 1)] * 2;
  nc.cbl_stages.clear();
  for (int n = 0; n < f.stages; ++n) nc.cbl_stages.push_back(n);
  if (t.cbl_input_only) nc.cbl_stages = {0};
  nc.multi_scale_head = !t.no_multiscale;
  nc.seed = f.seed;
  nc.base_cell = t.cell;
  nc.base_radius = f.radius;

  TrainConfig tc;
  tc.epochs = t.epochs;
  tc.learning_rate = t.lr;
  tc.momentum = t.momentum;
  tc.weight_decay = t.weight_decay;
  tc.lr_decay = t.lr_decay;
  tc.cbl.temperature = f.tau;
  tc.cbl.lambda = t.no_cbl ? 0.0 : f.lambda;
  tc.mining.variant = parse_mining_variant(f.variant);
  tc.mining.kl_threshold = f.kl_threshold;
  tc.boundary_radius = f.radius;
  tc.validate();

  SegNet net(nc);
  TrainResult result;
  try {
    result = train(net, data.scenes, tc, [](const EpochLog& e) {
      std::cerr << "epoch " << e.epoch << " ce " << e.ce << " cbl " << e.cbl_total << " total "
                << e.total << '\n';
    });
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  save_checkpoint_file(t.out, net);
  const std::string log_path = t.log.empty() ? t.out + ".log.csv" : t.log;
  {
    std::ofstream log(log_path);
    if (!log) throw InputError("cannot write " + log_path);
    write_log_csv(log, result.log);
  }
  json cfg = common_json(f);
  cfg.update({{"epochs", t.epochs}, {"lr", t.lr}, {"momentum", t.momentum},
              {"weight_decay", t.weight_decay}, {"lr_decay", t.lr_decay}, {"cell", t.cell},
              {"no_cbl", t.no_cbl}, {"cbl_input_only", t.cbl_input_only},
              {"multi_scale_head", !t.no_multiscale}, {"scenes", t.scenes}, {"synth", t.synth}});
  write_manifest(t.out + ".manifest.json", {"train", cfg, f.seed, kVersion, data.digests});
  return kExitOk;
}

int run_eval(const CommonFlags& f, const std::string& checkpoint, const std::string& scenes,
             const std::string& synth, const std::string& csv) {
  SegNet net = load_checkpoint_file(checkpoint);
  SceneSet data = load_scenes(scenes, synth, true);
  EvalResult r = evaluate(net, data.scenes, f.radius);
  std::cout << to_json(r.aggregate).dump() << '\n';
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) throw InputError("cannot write " + csv);
    out << "scene,miou,miou_boundary,miou_inner,b_iou\n" << std::setprecision(17);
    auto cell = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
    for (std::size_t i = 0; i < r.per_scene.size(); ++i) {
      const auto& s = r.per_scene[i];
      out << data.names[i] << ',' << cell(s.miou_overall) << ',' << cell(s.miou_boundary) << ','
          << cell(s.miou_inner) << ',' << s.b_iou << '\n';
    }
  }
  auto digests = data.digests;
  digests[checkpoint] = sha256_file(checkpoint);
  json cfg = common_json(f);
  cfg.update({{"checkpoint", checkpoint}, {"scenes", scenes}, {"synth", synth}});
  if (!csv.empty()) write_manifest(csv + ".manifest.json", {"eval", cfg, f.seed, kVersion, digests});
  return kExitOk;
}

}  // namespace
}  // namespace cblseg

int main(int argc, char** argv) {
  using namespace cblseg;
  CLI::App app{"Boundary metrics and contrastive boundary learning for point clouds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  CommonFlags common;

  auto* synth = app.add_subcommand("synth", "Generate synthetic labeled scenes");
  std::string synth_out;
  int count = 1, test = 0, points = 2000, classes = 4;
  std::string layout = "planar-rooms";
  double jitter = 0.0, extent = 2.0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", count, "Number of (training) scenes")->capture_default_str();
  synth->add_option("--test", test, "Held-out scenes; writes train/ and test/ when > 0")->capture_default_str();
  synth->add_option("--points", points)->capture_default_str();
  synth->add_option("--classes", classes)->capture_default_str();
  synth->add_option("--layout", layout, "planar-rooms | checkerboard | blobs")->capture_default_str();
  synth->add_option("--jitter", jitter, "Position noise sigma (m)")->capture_default_str();
  synth->add_option("--extent", extent, "Scene extent (m)")->capture_default_str();
  add_common(synth, common);

  auto* metrics = app.add_subcommand("metrics", "Boundary-aware metrics of a predicted cloud");
  std::string metrics_file;
  metrics->add_option("file", metrics_file, "Cloud with x y z gt pred columns")->required();
  add_common(metrics, common);

  auto* mine = app.add_subcommand("mine", "Per-stage ground-truth boundary mining");
  std::string mine_file;
  double cell = NetConfig{}.base_cell;
  mine->add_option("file", mine_file, "Cloud with x y z gt columns")->required();
  mine->add_option("--cell", cell, "First sub-sampling cell size (m)")->capture_default_str();
  add_common(mine, common);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the CBL gradient");
  int instances = 20;
  bool network = false;
  grad->add_option("--instances", instances)->capture_default_str();
  grad->add_flag("--network", network, "Also check the full network with CE + CBL");
  add_common(grad, common);

  auto* tr = app.add_subcommand("train", "Train the segmentation network");
  TrainFlags tf;
  tr->add_option("--scenes", tf.scenes, "Directory of scene .txt files");
  tr->add_option("--synth", tf.synth, "Synthetic source: JSON text or file");
  tr->add_option("--out", tf.out, "Checkpoint path")->required();
  tr->add_option("--log", tf.log, "CSV log path (default <out>.log.csv)");
  tr->add_option("--epochs", tf.epochs)->capture_default_str();
  tr->add_option("--lr", tf.lr)->capture_default_str();
  tr->add_option("--momentum", tf.momentum)->capture_default_str();
  tr->add_option("--weight-decay", tf.weight_decay)->capture_default_str();
  tr->add_option("--lr-decay", tf.lr_decay, "Per-epoch learning-rate factor")->capture_default_str();
  tr->add_option("--cell", tf.cell, "First sub-sampling cell size (m)")->capture_default_str();
  tr->add_flag("--no-cbl", tf.no_cbl, "Train with cross-entropy only");
  tr->add_flag("--cbl-input-only", tf.cbl_input_only, "Apply CBL on the input stage only");
  tr->add_flag("--no-multiscale", tf.no_multiscale, "Plain head instead of the multi-scale head");
  add_common(tr, common);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt, ev_scenes, ev_synth, ev_csv;
  ev->add_option("--checkpoint", ckpt)->required();
  ev->add_option("--scenes", ev_scenes, "Directory of scene .txt files");
  ev->add_option("--synth", ev_synth, "Synthetic source (its test half is used)");
  ev->add_option("--csv", ev_csv, "Per-scene CSV output");
  add_common(ev, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*synth) return run_synth(common, synth_out, count, test, points, classes, layout, jitter, extent);
    if (*metrics) return run_metrics(common, metrics_file);
    if (*mine) return run_mine(common, mine_file, cell);
    if (*grad) return run_gradcheck(common, instances, network);
    if (*tr) return run_train(common, tf);
    if (*ev) return run_eval(common, ckpt, ev_scenes, ev_synth, ev_csv);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}
