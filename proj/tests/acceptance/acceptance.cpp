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

// Acceptance suite: one PASS/FAIL line per criterion.
//
// Criteria 1-4, 7 and 8 check correctness and determinism; any failure there
// makes the process exit non-zero. Criteria 5 and 6 are directional
// comparisons of trained models on synthetic scenes. Their outcome is printed
// with the raw numbers, but it does not change the exit status: a red line
// there is a research result, not a defect.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "cblseg/boundary_metrics.hpp"
#include "cblseg/checkpoint.hpp"
#include "cblseg/gradcheck.hpp"
#include "cblseg/hierarchy.hpp"
#include "cblseg/scene_synth.hpp"
#include "cblseg/subscene_mining.hpp"
#include "cblseg/trainer.hpp"
#include "oracles/oracles.hpp"

using namespace cblseg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int hard_failures = 0;

void report(int id, bool pass, const std::string& detail, bool directional = false) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass && !directional) ++hard_failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

PointCloud random_cloud(std::mt19937_64& rng, int n, int k) {
  PointCloud c;
  c.positions = oracle::random_points(rng, n);
  c.gt_labels = oracle::random_labels(rng, n, k);
  c.num_classes = k;
  return c;
}

bool close(const std::optional<double>& a, const std::optional<double>& b, double tol) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::abs(*a - *b) <= tol;
}

void criterion1() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  int clouds = 0;
  bool ok = true;
  for (; clouds < 50; ++clouds) {
    const int n = std::uniform_int_distribution<int>(1, 1000)(rng);
    const int k = std::uniform_int_distribution<int>(1, 5)(rng);
    const double r = std::vector<double>{0.05, 0.1, 0.2}[static_cast<std::size_t>(clouds % 3)];
    auto c = random_cloud(rng, n, k);
    ok &= extract_boundary(c.gt_labels, build_index(c.positions), r).indices ==
          oracle::boundary(c.positions, c.gt_labels, r);
  }
  const double secs = seconds_since(t0);
  report(1, ok && secs < 30.0,
         std::to_string(clouds) + " clouds, exact match " + (ok ? "yes" : "no") + ", " +
             fmt("%.2f s (limit 30 s)", secs));
}

void criterion2() {
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 1000)(rng);
    const int k = std::uniform_int_distribution<int>(1, 5)(rng);
    const double r = std::vector<double>{0.05, 0.1, 0.2}[static_cast<std::size_t>(trial % 3)];
    auto c = random_cloud(rng, n, k);
    std::vector<Label> pred = c.gt_labels;
    std::bernoulli_distribution flip(0.25);
    for (auto& v : pred)
      if (flip(rng)) v = std::uniform_int_distribution<int>(0, k - 1)(rng);
    c.pred_labels = pred;
    auto got = full_report(c, r);
    auto want = oracle::metrics(c.positions, c.gt_labels, pred, k, r);
    ok &= close(got.miou_overall, want.miou, 1e-12) &&
          close(got.miou_boundary, want.miou_boundary, 1e-12) &&
          close(got.miou_inner, want.miou_inner, 1e-12) &&
          close(got.mean_class_accuracy, want.macc, 1e-12) &&
          std::abs(got.b_iou - want.b_iou) <= 1e-12 &&
          std::abs(got.overall_accuracy - want.oa) <= 1e-12 &&
          got.boundary_count == want.boundary_count;
    for (std::size_t i = 0; i < want.per_class.size(); ++i) {
      ok &= close(got.per_class_iou[i], want.per_class[i], 1e-12);
      if (got.per_class_iou[i] && want.per_class[i])
        worst = std::max(worst, std::abs(*got.per_class_iou[i] - *want.per_class[i]));
    }
    if (got.miou_overall && want.miou) worst = std::max(worst, std::abs(*got.miou_overall - *want.miou));
    worst = std::max(worst, std::abs(got.b_iou - want.b_iou));

    // the same cloud predicted perfectly
    c.pred_labels = c.gt_labels;
    auto perfect = full_report(c, r);
    ok &= perfect.miou_overall.value_or(0.0) == 1.0 && perfect.b_iou == 1.0;
  }
  report(2, ok, "20 clouds, max |diff| " + fmt("%.3g", worst) + " (limit 1e-12), perfect = 1 exactly");
}

void criterion3() {
  auto t0 = Clock::now();
  auto cbl = gradcheck_cbl(24, 3003, CblConfig{});
  CblConfig net_cfg;
  net_cfg.lambda = 0.1;
  double net_err = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    net_err = std::max(net_err, gradcheck_network(seed, net_cfg).max_rel_err);
  const double secs = seconds_since(t0);
  const bool ok = cbl.instances >= 20 && cbl.max_rel_err < kCblGradTolerance &&
                  net_err < kNetworkGradTolerance && secs < 120.0;
  report(3, ok,
         std::to_string(cbl.instances) + " CBL instances max rel err " + fmt("%.3g", cbl.max_rel_err) +
             " (limit 1e-5); network " + fmt("%.3g", net_err) + " (limit 1e-4); " +
             fmt("%.1f s", secs));
}

void criterion4() {
  std::mt19937_64 rng(4004);
  double worst = 0.0;
  bool majority_ok = true;
  int strict = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = std::uniform_int_distribution<int>(50, 1000)(rng);
    const int k = std::uniform_int_distribution<int>(2, 5)(rng);
    auto c = random_cloud(rng, n, k);
    auto h = build_hierarchy(c, 0.08, 0.1, 3);
    std::vector<double> hist(static_cast<std::size_t>(k), 0.0);
    for (Label l : c.gt_labels) hist[static_cast<std::size_t>(l)] += 1.0 / n;
    std::vector<std::vector<std::vector<int>>> maps;
    for (std::size_t s = 0; s < 3; ++s) {
      if (s > 0) maps.push_back(h.stage(s).pooling_map);
      auto th = oracle::transitive_histograms(maps, c.gt_labels, k);
      const auto& st = h.stage(s);
      auto argmax = stage_labels_argmax(h, s);
      std::vector<double> mean(static_cast<std::size_t>(k), 0.0);
      for (std::size_t i = 0; i < st.size(); ++i) {
        const int size = std::accumulate(th[i].begin(), th[i].end(), 0);
        for (int cl = 0; cl < k; ++cl)
          mean[static_cast<std::size_t>(cl)] += st.label_dists(static_cast<Eigen::Index>(i), cl) * size / n;
        const auto top = std::max_element(th[i].begin(), th[i].end());
        if (std::count(th[i].begin(), th[i].end(), *top) == 1) {
          ++strict;
          majority_ok &= argmax[i] == static_cast<Label>(top - th[i].begin());
        }
      }
      for (int cl = 0; cl < k; ++cl)
        worst = std::max(worst, std::abs(mean[static_cast<std::size_t>(cl)] - hist[static_cast<std::size_t>(cl)]));
    }
  }
  report(4, worst <= 1e-9 && majority_ok,
         "20 hierarchies, max conservation error " + fmt("%.3g", worst) + " (limit 1e-9), " +
             std::to_string(strict) + " strict majorities " + (majority_ok ? "all match" : "MISMATCH"));
}

// ---- training protocol shared by criteria 5, 6 and 8 ----

enum class Variant { kBaseline, kInputOnly, kSubScene };
constexpr Variant kVariants[] = {Variant::kBaseline, Variant::kInputOnly, Variant::kSubScene};
const char* name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "no-cbl";
    case Variant::kInputOnly: return "cbl-input";
    case Variant::kSubScene: return "cbl-subscene";
  }
  return "";
}

struct RunOutput {
  MetricsReport report;
  std::string log_csv;
  std::string checkpoint;
};

struct Benchmark {
  std::vector<PointCloud> train, test;
};

Benchmark benchmark() {
  SynthConfig s;
  s.seed = 42;
  auto [train, test] = generate_split(s, 20, 10);
  return {std::move(train), std::move(test)};
}

RunOutput run(const Benchmark& data, Variant v, std::uint64_t seed) {
  NetConfig nc;
  nc.num_classes = 4;
  nc.seed = seed;
  if (v == Variant::kInputOnly) nc.cbl_stages = {0};
  TrainConfig tc;
  if (v == Variant::kBaseline) tc.cbl.lambda = 0.0;
  SegNet net(nc);
  auto result = train(net, data.train, tc);
  RunOutput out;
  out.report = evaluate(net, data.test, tc.boundary_radius).aggregate;
  std::ostringstream log, ckpt;
  write_log_csv(log, result.log);
  save_checkpoint(ckpt, net);
  out.log_csv = log.str();
  out.checkpoint = ckpt.str();
  return out;
}

struct Means {
  double miou = 0, b_iou = 0, boundary = 0, inner = 0;
};

void criteria5to8() {
  const auto data = benchmark();
  const std::uint64_t seeds[] = {0, 1, 2};
  std::vector<std::vector<RunOutput>> runs(3);
  Means mean[3];
  auto t0 = Clock::now();
  for (int vi = 0; vi < 3; ++vi) {
    for (std::uint64_t seed : seeds) {
      runs[static_cast<std::size_t>(vi)].push_back(run(data, kVariants[vi], seed));
      const auto& r = runs[static_cast<std::size_t>(vi)].back().report;
      std::printf("  run %-13s seed %llu: mIoU %.4f  B-IoU %.4f  mIoU@boundary %.4f  mIoU@inner %.4f\n",
                  name(kVariants[vi]), static_cast<unsigned long long>(seed), r.miou_overall.value_or(NAN),
                  r.b_iou, r.miou_boundary.value_or(NAN), r.miou_inner.value_or(NAN));
      std::fflush(stdout);
      mean[vi].miou += r.miou_overall.value_or(NAN) / 3;
      mean[vi].b_iou += r.b_iou / 3;
      mean[vi].boundary += r.miou_boundary.value_or(NAN) / 3;
      mean[vi].inner += r.miou_inner.value_or(NAN) / 3;
    }
  }
  for (int vi = 0; vi < 3; ++vi)
    std::printf("  mean %-13s        : mIoU %.4f  B-IoU %.4f  mIoU@boundary %.4f  mIoU@inner %.4f\n",
                name(kVariants[vi]), mean[vi].miou, mean[vi].b_iou, mean[vi].boundary, mean[vi].inner);
  std::printf("  9 training runs in %.0f s\n", seconds_since(t0));

  const Means& base = mean[0];
  const Means& input = mean[1];
  const Means& sub = mean[2];
  // CBL as proposed: sub-scene boundaries at every stage.
  const double b_gain = sub.boundary - base.boundary;
  const double biou_gain = sub.b_iou - base.b_iou;
  const double inner_gain = sub.inner - base.inner;
  const bool c5 = sub.b_iou > base.b_iou && sub.boundary > base.boundary &&
                  b_gain > inner_gain && biou_gain > inner_gain;
  report(5, c5,
         "3-seed means, cbl-subscene vs no-cbl: B-IoU " + fmt("%+.4f", biou_gain) +
             ", mIoU@boundary " + fmt("%+.4f", b_gain) + ", mIoU@inner " + fmt("%+.4f", inner_gain),
         true);

  const bool c6 = base.miou <= input.miou && input.miou <= sub.miou;
  report(6, c6,
         "3-seed mean mIoU: no-cbl " + fmt("%.4f", base.miou) + " <= cbl-input " +
             fmt("%.4f", input.miou) + " <= cbl-subscene " + fmt("%.4f", sub.miou),
         true);

  // criterion 7 is independent of training; printed in order below
  {
    auto c = read_cloud_file(CBLSEG_FIXTURES "/soft_hard9.txt");
    auto h = build_hierarchy(c, 1.0, 0.6, 3);
    auto d = soft_vs_hard_divergence(h);
    int total = 0;
    std::string per;
    for (const auto& s : d) {
      total += s.disagreements;
      per += " stage " + std::to_string(s.stage) + ": " + std::to_string(s.disagreements);
    }
    report(7, total >= 1, "soft-vs-hard disagreements on the fixture:" + per);
  }

  auto t1 = Clock::now();
  bool same = true;
  for (int vi = 0; vi < 3; ++vi) {
    for (std::size_t si = 0; si < 3; ++si) {
      auto again = run(data, kVariants[vi], seeds[si]);
      const auto& first = runs[static_cast<std::size_t>(vi)][si];
      same &= again.log_csv == first.log_csv && again.checkpoint == first.checkpoint;
    }
  }
  report(8, same,
         std::string("9 repeated runs, logs and checkpoints ") + (same ? "bit-identical" : "DIFFER") +
             fmt(" (%.0f s)", seconds_since(t1)));
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criteria5to8();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  return hard_failures == 0 ? 0 : 1;
}
