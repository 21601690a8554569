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

#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cblseg/boundary_metrics.hpp"
#include "cblseg/cbl_loss.hpp"
#include "cblseg/seg_net.hpp"
#include "cblseg/subscene_mining.hpp"

namespace cblseg {

/// Optimizer schedule and loss weighting. Defaults compress a 600-epoch SGD
/// schedule (lr 0.01, momentum 0.98, weight decay 1e-3, lr *= 0.1^(1/200) per
/// epoch) ten-fold.
struct TrainConfig {
  int epochs = 60;
  double learning_rate = 0.01;
  double momentum = 0.98;
  double weight_decay = 1e-3;
  double lr_decay = std::pow(0.1, 1.0 / 20.0);
  CblConfig cbl;
  MiningConfig mining;
  double boundary_radius = kDefaultBoundaryRadius;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double ce = 0.0;         // mean over scenes
  double cbl_total = 0.0;  // mean over scenes of sum_n L_cbl^n
  double total = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int steps = 0;
};

/// Loss and parameter gradients of one scene (exposed for gradient checks).
struct StepLoss {
  double ce = 0.0;
  double cbl_total = 0.0;
  double total = 0.0;
  std::vector<Matrix> grads;
};

StepLoss scene_loss(const SegNet& net, const PreparedScene& scene, const CblConfig& cbl);

/// SGD with momentum and weight decay, one update per scene, scenes visited
/// in a seeded order. Throws RuntimeFailure when the loss stops being finite.
TrainResult train(SegNet& net, const std::vector<PointCloud>& scenes, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct EvalResult {
  SegmentationCounts counts;
  MetricsReport aggregate;
  std::vector<MetricsReport> per_scene;
};

/// Counts are pooled across scenes before any ratio is taken.
EvalResult evaluate(const SegNet& net, const std::vector<PointCloud>& scenes,
                    double radius = kDefaultBoundaryRadius);

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

}  // namespace cblseg
