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

#include <string>
#include <string_view>
#include <vector>

#include "cblseg/boundary_metrics.hpp"
#include "cblseg/hierarchy.hpp"

namespace cblseg {

enum class MiningVariant { kArgmax, kKlThreshold, kNearest };

MiningVariant parse_mining_variant(std::string_view name);
std::string to_string(MiningVariant v);

struct MiningConfig {
  MiningVariant variant = MiningVariant::kArgmax;
  double kl_threshold = 0.5;
  double kl_epsilon = 1e-6;

  void validate() const;
};

/// Argmax of each label distribution at `stage`; ties go to the lowest class.
std::vector<Label> stage_labels_argmax(const SamplingHierarchy& hierarchy, std::size_t stage);

/// Symmetrized KL divergence between two epsilon-smoothed distributions.
double symmetric_kl(std::span<const double> p, std::span<const double> q, double epsilon);

/// Ground-truth boundary points of one stage, using the stage radius.
BoundarySet mine_stage_boundaries(const SamplingHierarchy& hierarchy, std::size_t stage,
                                  const MiningConfig& config);

/// Precomputed-neighborhood form used by the trainer.
BoundarySet mine_stage_boundaries(const SamplingHierarchy& hierarchy, std::size_t stage,
                                  const MiningConfig& config, const Neighborhoods& neighborhoods);

struct StageDisagreement {
  int stage = 0;
  int disagreements = 0;
};

/// Per stage n >= 1: number of points whose soft-label argmax differs from
/// the label obtained by majority-voting hard labels stage by stage.
std::vector<StageDisagreement> soft_vs_hard_divergence(const SamplingHierarchy& hierarchy);

}  // namespace cblseg
