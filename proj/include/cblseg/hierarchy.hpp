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

#include <span>
#include <vector>

#include "cblseg/common.hpp"
#include "cblseg/point_cloud.hpp"

namespace cblseg {

/// One sub-sampling stage.
///
/// For stage n > 0, `pooling_map[i]` lists the stage-(n-1) points averaged
/// into point i and `owner[j]` is the stage-n point that absorbed
/// stage-(n-1) point j. Both are empty at stage 0.
struct Stage {
  std::vector<Vec3> positions;
  std::vector<std::vector<int>> pooling_map;
  std::vector<int> owner;
  Matrix label_dists;  // rows sum to 1
  std::vector<double> weights;  // input points represented by each point
  double radius = 0.0;

  std::size_t size() const { return positions.size(); }
};

struct SamplingHierarchy {
  std::vector<Stage> stages;
  int num_classes = 0;

  std::size_t num_stages() const { return stages.size(); }
  const Stage& stage(std::size_t n) const;
};

/// Grid sub-sampling with cells [k*s, (k+1)*s) anchored at the origin.
/// Output points are group centroids. Label distributions are group means
/// weighted by `weights` (all ones when empty), so a distribution always
/// equals the class histogram of the input points pooled into it.
/// Groups are ordered by cell coordinate (x, then y, then z).
Stage grid_subsample(const std::vector<Vec3>& positions, const Matrix& label_dists,
                     double cell_size, std::span<const double> weights = {});

/// Stage n uses cell base_cell * 2^(n-1) and radius base_radius * 2^n.
SamplingHierarchy build_hierarchy(const PointCloud& cloud, double base_cell,
                                  double base_radius, int num_stages);

}  // namespace cblseg
