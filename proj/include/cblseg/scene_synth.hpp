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

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cblseg/point_cloud.hpp"

namespace cblseg {

enum class SceneLayout { kPlanarRooms, kCheckerboard, kBlobs };

SceneLayout parse_layout(std::string_view name);
std::string to_string(SceneLayout layout);

struct SynthConfig {
  std::uint64_t seed = 0;
  int num_points = 2000;
  int num_classes = 4;
  SceneLayout layout = SceneLayout::kPlanarRooms;
  double jitter = 0.0;  // meters
  double extent = 2.0;  // meters

  void validate() const;
};

/// Labeled scene with ground truth only.
///
/// planar-rooms: a floor (class 0) split by walls (class 1) into rooms that
///   hold box furniture; classes 2.. are furniture kinds of distinct height.
/// checkerboard: a flat square tiled with cells labeled (ix + iy) mod K.
/// blobs: K Gaussian clusters, each point labeled by its cluster.
/// Jitter displaces points after labeling.
PointCloud generate(const SynthConfig& config);

/// Train and test scenes from disjoint seeds derived from config.seed.
std::pair<std::vector<PointCloud>, std::vector<PointCloud>> generate_split(
    const SynthConfig& config, int n_train, int n_test);

}  // namespace cblseg
