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

#include "cblseg/hierarchy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace cblseg {

const Stage& SamplingHierarchy::stage(std::size_t n) const {
  if (n >= stages.size()) throw InputError("stage " + std::to_string(n) + " out of range");
  return stages[n];
}

Stage grid_subsample(const std::vector<Vec3>& positions, const Matrix& label_dists,
                     double cell_size, std::span<const double> weights) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size))
    throw InputError("cell_size must be positive");
  if (static_cast<std::size_t>(label_dists.rows()) != positions.size())
    throw InputError("label distribution rows do not match point count");
  if (!weights.empty() && weights.size() != positions.size())
    throw InputError("weights do not match point count");

  using Key = std::array<std::int64_t, 3>;
  std::vector<std::pair<Key, int>> keyed(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Vec3& p = positions[i];
    if (!p.allFinite()) throw InputError("non-finite coordinate");
    keyed[i] = {Key{static_cast<std::int64_t>(std::floor(p.x() / cell_size)),
                    static_cast<std::int64_t>(std::floor(p.y() / cell_size)),
                    static_cast<std::int64_t>(std::floor(p.z() / cell_size))},
                static_cast<int>(i)};
  }
  std::sort(keyed.begin(), keyed.end());

  Stage out;
  out.owner.assign(positions.size(), -1);
  for (std::size_t k = 0; k < keyed.size();) {
    std::size_t e = k;
    std::vector<int> group;
    while (e < keyed.size() && keyed[e].first == keyed[k].first) group.push_back(keyed[e++].second);
    int id = static_cast<int>(out.pooling_map.size());
    for (int j : group) out.owner[j] = id;
    out.pooling_map.push_back(std::move(group));
    k = e;
  }

  out.positions.resize(out.pooling_map.size());
  out.weights.resize(out.pooling_map.size());
  out.label_dists = Matrix::Zero(static_cast<Eigen::Index>(out.pooling_map.size()), label_dists.cols());
  for (std::size_t g = 0; g < out.pooling_map.size(); ++g) {
    const auto& group = out.pooling_map[g];
    Vec3 sum = Vec3::Zero();
    double mass = 0.0;
    auto row = out.label_dists.row(static_cast<Eigen::Index>(g));
    for (int j : group) {
      const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j)];
      sum += positions[j];
      row += w * label_dists.row(j);
      mass += w;
    }
    out.positions[g] = sum / static_cast<double>(group.size());
    row /= mass;
    out.weights[g] = mass;
  }
  return out;
}

SamplingHierarchy build_hierarchy(const PointCloud& cloud, double base_cell, double base_radius,
                                  int num_stages) {
  if (num_stages < 1) throw InputError("num_stages must be >= 1");
  if (!(base_cell > 0.0)) throw InputError("base_cell must be positive");
  if (!(base_radius > 0.0)) throw InputError("base_radius must be positive");
  cloud.validate();
  if (cloud.size() == 0) throw InputError("cloud has no points");

  SamplingHierarchy h;
  h.num_classes = cloud.num_classes;
  Stage s0;
  s0.positions = cloud.positions;
  s0.label_dists = one_hot(cloud.gt_labels, cloud.num_classes);
  s0.weights.assign(cloud.size(), 1.0);
  s0.radius = base_radius;
  h.stages.push_back(std::move(s0));
  for (int n = 1; n < num_stages; ++n) {
    const Stage& prev = h.stages.back();
    Stage next = grid_subsample(prev.positions, prev.label_dists, std::ldexp(base_cell, n - 1),
                                prev.weights);
    next.radius = std::ldexp(base_radius, n);
    h.stages.push_back(std::move(next));
  }
  return h;
}

}  // namespace cblseg
