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

#include <Eigen/Geometry>
#include <vector>

#include "cblseg/common.hpp"

namespace cblseg {

/// Exact radius search over a fixed point set (static kd-tree).
///
/// Queries return indices sorted ascending and never include the query point
/// itself. The index owns a copy of the points and is immutable after
/// construction, so concurrent queries are safe.
class NeighborhoodIndex {
 public:
  explicit NeighborhoodIndex(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  /// Indices j != i with ||x_j - x_i|| <= radius.
  std::vector<int> radius_query(int i, double radius) const;

  /// Indices j with ||x_j - p|| <= radius (no exclusion).
  std::vector<int> radius_query_point(const Vec3& p, double radius) const;

  /// Index of the point closest to p; ties go to the lowest index.
  int nearest(const Vec3& p) const;

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    Eigen::AlignedBox3d box;
  };

  int build(int begin, int end);
  void collect(const Vec3& p, double r2, int exclude, std::vector<int>& out) const;
  void nearest_rec(int node, const Vec3& p, int& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Builds the index; throws InputError on empty input or non-finite coordinates.
NeighborhoodIndex build_index(std::span<const Vec3> points);

/// Compressed per-point neighbor lists (self excluded), e.g. all radius
/// neighborhoods of one stage.
struct Neighborhoods {
  std::vector<int> offsets;  // size = num_points + 1
  std::vector<int> indices;

  std::size_t num_points() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const int> of(std::size_t i) const {
    return {indices.data() + offsets[i], static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }
};

Neighborhoods radius_neighborhoods(const NeighborhoodIndex& index, double radius);

}  // namespace cblseg
