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

#include "cblseg/neighborhood_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace cblseg {

namespace {
constexpr int kLeafSize = 12;
}

NeighborhoodIndex::NeighborhoodIndex(std::span<const Vec3> points)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) throw InputError("cannot index an empty point set");
  for (const auto& p : points_) {
    if (!p.allFinite()) throw InputError("non-finite coordinate in index input");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<int>(points_.size()));
}

int NeighborhoodIndex::build(int begin, int end) {
  int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  for (int k = begin; k < end; ++k) box.extend(points_[order_[k]]);
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  nodes_[id].box = box;
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  box.sizes().maxCoeff(&axis);
  int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  int left = build(begin, mid);
  int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void NeighborhoodIndex::collect(const Vec3& p, double r2, int exclude,
                                std::vector<int>& out) const {
  // Iterative traversal; prune on squared distance to each node's box.
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(p) > r2) continue;
    if (node.axis < 0) {
      for (int k = node.begin; k < node.end; ++k) {
        int j = order_[k];
        if (j != exclude && (points_[j] - p).squaredNorm() <= r2) out.push_back(j);
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
  std::sort(out.begin(), out.end());
}

std::vector<int> NeighborhoodIndex::radius_query(int i, double radius) const {
  if (i < 0 || static_cast<std::size_t>(i) >= points_.size())
    throw InputError("radius_query index out of range");
  std::vector<int> out;
  collect(points_[i], radius * radius, i, out);
  return out;
}

std::vector<int> NeighborhoodIndex::radius_query_point(const Vec3& p, double radius) const {
  std::vector<int> out;
  collect(p, radius * radius, -1, out);
  return out;
}

void NeighborhoodIndex::nearest_rec(int id, const Vec3& p, int& best, double& best_d2) const {
  const Node& node = nodes_[id];
  if (node.box.squaredExteriorDistance(p) > best_d2) return;
  if (node.axis < 0) {
    for (int k = node.begin; k < node.end; ++k) {
      int j = order_[k];
      double d2 = (points_[j] - p).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && j < best)) {
        best_d2 = d2;
        best = j;
      }
    }
    return;
  }
  bool left_first = p[node.axis] < node.split;
  nearest_rec(left_first ? node.left : node.right, p, best, best_d2);
  nearest_rec(left_first ? node.right : node.left, p, best, best_d2);
}

int NeighborhoodIndex::nearest(const Vec3& p) const {
  int best = std::numeric_limits<int>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  nearest_rec(0, p, best, best_d2);
  return best;
}

NeighborhoodIndex build_index(std::span<const Vec3> points) { return NeighborhoodIndex(points); }

Neighborhoods radius_neighborhoods(const NeighborhoodIndex& index, double radius) {
  if (!(radius > 0.0)) throw InputError("radius must be positive");
  Neighborhoods nb;
  nb.offsets.reserve(index.size() + 1);
  nb.offsets.push_back(0);
  std::vector<int> buf;
  for (std::size_t i = 0; i < index.size(); ++i) {
    buf = index.radius_query(static_cast<int>(i), radius);
    nb.indices.insert(nb.indices.end(), buf.begin(), buf.end());
    nb.offsets.push_back(static_cast<int>(nb.indices.size()));
  }
  return nb;
}

}  // namespace cblseg
