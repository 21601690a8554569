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

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cblseg/common.hpp"
#include "cblseg/neighborhood_index.hpp"
#include "cblseg/point_cloud.hpp"

namespace cblseg {

enum class BoundarySource { kGroundTruth, kPrediction };

/// Sorted, unique boundary point indices for one stage.
struct BoundarySet {
  int stage = 0;
  BoundarySource source = BoundarySource::kGroundTruth;
  std::size_t num_points = 0;
  std::vector<int> indices;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

inline constexpr double kDefaultBoundaryRadius = 0.1;

/// Point i is a boundary point iff a neighbor within `radius` carries a
/// different label.
BoundarySet extract_boundary(std::span<const Label> labels, const NeighborhoodIndex& index,
                             double radius, int stage = 0,
                             BoundarySource source = BoundarySource::kGroundTruth);

/// Same test over precomputed neighbor lists.
BoundarySet extract_boundary(std::span<const Label> labels, const Neighborhoods& neighborhoods,
                             int stage = 0, BoundarySource source = BoundarySource::kGroundTruth);

/// Per-class intersection and union counts over some subset of points.
struct IouCounts {
  std::vector<std::int64_t> intersection;
  std::vector<std::int64_t> union_;

  explicit IouCounts(int num_classes = 0)
      : intersection(static_cast<std::size_t>(num_classes), 0),
        union_(static_cast<std::size_t>(num_classes), 0) {}

  void add(Label gt, Label pred);
  IouCounts& operator+=(const IouCounts& other);

  /// nullopt for classes absent from both gt and pred.
  std::vector<std::optional<double>> per_class() const;
  /// Mean over defined classes; nullopt when none is defined.
  std::optional<double> mean() const;
};

struct MiouResult {
  std::vector<std::optional<double>> per_class;
  std::optional<double> mean;
};

MiouResult miou_on(std::span<const int> subset, std::span<const Label> gt,
                   std::span<const Label> pred, int num_classes);

/// |a ∩ b| / |a ∪ b|; 1 when both are empty.
double boundary_iou(const BoundarySet& gt, const BoundarySet& pred);

/// Poolable raw counts behind a MetricsReport. Summing the counts of several
/// scenes and then dividing gives the dataset-level report.
struct SegmentationCounts {
  IouCounts overall;
  IouCounts boundary;
  IouCounts inner;
  std::vector<std::int64_t> class_total;    // gt points per class
  std::vector<std::int64_t> class_correct;  // correctly predicted gt points per class
  std::int64_t correct = 0;
  std::int64_t total = 0;
  std::int64_t boundary_intersection = 0;
  std::int64_t boundary_union = 0;
  std::int64_t boundary_count = 0;
  std::int64_t inner_count = 0;

  explicit SegmentationCounts(int num_classes = 0);
  int num_classes() const { return static_cast<int>(class_total.size()); }
  SegmentationCounts& operator+=(const SegmentationCounts& other);
};

struct MetricsReport {
  std::vector<std::optional<double>> per_class_iou;
  std::optional<double> miou_overall;
  std::optional<double> miou_boundary;
  std::optional<double> miou_inner;
  double b_iou = 1.0;
  double overall_accuracy = 0.0;
  std::optional<double> mean_class_accuracy;
  std::int64_t boundary_count = 0;
  std::int64_t inner_count = 0;
  double radius = kDefaultBoundaryRadius;
};

SegmentationCounts segmentation_counts(const PointCloud& cloud, double radius);
MetricsReport report_from_counts(const SegmentationCounts& counts, double radius);

/// Boundary-aware metric suite for a cloud carrying predictions.
MetricsReport full_report(const PointCloud& cloud, double radius = kDefaultBoundaryRadius);

nlohmann::json to_json(const MetricsReport& report);

}  // namespace cblseg
