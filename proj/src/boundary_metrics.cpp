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

#include "cblseg/boundary_metrics.hpp"

#include <algorithm>
#include <iterator>

namespace cblseg {

namespace {

void check_label_count(std::size_t labels, std::size_t points) {
  if (labels != points)
    throw InputError("label count " + std::to_string(labels) + " does not match point count " +
                     std::to_string(points));
}

}  // namespace

BoundarySet extract_boundary(std::span<const Label> labels, const NeighborhoodIndex& index,
                             double radius, int stage, BoundarySource source) {
  check_label_count(labels.size(), index.size());
  if (!(radius > 0.0)) throw InputError("radius must be positive");
  BoundarySet out{stage, source, labels.size(), {}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int j : index.radius_query(static_cast<int>(i), radius)) {
      if (labels[j] != labels[i]) {
        out.indices.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

BoundarySet extract_boundary(std::span<const Label> labels, const Neighborhoods& neighborhoods,
                             int stage, BoundarySource source) {
  check_label_count(labels.size(), neighborhoods.num_points());
  BoundarySet out{stage, source, labels.size(), {}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int j : neighborhoods.of(i)) {
      if (labels[j] != labels[i]) {
        out.indices.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

void IouCounts::add(Label gt, Label pred) {
  if (gt == pred) {
    ++intersection[gt];
    ++union_[gt];
  } else {
    ++union_[gt];
    ++union_[pred];
  }
}

IouCounts& IouCounts::operator+=(const IouCounts& other) {
  if (other.union_.size() != union_.size()) throw InputError("class count mismatch");
  for (std::size_t k = 0; k < union_.size(); ++k) {
    intersection[k] += other.intersection[k];
    union_[k] += other.union_[k];
  }
  return *this;
}

std::vector<std::optional<double>> IouCounts::per_class() const {
  std::vector<std::optional<double>> out(union_.size());
  for (std::size_t k = 0; k < union_.size(); ++k) {
    if (union_[k] > 0)
      out[k] = static_cast<double>(intersection[k]) / static_cast<double>(union_[k]);
  }
  return out;
}

std::optional<double> IouCounts::mean() const {
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : per_class()) {
    if (v) {
      sum += *v;
      ++defined;
    }
  }
  if (defined == 0) return std::nullopt;
  return sum / defined;
}

MiouResult miou_on(std::span<const int> subset, std::span<const Label> gt,
                   std::span<const Label> pred, int num_classes) {
  if (gt.size() != pred.size()) throw InputError("gt and pred lengths differ");
  if (num_classes <= 0) throw InputError("num_classes must be positive");
  IouCounts counts(num_classes);
  for (int i : subset) {
    if (i < 0 || static_cast<std::size_t>(i) >= gt.size()) throw InputError("subset index out of range");
    if (gt[i] < 0 || gt[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
      throw InputError("label outside [0, num_classes)");
    counts.add(gt[i], pred[i]);
  }
  return {counts.per_class(), counts.mean()};
}

namespace {

std::int64_t intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  std::int64_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

}  // namespace

double boundary_iou(const BoundarySet& gt, const BoundarySet& pred) {
  if (gt.stage != pred.stage || gt.num_points != pred.num_points)
    throw InputError("boundary sets belong to different stages");
  if (gt.empty() && pred.empty()) return 1.0;
  auto inter = intersection_size(gt.indices, pred.indices);
  auto uni = static_cast<std::int64_t>(gt.size() + pred.size()) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

SegmentationCounts::SegmentationCounts(int num_classes)
    : overall(num_classes),
      boundary(num_classes),
      inner(num_classes),
      class_total(static_cast<std::size_t>(num_classes), 0),
      class_correct(static_cast<std::size_t>(num_classes), 0) {}

SegmentationCounts& SegmentationCounts::operator+=(const SegmentationCounts& o) {
  overall += o.overall;
  boundary += o.boundary;
  inner += o.inner;
  for (std::size_t k = 0; k < class_total.size(); ++k) {
    class_total[k] += o.class_total[k];
    class_correct[k] += o.class_correct[k];
  }
  correct += o.correct;
  total += o.total;
  boundary_intersection += o.boundary_intersection;
  boundary_union += o.boundary_union;
  boundary_count += o.boundary_count;
  inner_count += o.inner_count;
  return *this;
}

SegmentationCounts segmentation_counts(const PointCloud& cloud, double radius) {
  cloud.validate();
  if (!cloud.pred_labels) throw InputError("cloud has no predicted labels");
  const auto& gt = cloud.gt_labels;
  const auto& pred = *cloud.pred_labels;
  const int k = cloud.num_classes;

  NeighborhoodIndex index(cloud.positions);
  Neighborhoods nb = radius_neighborhoods(index, radius);
  BoundarySet b_gt = extract_boundary(gt, nb, 0, BoundarySource::kGroundTruth);
  BoundarySet b_pred = extract_boundary(pred, nb, 0, BoundarySource::kPrediction);

  SegmentationCounts c(k);
  std::vector<char> on_boundary(cloud.size(), 0);
  for (int i : b_gt.indices) on_boundary[i] = 1;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    c.overall.add(gt[i], pred[i]);
    (on_boundary[i] ? c.boundary : c.inner).add(gt[i], pred[i]);
    ++c.class_total[gt[i]];
    if (gt[i] == pred[i]) {
      ++c.class_correct[gt[i]];
      ++c.correct;
    }
  }
  c.total = static_cast<std::int64_t>(cloud.size());
  c.boundary_count = static_cast<std::int64_t>(b_gt.size());
  c.inner_count = c.total - c.boundary_count;
  c.boundary_intersection = intersection_size(b_gt.indices, b_pred.indices);
  c.boundary_union =
      static_cast<std::int64_t>(b_gt.size() + b_pred.size()) - c.boundary_intersection;
  return c;
}

MetricsReport report_from_counts(const SegmentationCounts& c, double radius) {
  MetricsReport r;
  r.radius = radius;
  r.per_class_iou = c.overall.per_class();
  r.miou_overall = c.overall.mean();
  r.miou_boundary = c.boundary.mean();
  r.miou_inner = c.inner.mean();
  r.b_iou = c.boundary_union == 0
                ? 1.0
                : static_cast<double>(c.boundary_intersection) / static_cast<double>(c.boundary_union);
  r.overall_accuracy = c.total == 0 ? 0.0 : static_cast<double>(c.correct) / static_cast<double>(c.total);
  double acc_sum = 0.0;
  int present = 0;
  for (std::size_t k = 0; k < c.class_total.size(); ++k) {
    if (c.class_total[k] == 0) continue;
    acc_sum += static_cast<double>(c.class_correct[k]) / static_cast<double>(c.class_total[k]);
    ++present;
  }
  if (present > 0) r.mean_class_accuracy = acc_sum / present;
  r.boundary_count = c.boundary_count;
  r.inner_count = c.inner_count;
  return r;
}

MetricsReport full_report(const PointCloud& cloud, double radius) {
  return report_from_counts(segmentation_counts(cloud, radius), radius);
}

nlohmann::json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& v : r.per_class_iou) per_class.push_back(opt(v));
  return {{"miou_overall", opt(r.miou_overall)},
          {"miou_boundary", opt(r.miou_boundary)},
          {"miou_inner", opt(r.miou_inner)},
          {"b_iou", r.b_iou},
          {"oa", r.overall_accuracy},
          {"macc", opt(r.mean_class_accuracy)},
          {"per_class_iou", per_class},
          {"boundary_count", r.boundary_count},
          {"inner_count", r.inner_count},
          {"radius", r.radius}};
}

}  // namespace cblseg
