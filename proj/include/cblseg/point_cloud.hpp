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
#include <string>
#include <vector>

#include "cblseg/common.hpp"

namespace cblseg {

/// One labeled scene. Positions are in meters.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Label> gt_labels;
  std::optional<std::vector<Label>> pred_labels;
  int num_classes = 0;

  std::size_t size() const { return positions.size(); }
  bool has_predictions() const { return pred_labels.has_value(); }

  /// Throws InputError when lengths, label ranges or coordinates are invalid.
  void validate() const;
};

/// Reads the whitespace-separated text format: `x y z gt [pred]` per line.
/// A `# classes K` header fixes K; otherwise K = max label + 1. Errors carry
/// the offending line number.
PointCloud read_cloud(std::istream& in);
PointCloud read_cloud_file(const std::string& path);

void write_cloud(std::ostream& out, const PointCloud& cloud);
void write_cloud_file(const std::string& path, const PointCloud& cloud);

/// One-hot encoding, rows = points.
Matrix one_hot(std::span<const Label> labels, int num_classes);

}  // namespace cblseg
