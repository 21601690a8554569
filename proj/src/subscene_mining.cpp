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

#include "cblseg/subscene_mining.hpp"

#include <cmath>

namespace cblseg {

MiningVariant parse_mining_variant(std::string_view name) {
  if (name == "argmax") return MiningVariant::kArgmax;
  if (name == "kl" || name == "kl_threshold" || name == "kl-threshold")
    return MiningVariant::kKlThreshold;
  if (name == "nearest") return MiningVariant::kNearest;
  throw InputError("unknown mining variant '" + std::string(name) + "'");
}

std::string to_string(MiningVariant v) {
  switch (v) {
    case MiningVariant::kArgmax:
      return "argmax";
    case MiningVariant::kKlThreshold:
      return "kl";
    case MiningVariant::kNearest:
      return "nearest";
  }
  throw InputError("unknown mining variant");
}

void MiningConfig::validate() const {
  if (!(kl_threshold >= 0.0)) throw InputError("kl_threshold must be >= 0");
  if (!(kl_epsilon > 0.0 && kl_epsilon <= 1e-3)) throw InputError("kl_epsilon must be in (0, 1e-3]");
}

namespace {

Label argmax_row(const Matrix& m, Eigen::Index row) {
  Label best = 0;
  for (Eigen::Index k = 1; k < m.cols(); ++k) {
    if (m(row, k) > m(row, best)) best = static_cast<Label>(k);
  }
  return best;
}

Label majority(const std::vector<Label>& votes, int num_classes) {
  std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
  for (Label v : votes) ++count[v];
  Label best = 0;
  for (int k = 1; k < num_classes; ++k) {
    if (count[k] > count[best]) best = k;
  }
  return best;
}

}  // namespace

std::vector<Label> stage_labels_argmax(const SamplingHierarchy& hierarchy, std::size_t stage) {
  const Stage& s = hierarchy.stage(stage);
  std::vector<Label> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = argmax_row(s.label_dists, static_cast<Eigen::Index>(i));
  return out;
}

double symmetric_kl(std::span<const double> p, std::span<const double> q, double epsilon) {
  if (p.size() != q.size()) throw InputError("distribution sizes differ");
  const double norm = 1.0 + epsilon * static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double a = (p[k] + epsilon) / norm;
    double b = (q[k] + epsilon) / norm;
    d += (a - b) * (std::log(a) - std::log(b));
  }
  return d;
}

BoundarySet mine_stage_boundaries(const SamplingHierarchy& hierarchy, std::size_t stage,
                                  const MiningConfig& config, const Neighborhoods& nb) {
  config.validate();
  const Stage& s = hierarchy.stage(stage);
  if (nb.num_points() != s.size()) throw InputError("neighborhoods do not match stage size");
  const int n = static_cast<int>(stage);

  switch (config.variant) {
    case MiningVariant::kArgmax:
      return extract_boundary(stage_labels_argmax(hierarchy, stage), nb, n);
    case MiningVariant::kNearest: {
      const Stage& input = hierarchy.stage(0);
      std::vector<Label> input_labels = stage_labels_argmax(hierarchy, 0);
      std::vector<Label> labels(s.size());
      if (stage == 0) {
        labels = input_labels;
      } else {
        NeighborhoodIndex input_index(input.positions);
        for (std::size_t i = 0; i < s.size(); ++i) labels[i] = input_labels[input_index.nearest(s.positions[i])];
      }
      return extract_boundary(labels, nb, n);
    }
    case MiningVariant::kKlThreshold: {
      BoundarySet out{n, BoundarySource::kGroundTruth, s.size(), {}};
      const auto k = static_cast<std::size_t>(s.label_dists.cols());
      auto row = [&](std::size_t i) {
        return std::span<const double>(s.label_dists.data() + i * k, k);
      };
      for (std::size_t i = 0; i < s.size(); ++i) {
        for (int j : nb.of(i)) {
          if (symmetric_kl(row(i), row(static_cast<std::size_t>(j)), config.kl_epsilon) >
              config.kl_threshold) {
            out.indices.push_back(static_cast<int>(i));
            break;
          }
        }
      }
      return out;
    }
  }
  throw InputError("unknown mining variant");
}

BoundarySet mine_stage_boundaries(const SamplingHierarchy& hierarchy, std::size_t stage,
                                  const MiningConfig& config) {
  const Stage& s = hierarchy.stage(stage);
  NeighborhoodIndex index(s.positions);
  return mine_stage_boundaries(hierarchy, stage, config, radius_neighborhoods(index, s.radius));
}

std::vector<StageDisagreement> soft_vs_hard_divergence(const SamplingHierarchy& hierarchy) {
  std::vector<StageDisagreement> report;
  if (hierarchy.num_stages() < 2) return report;
  std::vector<Label> hard = stage_labels_argmax(hierarchy, 0);
  for (std::size_t n = 1; n < hierarchy.num_stages(); ++n) {
    const Stage& s = hierarchy.stage(n);
    std::vector<Label> next(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<Label> votes;
      for (int j : s.pooling_map[i]) votes.push_back(hard[j]);
      next[i] = majority(votes, hierarchy.num_classes);
    }
    std::vector<Label> soft = stage_labels_argmax(hierarchy, n);
    int diff = 0;
    for (std::size_t i = 0; i < s.size(); ++i) diff += soft[i] != next[i] ? 1 : 0;
    report.push_back({static_cast<int>(n), diff});
    hard = std::move(next);
  }
  return report;
}

}  // namespace cblseg
