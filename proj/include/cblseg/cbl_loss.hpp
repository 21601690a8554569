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

#include "cblseg/boundary_metrics.hpp"
#include "cblseg/common.hpp"
#include "cblseg/neighborhood_index.hpp"

namespace cblseg {

struct CblConfig {
  double temperature = 1.0;
  double lambda = 0.1;

  void validate() const;
};

/// Contrastive boundary loss on one stage.
///
/// For every boundary point i with at least one same-label neighbor (the
/// active set), the term is
///   -log( sum_{j in N_i, l_j = l_i} exp(-d_ij / tau) / sum_{k in N_i} exp(-d_ik / tau) )
/// with d the Euclidean distance between feature rows. The loss is the mean
/// of the active terms, or 0 when no boundary point is active.
struct CblResult {
  double loss = 0.0;
  std::vector<int> active;       // boundary points that contributed
  std::vector<double> per_point;  // term of each active point, same order
};

CblResult cbl_forward(const Matrix& features, const BoundarySet& boundary,
                      std::span<const Label> labels, const Neighborhoods& neighborhoods,
                      const CblConfig& config);

CblResult cbl_forward(const Matrix& features, const BoundarySet& boundary,
                      std::span<const Label> labels, const NeighborhoodIndex& index,
                      double radius, const CblConfig& config);

/// dL/dfeatures, same shape as `features`.
Matrix cbl_backward(const Matrix& features, const BoundarySet& boundary,
                    std::span<const Label> labels, const Neighborhoods& neighborhoods,
                    const CblConfig& config);

Matrix cbl_backward(const Matrix& features, const BoundarySet& boundary,
                    std::span<const Label> labels, const NeighborhoodIndex& index, double radius,
                    const CblConfig& config);

/// Forward and backward in one pass.
struct LossAndGrad {
  double value = 0.0;
  Matrix grad;
};

LossAndGrad cbl_loss_and_grad(const Matrix& features, const BoundarySet& boundary,
                              std::span<const Label> labels, const Neighborhoods& neighborhoods,
                              const CblConfig& config);

/// L = L_ce + lambda * sum_n L_cbl^n with matching gradient scaling. The
/// gradient of each term keeps its own tensor (logits for CE, stage features
/// for CBL), so the combined gradients are returned per term.
struct TotalLoss {
  double value = 0.0;
  double ce = 0.0;
  double cbl_sum = 0.0;
  Matrix ce_grad;
  std::vector<Matrix> cbl_grads;  // already scaled by lambda
};

TotalLoss total_loss(LossAndGrad ce, std::vector<LossAndGrad> per_stage_cbl,
                     const CblConfig& config);

/// Mean softmax cross-entropy over rows and its gradient w.r.t. the logits.
LossAndGrad cross_entropy(const Matrix& logits, std::span<const Label> labels);

}  // namespace cblseg
