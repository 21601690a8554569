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

#include "cblseg/cbl_loss.hpp"

#include <cmath>
#include <limits>

namespace cblseg {

void CblConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InputError("temperature must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be >= 0");
}

namespace {

void check_inputs(const Matrix& features, const BoundarySet& boundary,
                  std::span<const Label> labels, const Neighborhoods& nb) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n || nb.num_points() != n)
    throw InputError("features, labels and neighborhoods disagree on point count");
  if (boundary.num_points != n) throw InputError("boundary set belongs to a different stage");
  if (!features.allFinite()) throw InputError("non-finite feature");
}

// Walks the active boundary points. When `grad` is non-null the gradient of
// the mean loss is accumulated into it; terms are visited in index order so
// sums are reproducible bit for bit.
CblResult run(const Matrix& f, const BoundarySet& boundary, std::span<const Label> labels,
              const Neighborhoods& nb, const CblConfig& config, Matrix* grad) {
  config.validate();
  check_inputs(f, boundary, labels, nb);
  const double inv_tau = 1.0 / config.temperature;

  CblResult res;
  for (int i : boundary.indices) {
    auto nbrs = nb.of(static_cast<std::size_t>(i));
    bool has_pos = false;
    for (int j : nbrs) has_pos = has_pos || labels[j] == labels[i];
    if (!has_pos) continue;
    res.active.push_back(i);
  }
  if (res.active.empty()) {
    if (grad) *grad = Matrix::Zero(f.rows(), f.cols());
    return res;
  }

  const double scale = 1.0 / static_cast<double>(res.active.size());
  if (grad) *grad = Matrix::Zero(f.rows(), f.cols());
  std::vector<double> logits;
  std::vector<double> dist;
  double total = 0.0;
  for (int i : res.active) {
    auto nbrs = nb.of(static_cast<std::size_t>(i));
    logits.resize(nbrs.size());
    dist.resize(nbrs.size());
    double max_all = -std::numeric_limits<double>::infinity();
    double max_pos = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      dist[k] = (f.row(i) - f.row(nbrs[k])).norm();
      logits[k] = -dist[k] * inv_tau;
      max_all = std::max(max_all, logits[k]);
      if (labels[nbrs[k]] == labels[i]) max_pos = std::max(max_pos, logits[k]);
    }
    double sum_all = 0.0;
    double sum_pos = 0.0;
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      sum_all += std::exp(logits[k] - max_all);
      if (labels[nbrs[k]] == labels[i]) sum_pos += std::exp(logits[k] - max_pos);
    }
    const double lse_all = max_all + std::log(sum_all);
    const double lse_pos = max_pos + std::log(sum_pos);
    const double term = lse_all - lse_pos;
    res.per_point.push_back(term);
    total += term;

    if (!grad) continue;
    // d term / d logit_k = softmax_all(k) - [pos] softmax_pos(k);
    // d logit_k / d f_i = -(f_i - f_k) / (tau d_ik) = -d logit_k / d f_k.
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      if (dist[k] == 0.0) continue;
      const int j = nbrs[k];
      double w = std::exp(logits[k] - lse_all);
      if (labels[j] == labels[i]) w -= std::exp(logits[k] - lse_pos);
      const double c = scale * w * -inv_tau / dist[k];
      auto diff = (f.row(i) - f.row(j)).eval();
      grad->row(i) += c * diff;
      grad->row(j) -= c * diff;
    }
  }
  res.loss = total * scale;
  return res;
}

}  // namespace

CblResult cbl_forward(const Matrix& features, const BoundarySet& boundary,
                      std::span<const Label> labels, const Neighborhoods& neighborhoods,
                      const CblConfig& config) {
  return run(features, boundary, labels, neighborhoods, config, nullptr);
}

CblResult cbl_forward(const Matrix& features, const BoundarySet& boundary,
                      std::span<const Label> labels, const NeighborhoodIndex& index,
                      double radius, const CblConfig& config) {
  if (static_cast<std::size_t>(features.rows()) != index.size())
    throw InputError("features and index disagree on point count");
  return cbl_forward(features, boundary, labels, radius_neighborhoods(index, radius), config);
}

Matrix cbl_backward(const Matrix& features, const BoundarySet& boundary,
                    std::span<const Label> labels, const Neighborhoods& neighborhoods,
                    const CblConfig& config) {
  Matrix grad;
  run(features, boundary, labels, neighborhoods, config, &grad);
  return grad;
}

Matrix cbl_backward(const Matrix& features, const BoundarySet& boundary,
                    std::span<const Label> labels, const NeighborhoodIndex& index, double radius,
                    const CblConfig& config) {
  if (static_cast<std::size_t>(features.rows()) != index.size())
    throw InputError("features and index disagree on point count");
  return cbl_backward(features, boundary, labels, radius_neighborhoods(index, radius), config);
}

LossAndGrad cbl_loss_and_grad(const Matrix& features, const BoundarySet& boundary,
                              std::span<const Label> labels, const Neighborhoods& neighborhoods,
                              const CblConfig& config) {
  LossAndGrad out;
  out.value = run(features, boundary, labels, neighborhoods, config, &out.grad).loss;
  return out;
}

TotalLoss total_loss(LossAndGrad ce, std::vector<LossAndGrad> per_stage_cbl,
                     const CblConfig& config) {
  config.validate();
  TotalLoss t;
  t.ce = ce.value;
  t.ce_grad = std::move(ce.grad);
  for (auto& term : per_stage_cbl) {
    t.cbl_sum += term.value;
    t.cbl_grads.push_back(config.lambda * term.grad);
  }
  t.value = t.ce + config.lambda * t.cbl_sum;
  if (!std::isfinite(t.value)) throw RuntimeFailure("non-finite total loss");
  return t;
}

LossAndGrad cross_entropy(const Matrix& logits, std::span<const Label> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw InputError("logits and labels disagree on point count");
  LossAndGrad out;
  out.grad = Matrix::Zero(logits.rows(), logits.cols());
  if (logits.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    auto e = (logits.row(i).array() - m).exp().eval();
    const double s = e.sum();
    total += m + std::log(s) - logits(i, labels[static_cast<std::size_t>(i)]);
    out.grad.row(i) = (e / s * inv_n).matrix();
    out.grad(i, labels[static_cast<std::size_t>(i)]) -= inv_n;
  }
  out.value = total * inv_n;
  return out;
}

}  // namespace cblseg
