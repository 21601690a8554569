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

#include "cblseg/trainer.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

namespace cblseg {

void TrainConfig::validate() const {
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw InputError("weight decay must be >= 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InputError("lr decay must be in (0, 1]");
  if (!(boundary_radius > 0.0)) throw InputError("boundary radius must be positive");
  cbl.validate();
  mining.validate();
}

StepLoss scene_loss(const SegNet& net, const PreparedScene& scene, const CblConfig& cbl) {
  ForwardResult fwd = net.forward(scene);
  if (!fwd.logits.allFinite()) throw RuntimeFailure("non-finite activations");
  for (const Matrix& t : fwd.taps) {
    if (!t.allFinite()) throw RuntimeFailure("non-finite activations");
  }
  LossAndGrad ce = cross_entropy(fwd.logits, scene.gt_labels);

  const auto stages = static_cast<std::size_t>(net.config().num_stages());
  std::vector<LossAndGrad> cbl_terms;
  std::vector<int> term_stage;
  if (cbl.lambda > 0.0) {
    for (int s : net.config().cbl_stages) {
      const auto us = static_cast<std::size_t>(s);
      cbl_terms.push_back(cbl_loss_and_grad(fwd.taps[us], scene.stage_boundaries[us],
                                            scene.stage_labels[us], scene.neighborhoods[us], cbl));
      term_stage.push_back(s);
    }
  }
  TotalLoss total = total_loss(std::move(ce), std::move(cbl_terms), cbl);

  std::vector<Matrix> grad_taps;
  if (!total.cbl_grads.empty()) {
    grad_taps.resize(stages);
    for (std::size_t t = 0; t < total.cbl_grads.size(); ++t) {
      Matrix& slot = grad_taps[static_cast<std::size_t>(term_stage[t])];
      if (slot.size() == 0) {
        slot = std::move(total.cbl_grads[t]);
      } else {
        slot += total.cbl_grads[t];
      }
    }
  }

  StepLoss out;
  out.ce = total.ce;
  out.cbl_total = total.cbl_sum;
  out.total = total.value;
  out.grads = net.backward(scene, fwd, total.ce_grad, grad_taps);
  return out;
}

TrainResult train(SegNet& net, const std::vector<PointCloud>& scenes, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (scenes.empty()) throw InputError("no training scenes");

  std::vector<PreparedScene> prepared;
  prepared.reserve(scenes.size());
  for (const auto& s : scenes) prepared.push_back(prepare_scene(s, net.config(), config.mining));

  auto params = net.parameters();
  std::vector<Matrix> velocity;
  for (const Matrix* p : params) velocity.push_back(Matrix::Zero(p->rows(), p->cols()));

  std::mt19937_64 rng(net.config().seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double lr = config.learning_rate;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    for (std::size_t idx : order) {
      StepLoss step;
      try {
        step = scene_loss(net, prepared[idx], config.cbl);
      } catch (const RuntimeFailure& e) {
        throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      entry.ce += step.ce;
      entry.cbl_total += step.cbl_total;
      entry.total += step.total;
      for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& w = *params[k];
        velocity[k] = config.momentum * velocity[k] + step.grads[k] + config.weight_decay * w;
        w -= lr * velocity[k];
        if (!w.allFinite()) throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch));
      }
      ++result.steps;
    }
    const double inv = 1.0 / static_cast<double>(prepared.size());
    entry.ce *= inv;
    entry.cbl_total *= inv;
    entry.total *= inv;
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    lr *= config.lr_decay;
  }
  return result;
}

EvalResult evaluate(const SegNet& net, const std::vector<PointCloud>& scenes, double radius) {
  EvalResult out;
  out.counts = SegmentationCounts(net.config().num_classes);
  for (const auto& scene : scenes) {
    PreparedScene prepared = prepare_scene(scene, net.config());
    PointCloud with_pred = scene;
    with_pred.num_classes = net.config().num_classes;
    with_pred.pred_labels = predict(net, prepared);
    SegmentationCounts c = segmentation_counts(with_pred, radius);
    out.per_scene.push_back(report_from_counts(c, radius));
    out.counts += c;
  }
  out.aggregate = report_from_counts(out.counts, radius);
  return out;
}

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,ce,cbl_total,total,lr\n";
  out << std::setprecision(17);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.ce << ',' << e.cbl_total << ',' << e.total << ',' << e.lr << '\n';
  }
}

}  // namespace cblseg
