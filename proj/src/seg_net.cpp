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

#include "cblseg/seg_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cblseg {

std::vector<Matrix*> ConvLayer::parameters() { return {&w1, &b1, &w2, &b2, &proj, &bias}; }

std::vector<const Matrix*> ConvLayer::parameters() const {
  return {&w1, &b1, &w2, &b2, &proj, &bias};
}

ConvGeometry make_conv_geometry(std::span<const Vec3> points, const Neighborhoods& nb,
                                double radius) {
  if (nb.num_points() != points.size()) throw InputError("neighborhoods do not match points");
  if (!(radius > 0.0)) throw InputError("radius must be positive");
  ConvGeometry g;
  const std::size_t pairs = points.size() + nb.indices.size();
  g.center.reserve(pairs);
  g.other.reserve(pairs);
  g.offsets.resize(static_cast<Eigen::Index>(pairs), 3);
  g.inv_count.resize(points.size());
  Eigen::Index p = 0;
  auto push = [&](int i, int j) {
    g.center.push_back(i);
    g.other.push_back(j);
    g.offsets.row(p++) = ((points[i] - points[j]) / radius).transpose();
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int ii = static_cast<int>(i);
    push(ii, ii);
    for (int j : nb.of(i)) push(ii, j);
    g.inv_count[i] = 1.0 / static_cast<double>(nb.of(i).size() + 1);
  }
  return g;
}

ConvCache conv_forward(const ConvLayer& layer, const ConvGeometry& geo, const Matrix& f) {
  if (static_cast<std::size_t>(f.rows()) != geo.num_points())
    throw InputError("feature rows do not match stage size");
  if (f.cols() != layer.in_channels()) throw InputError("feature width does not match layer");
  for (const Matrix* m : layer.parameters()) {
    if (!m->allFinite()) throw RuntimeFailure("non-finite convolution parameter");
  }
  const auto pairs = static_cast<Eigen::Index>(geo.center.size());
  const Eigen::Index hid = layer.hidden();
  const Eigen::Index cin = f.cols();

  ConvCache c;
  c.pre_hidden.resize(pairs, hid);
  c.hidden.resize(pairs, hid);
  c.gate.resize(pairs, cin);
  c.pooled = Matrix::Zero(f.rows(), cin);
  const double* w1 = layer.w1.data();
  const double* w2 = layer.w2.data();
  for (Eigen::Index p = 0; p < pairs; ++p) {
    const double* off = geo.offsets.data() + 3 * p;
    double* a = c.pre_hidden.data() + hid * p;
    double* h = c.hidden.data() + hid * p;
    double* g = c.gate.data() + cin * p;
    for (Eigen::Index k = 0; k < hid; ++k) {
      a[k] = layer.b1(0, k) + off[0] * w1[k] + off[1] * w1[hid + k] + off[2] * w1[2 * hid + k];
      h[k] = a[k] > 0.0 ? a[k] : 0.0;
    }
    for (Eigen::Index ch = 0; ch < cin; ++ch) g[ch] = layer.b2(0, ch);
    for (Eigen::Index k = 0; k < hid; ++k) {
      const double hk = h[k];
      if (hk == 0.0) continue;
      const double* row = w2 + cin * k;
      for (Eigen::Index ch = 0; ch < cin; ++ch) g[ch] += hk * row[ch];
    }
    const double* fj = f.data() + cin * geo.other[static_cast<std::size_t>(p)];
    double* acc = c.pooled.data() + cin * geo.center[static_cast<std::size_t>(p)];
    for (Eigen::Index ch = 0; ch < cin; ++ch) acc[ch] += g[ch] * fj[ch];
  }
  for (Eigen::Index i = 0; i < f.rows(); ++i) c.pooled.row(i) *= geo.inv_count[static_cast<std::size_t>(i)];

  c.pre_out = c.pooled * layer.proj;
  c.pre_out.rowwise() += layer.bias.row(0);
  c.out = layer.relu ? Matrix(c.pre_out.cwiseMax(0.0)) : c.pre_out;
  return c;
}

Matrix conv_forward(const ConvLayer& layer, std::span<const Vec3> points,
                    const NeighborhoodIndex& index, double radius, const Matrix& features) {
  auto geo = make_conv_geometry(points, radius_neighborhoods(index, radius), radius);
  return conv_forward(layer, geo, features).out;
}

ConvGrads conv_backward(const ConvLayer& layer, const ConvGeometry& geo, const Matrix& f,
                        const ConvCache& c, const Matrix& grad_out) {
  Matrix d_pre = grad_out;
  if (layer.relu) d_pre = d_pre.cwiseProduct((c.pre_out.array() > 0.0).cast<double>().matrix());

  const auto pairs = static_cast<Eigen::Index>(geo.center.size());
  const Eigen::Index hid = layer.hidden();
  const Eigen::Index cin = f.cols();

  ConvGrads g;
  g.params.resize(6);
  g.params[4] = c.pooled.transpose() * d_pre;
  g.params[5] = d_pre.colwise().sum();
  Matrix d_pooled = d_pre * layer.proj.transpose();
  for (Eigen::Index i = 0; i < d_pooled.rows(); ++i) d_pooled.row(i) *= geo.inv_count[static_cast<std::size_t>(i)];

  Matrix dw1 = Matrix::Zero(3, hid);
  Matrix db1 = Matrix::Zero(1, hid);
  Matrix dw2 = Matrix::Zero(hid, cin);
  Matrix db2 = Matrix::Zero(1, cin);
  g.input = Matrix::Zero(f.rows(), cin);
  std::vector<double> dg(static_cast<std::size_t>(cin));
  const double* w2 = layer.w2.data();
  for (Eigen::Index p = 0; p < pairs; ++p) {
    const int ctr = geo.center[static_cast<std::size_t>(p)];
    const int oth = geo.other[static_cast<std::size_t>(p)];
    const double* dp = d_pooled.data() + cin * ctr;
    const double* fj = f.data() + cin * oth;
    const double* gate = c.gate.data() + cin * p;
    double* din = g.input.data() + cin * oth;
    double* dgp = dg.data();
    double* db2p = db2.data();
    for (Eigen::Index ch = 0; ch < cin; ++ch) {
      dgp[ch] = dp[ch] * fj[ch];
      din[ch] += dp[ch] * gate[ch];
      db2p[ch] += dgp[ch];
    }
    const double* h = c.hidden.data() + hid * p;
    const double* a = c.pre_hidden.data() + hid * p;
    const double* off = geo.offsets.data() + 3 * p;
    for (Eigen::Index k = 0; k < hid; ++k) {
      if (a[k] <= 0.0) continue;  // inactive unit: no gradient to w2 row k or below
      const double hk = h[k];
      double* dw2row = dw2.data() + cin * k;
      const double* w2row = w2 + cin * k;
      double dh = 0.0;
      for (Eigen::Index ch = 0; ch < cin; ++ch) {
        dw2row[ch] += hk * dgp[ch];
        dh += w2row[ch] * dgp[ch];
      }
      db1(0, k) += dh;
      dw1(0, k) += off[0] * dh;
      dw1(1, k) += off[1] * dh;
      dw1(2, k) += off[2] * dh;
    }
  }
  g.params[0] = std::move(dw1);
  g.params[1] = std::move(db1);
  g.params[2] = std::move(dw2);
  g.params[3] = std::move(db2);
  return g;
}

void NetConfig::validate() const {
  if (num_classes < 1) throw InputError("num_classes must be positive");
  if (input_dim < 1) throw InputError("input_dim must be positive");
  if (widths.empty()) throw InputError("at least one stage is required");
  for (int w : widths) {
    if (w < 1) throw InputError("stage widths must be positive");
  }
  if (kernel_hidden < 1) throw InputError("kernel_hidden must be positive");
  for (int s : cbl_stages) {
    if (s < 0 || s >= num_stages()) throw InputError("cbl stage " + std::to_string(s) + " out of range");
  }
  if (!(base_cell > 0.0) || !(base_radius > 0.0)) throw InputError("base_cell and base_radius must be positive");
}

PreparedScene prepare_scene(const PointCloud& cloud, const NetConfig& config,
                            const MiningConfig& mining) {
  config.validate();
  if (cloud.num_classes > config.num_classes)
    throw InputError("scene has more classes than the network");
  PreparedScene s;
  s.hierarchy = build_hierarchy(cloud, config.base_cell, config.base_radius, config.num_stages());
  s.hierarchy.num_classes = config.num_classes;
  if (cloud.num_classes < config.num_classes) {
    // widen label distributions to the network's class count
    for (auto& st : s.hierarchy.stages) {
      Matrix wide = Matrix::Zero(st.label_dists.rows(), config.num_classes);
      wide.leftCols(st.label_dists.cols()) = st.label_dists;
      st.label_dists = std::move(wide);
    }
  }
  s.gt_labels = cloud.gt_labels;

  const auto n0 = cloud.size();
  for (std::size_t n = 0; n < s.hierarchy.num_stages(); ++n) {
    const Stage& st = s.hierarchy.stages[n];
    NeighborhoodIndex index(st.positions);
    s.neighborhoods.push_back(radius_neighborhoods(index, st.radius));
    s.geometry.push_back(make_conv_geometry(st.positions, s.neighborhoods.back(), st.radius));
    std::vector<int> anc(n0);
    for (std::size_t i = 0; i < n0; ++i) anc[i] = n == 0 ? static_cast<int>(i) : st.owner[s.ancestor[n - 1][i]];
    s.ancestor.push_back(std::move(anc));
    s.stage_labels.push_back(stage_labels_argmax(s.hierarchy, n));
    s.stage_boundaries.push_back(mine_stage_boundaries(s.hierarchy, n, mining, s.neighborhoods.back()));
  }

  s.input_features.resize(static_cast<Eigen::Index>(n0), config.input_dim);
  double zmin = cloud.positions[0].z();
  for (const auto& p : cloud.positions) zmin = std::min(zmin, p.z());
  for (std::size_t i = 0; i < n0; ++i) {
    auto row = s.input_features.row(static_cast<Eigen::Index>(i));
    row.setZero();
    row(0) = 1.0;
    if (config.input_dim > 1) row(1) = cloud.positions[i].z() - zmin;
  }
  return s;
}

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

ConvLayer make_layer(std::mt19937_64& rng, int in, int out, int hidden) {
  ConvLayer l;
  l.w1 = random_matrix(rng, 3, hidden, std::sqrt(2.0 / 3.0));
  l.b1 = random_matrix(rng, 1, hidden, 0.1);  // off the ReLU kink for self pairs
  l.w2 = random_matrix(rng, hidden, in, 0.5 / std::sqrt(static_cast<double>(hidden)));
  l.b2 = Matrix::Ones(1, in);
  l.proj = random_matrix(rng, in, out, std::sqrt(2.0 / in));
  l.bias = Matrix::Constant(1, out, 0.01);
  return l;
}

// rows of `coarse` copied to every stage-0 point through `ancestor`
Matrix upsample(const Matrix& coarse, const std::vector<int>& owner) {
  Matrix out(static_cast<Eigen::Index>(owner.size()), coarse.cols());
  for (std::size_t i = 0; i < owner.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = coarse.row(owner[i]);
  return out;
}

void upsample_backward(const Matrix& grad_fine, const std::vector<int>& owner, Matrix& grad_coarse) {
  for (std::size_t i = 0; i < owner.size(); ++i)
    grad_coarse.row(owner[i]) += grad_fine.row(static_cast<Eigen::Index>(i));
}

Matrix pool(const Matrix& fine, const Stage& coarse) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(coarse.size()), fine.cols());
  for (std::size_t g = 0; g < coarse.size(); ++g) {
    auto row = out.row(static_cast<Eigen::Index>(g));
    for (int j : coarse.pooling_map[g]) row += fine.row(j);
    row /= static_cast<double>(coarse.pooling_map[g].size());
  }
  return out;
}

void pool_backward(const Matrix& grad_coarse, const Stage& coarse, Matrix& grad_fine) {
  for (std::size_t g = 0; g < coarse.size(); ++g) {
    const double inv = 1.0 / static_cast<double>(coarse.pooling_map[g].size());
    for (int j : coarse.pooling_map[g]) grad_fine.row(j) += inv * grad_coarse.row(static_cast<Eigen::Index>(g));
  }
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

SegNet::SegNet(NetConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const int stages = config_.num_stages();
  const auto& w = config_.widths;
  for (int n = 0; n < stages; ++n) {
    const int in = n == 0 ? config_.input_dim : w[n - 1];
    encoders.push_back(make_layer(rng, in, w[n], config_.kernel_hidden));
  }
  for (int n = 0; n + 1 < stages; ++n)
    decoders.push_back(make_layer(rng, w[n + 1] + w[n], w[n], config_.kernel_hidden));
  int head_in = w[0];
  if (config_.multi_scale_head) {
    for (int n = 1; n < stages; ++n) head_in += w[n];
  }
  head_w = random_matrix(rng, head_in, config_.num_classes, std::sqrt(1.0 / head_in));
  head_b = Matrix::Zero(1, config_.num_classes);
}

std::vector<Matrix*> SegNet::parameters() {
  std::vector<Matrix*> out;
  for (auto& l : encoders) {
    for (Matrix* m : l.parameters()) out.push_back(m);
  }
  for (auto& l : decoders) {
    for (Matrix* m : l.parameters()) out.push_back(m);
  }
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

std::vector<const Matrix*> SegNet::parameters() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<SegNet*>(this)->parameters()) out.push_back(m);
  return out;
}

ForwardResult SegNet::forward(const PreparedScene& scene) const {
  const int stages = config_.num_stages();
  if (static_cast<int>(scene.hierarchy.num_stages()) != stages)
    throw InputError("scene hierarchy has " + std::to_string(scene.hierarchy.num_stages()) +
                     " stages, network expects " + std::to_string(stages));
  ForwardResult r;
  r.enc_in.resize(static_cast<std::size_t>(stages));
  r.enc.resize(static_cast<std::size_t>(stages));
  for (int n = 0; n < stages; ++n) {
    const auto un = static_cast<std::size_t>(n);
    r.enc_in[un] = n == 0 ? scene.input_features : pool(r.enc[un - 1].out, scene.hierarchy.stages[un]);
    r.enc[un] = conv_forward(encoders[un], scene.geometry[un], r.enc_in[un]);
  }

  // decoder outputs per stage; the coarsest stage passes its encoder output through
  std::vector<const Matrix*> dec_out(static_cast<std::size_t>(stages));
  dec_out.back() = &r.enc.back().out;
  r.dec_in.resize(static_cast<std::size_t>(stages - 1));
  r.dec.resize(static_cast<std::size_t>(stages - 1));
  for (int n = stages - 2; n >= 0; --n) {
    const auto un = static_cast<std::size_t>(n);
    Matrix up = upsample(*dec_out[un + 1], scene.hierarchy.stages[un + 1].owner);
    r.dec_in[un] = hconcat(up, r.enc[un].out);
    r.dec[un] = conv_forward(decoders[un], scene.geometry[un], r.dec_in[un]);
    dec_out[un] = &r.dec[un].out;
  }

  r.head_in = *dec_out[0];
  if (config_.multi_scale_head) {
    for (int n = 1; n < stages; ++n) {
      const auto un = static_cast<std::size_t>(n);
      r.head_in = hconcat(r.head_in, upsample(*dec_out[un], scene.ancestor[un]));
    }
  }
  r.logits = r.head_in * head_w;
  r.logits.rowwise() += head_b.row(0);

  r.taps.push_back(*dec_out[0]);
  for (int n = 1; n < stages; ++n) r.taps.push_back(r.enc[static_cast<std::size_t>(n)].out);
  return r;
}

std::vector<Matrix> SegNet::backward(const PreparedScene& scene, const ForwardResult& fwd,
                                     const Matrix& grad_logits,
                                     const std::vector<Matrix>& grad_taps) const {
  const int stages = config_.num_stages();
  const auto& w = config_.widths;
  const std::size_t per_layer = 6;
  std::vector<Matrix> grads(per_layer * (encoders.size() + decoders.size()) + 2);
  const std::size_t dec_base = per_layer * encoders.size();
  const std::size_t head_base = dec_base + per_layer * decoders.size();

  grads[head_base] = fwd.head_in.transpose() * grad_logits;
  grads[head_base + 1] = grad_logits.colwise().sum();
  Matrix d_head_in = grad_logits * head_w.transpose();

  std::vector<Matrix> d_dec(static_cast<std::size_t>(stages));
  std::vector<Matrix> d_enc(static_cast<std::size_t>(stages));
  for (int n = 0; n < stages; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const auto rows = static_cast<Eigen::Index>(scene.hierarchy.stages[un].size());
    d_dec[un] = Matrix::Zero(rows, w[un]);
    d_enc[un] = Matrix::Zero(rows, w[un]);
  }

  d_dec[0] += d_head_in.leftCols(w[0]);
  if (config_.multi_scale_head) {
    Eigen::Index col = w[0];
    for (int n = 1; n < stages; ++n) {
      const auto un = static_cast<std::size_t>(n);
      upsample_backward(d_head_in.middleCols(col, w[un]), scene.ancestor[un], d_dec[un]);
      col += w[un];
    }
  }
  if (!grad_taps.empty()) {
    if (static_cast<int>(grad_taps.size()) != stages) throw InputError("one tap gradient per stage expected");
    for (int n = 0; n < stages; ++n) {
      const auto& g = grad_taps[static_cast<std::size_t>(n)];
      if (g.size() == 0) continue;
      (n == 0 ? d_dec[0] : d_enc[static_cast<std::size_t>(n)]) += g;
    }
  }
  // the coarsest decoder output is the coarsest encoder output
  d_enc.back() += d_dec.back();

  for (int n = 0; n + 1 < stages; ++n) {
    const auto un = static_cast<std::size_t>(n);
    ConvGrads cg = conv_backward(decoders[un], scene.geometry[un], fwd.dec_in[un], fwd.dec[un], d_dec[un]);
    for (std::size_t k = 0; k < per_layer; ++k) grads[dec_base + per_layer * un + k] = std::move(cg.params[k]);
    const int up_w = w[un + 1];
    Matrix& d_coarse = n + 2 == stages ? d_enc[un + 1] : d_dec[un + 1];
    upsample_backward(cg.input.leftCols(up_w), scene.hierarchy.stages[un + 1].owner, d_coarse);
    d_enc[un] += cg.input.rightCols(w[un]);
  }

  for (int n = stages - 1; n >= 0; --n) {
    const auto un = static_cast<std::size_t>(n);
    ConvGrads cg = conv_backward(encoders[un], scene.geometry[un], fwd.enc_in[un], fwd.enc[un], d_enc[un]);
    for (std::size_t k = 0; k < per_layer; ++k) grads[per_layer * un + k] = std::move(cg.params[k]);
    if (n > 0) pool_backward(cg.input, scene.hierarchy.stages[un], d_enc[un - 1]);
  }
  return grads;
}

std::vector<Label> predict(const SegNet& net, const PreparedScene& scene) {
  ForwardResult r = net.forward(scene);
  std::vector<Label> out(static_cast<std::size_t>(r.logits.rows()));
  for (Eigen::Index i = 0; i < r.logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < r.logits.cols(); ++k) {
      if (r.logits(i, k) > r.logits(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<Label>(best);
  }
  return out;
}

}  // namespace cblseg
