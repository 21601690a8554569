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

#include <cstdint>
#include <span>
#include <vector>

#include "cblseg/boundary_metrics.hpp"
#include "cblseg/common.hpp"
#include "cblseg/hierarchy.hpp"
#include "cblseg/neighborhood_index.hpp"
#include "cblseg/point_cloud.hpp"
#include "cblseg/subscene_mining.hpp"

namespace cblseg {

/// Continuous convolution with a factorized kernel:
///   m_i  = 1/|N_i + i| * sum_{j in N_i + i} g((x_i - x_j) / r) * f_j
///   f'_i = act(m_i * proj + bias)
/// where g is a one-hidden-layer MLP (3 -> hidden -> C_in, rectified hidden).
struct ConvLayer {
  Matrix w1;    // 3 x hidden
  Matrix b1;    // 1 x hidden
  Matrix w2;    // hidden x C_in
  Matrix b2;    // 1 x C_in
  Matrix proj;  // C_in x C_out
  Matrix bias;  // 1 x C_out
  bool relu = true;

  int in_channels() const { return static_cast<int>(proj.rows()); }
  int out_channels() const { return static_cast<int>(proj.cols()); }
  int hidden() const { return static_cast<int>(w1.cols()); }
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

/// Center/neighbor pairs of one stage (self included) with normalized offsets.
struct ConvGeometry {
  std::vector<int> center;
  std::vector<int> other;
  Matrix offsets;                  // pairs x 3, (x_i - x_j) / radius
  std::vector<double> inv_count;  // per point, 1 / |N_i + i|

  std::size_t num_points() const { return inv_count.size(); }
};

ConvGeometry make_conv_geometry(std::span<const Vec3> points, const Neighborhoods& neighborhoods,
                                double radius);

struct ConvCache {
  Matrix pre_hidden;  // pairs x hidden
  Matrix hidden;      // pairs x hidden
  Matrix gate;        // pairs x C_in
  Matrix pooled;      // points x C_in
  Matrix pre_out;     // points x C_out
  Matrix out;         // points x C_out
};

ConvCache conv_forward(const ConvLayer& layer, const ConvGeometry& geometry,
                       const Matrix& features);

/// Convenience form that builds the radius neighborhoods itself.
Matrix conv_forward(const ConvLayer& layer, std::span<const Vec3> points,
                    const NeighborhoodIndex& index, double radius, const Matrix& features);

struct ConvGrads {
  std::vector<Matrix> params;  // same order as ConvLayer::parameters()
  Matrix input;
};

ConvGrads conv_backward(const ConvLayer& layer, const ConvGeometry& geometry,
                        const Matrix& features, const ConvCache& cache, const Matrix& grad_out);

struct NetConfig {
  int num_classes = 2;
  int input_dim = 2;  // constant channel + height above the scene minimum
  std::vector<int> widths{16, 32, 64};  // one per stage
  int kernel_hidden = 8;
  bool multi_scale_head = true;
  std::vector<int> cbl_stages{0, 1, 2};
  std::uint64_t seed = 0;
  double base_cell = 0.12;
  double base_radius = kDefaultBoundaryRadius;

  int num_stages() const { return static_cast<int>(widths.size()); }
  void validate() const;
};

/// Everything about a scene that does not depend on network weights.
struct PreparedScene {
  SamplingHierarchy hierarchy;
  std::vector<Neighborhoods> neighborhoods;  // per stage, at the stage radius
  std::vector<ConvGeometry> geometry;        // per stage
  std::vector<std::vector<int>> ancestor;    // per stage: stage-0 point -> stage-n point
  std::vector<std::vector<Label>> stage_labels;  // argmax sub-scene labels
  std::vector<BoundarySet> stage_boundaries;     // mined ground-truth boundaries
  Matrix input_features;
  std::vector<Label> gt_labels;
};

PreparedScene prepare_scene(const PointCloud& cloud, const NetConfig& config,
                            const MiningConfig& mining = {});

struct ForwardResult {
  Matrix logits;
  /// Feature taps used by CBL: stage 0 is the last decoder output, stage n >= 1
  /// the encoder output at that stage.
  std::vector<Matrix> taps;

  // Intermediate values kept for the backward pass.
  std::vector<Matrix> enc_in;
  std::vector<ConvCache> enc;
  std::vector<Matrix> dec_in;
  std::vector<ConvCache> dec;
  Matrix head_in;
};

class SegNet {
 public:
  explicit SegNet(NetConfig config);

  const NetConfig& config() const { return config_; }

  ForwardResult forward(const PreparedScene& scene) const;

  /// Gradients for every parameter, ordered as parameters(). `grad_taps` may
  /// be empty or hold one (possibly empty) matrix per stage.
  std::vector<Matrix> backward(const PreparedScene& scene, const ForwardResult& fwd,
                               const Matrix& grad_logits,
                               const std::vector<Matrix>& grad_taps) const;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

  std::vector<ConvLayer> encoders;  // one per stage
  std::vector<ConvLayer> decoders;  // decoders[n] runs at stage n, n < num_stages - 1
  Matrix head_w;
  Matrix head_b;

 private:
  NetConfig config_;
};

/// Per-point predicted labels (argmax of the logits, ties to the lowest class).
std::vector<Label> predict(const SegNet& net, const PreparedScene& scene);

}  // namespace cblseg
