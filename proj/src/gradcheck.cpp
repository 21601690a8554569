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

#include "cblseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cblseg/neighborhood_index.hpp"
#include "cblseg/scene_synth.hpp"
#include "cblseg/seg_net.hpp"
#include "cblseg/trainer.hpp"

namespace cblseg {

double gradient_rel_err(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradMagnitudeFloor});
  return std::abs(analytic - numeric) / scale;
}

double max_fd_error(Matrix& x, const Matrix& analytic, const std::function<double()>& loss,
                    double step) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double saved = x.data()[k];
    x.data()[k] = saved + step;
    const double up = loss();
    x.data()[k] = saved - step;
    const double down = loss();
    x.data()[k] = saved;
    worst = std::max(worst, gradient_rel_err(analytic.data()[k], (up - down) / (2.0 * step)));
  }
  return worst;
}

GradcheckReport gradcheck_cbl(int instances, std::uint64_t seed, const CblConfig& config) {
  if (instances < 1) throw InputError("instances must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> npts(8, 64);
  std::uniform_int_distribution<int> nch(1, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  GradcheckReport report;
  while (report.instances < instances) {
    const int n = npts(rng);
    const int c = nch(rng);
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = Vec3(unit(rng), unit(rng), unit(rng));
    std::vector<Label> labels(pts.size());
    for (auto& l : labels) l = static_cast<Label>(unit(rng) * 3.0);
    Matrix f(n, c);
    for (Eigen::Index k = 0; k < f.size(); ++k) f.data()[k] = gauss(rng);

    NeighborhoodIndex index(pts);
    Neighborhoods nb = radius_neighborhoods(index, 0.35);
    BoundarySet b = extract_boundary(labels, nb);
    if (cbl_forward(f, b, labels, nb, config).active.empty()) continue;

    Matrix analytic = cbl_backward(f, b, labels, nb, config);
    double err = max_fd_error(f, analytic, [&] { return cbl_forward(f, b, labels, nb, config).loss; });
    report.max_rel_err = std::max(report.max_rel_err, err);
    ++report.instances;
  }
  return report;
}

GradcheckReport gradcheck_network(std::uint64_t seed, const CblConfig& config) {
  SynthConfig sc;
  sc.seed = seed;
  sc.num_points = 30;
  sc.num_classes = 3;
  sc.layout = SceneLayout::kCheckerboard;
  sc.extent = 1.0;
  PointCloud cloud = generate(sc);

  NetConfig nc;
  nc.num_classes = 3;
  nc.widths = {4, 5, 6};
  nc.kernel_hidden = 3;
  nc.cbl_stages = {0, 1, 2};
  nc.seed = seed;
  nc.base_cell = 0.25;
  nc.base_radius = 0.3;
  SegNet net(nc);
  PreparedScene scene = prepare_scene(cloud, nc);

  StepLoss ref = scene_loss(net, scene, config);
  GradcheckReport report;
  report.instances = 1;
  auto params = net.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    double err = max_fd_error(*params[k], ref.grads[k],
                              [&] { return scene_loss(net, scene, config).total; });
    report.max_rel_err = std::max(report.max_rel_err, err);
  }
  return report;
}

}  // namespace cblseg
