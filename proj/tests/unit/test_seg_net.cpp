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

#include <doctest.h>

#include <random>
#include <sstream>

#include "cblseg/checkpoint.hpp"
#include "cblseg/gradcheck.hpp"
#include "cblseg/scene_synth.hpp"
#include "cblseg/seg_net.hpp"
#include "cblseg/trainer.hpp"
#include "oracles/oracles.hpp"

using namespace cblseg;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c, double s = 1.0) {
  std::normal_distribution<double> g(0.0, s);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

ConvLayer random_layer(std::mt19937_64& rng, int cin, int cout, int hid, bool relu) {
  ConvLayer l;
  l.w1 = random_matrix(rng, 3, hid);
  l.b1 = random_matrix(rng, 1, hid, 0.5);
  l.w2 = random_matrix(rng, hid, cin);
  l.b2 = random_matrix(rng, 1, cin);
  l.proj = random_matrix(rng, cin, cout);
  l.bias = random_matrix(rng, 1, cout, 0.5);
  l.relu = relu;
  return l;
}

PointCloud checker(std::uint64_t seed, int n, int k) {
  SynthConfig s;
  s.seed = seed;
  s.num_points = n;
  s.num_classes = k;
  s.layout = SceneLayout::kCheckerboard;
  s.extent = 1.0;
  return generate(s);
}

NetConfig small_config(int k) {
  NetConfig c;
  c.num_classes = k;
  c.widths = {4, 5, 6};
  c.kernel_hidden = 3;
  c.base_cell = 0.25;
  c.base_radius = 0.3;
  return c;
}

}  // namespace

TEST_CASE("isolated point sees only its own gated feature") {
  std::mt19937_64 rng(1);
  auto layer = random_layer(rng, 3, 2, 4, true);
  std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(5, 5, 5)};
  Matrix f = random_matrix(rng, 2, 3);
  Matrix out = conv_forward(layer, pts, build_index(pts), 0.1, f);
  for (int i = 0; i < 2; ++i) {
    Matrix g0 = (layer.b1.cwiseMax(0.0) * layer.w2 + layer.b2);
    Matrix want = (g0.cwiseProduct(f.row(i)) * layer.proj + layer.bias).cwiseMax(0.0);
    CHECK((out.row(i) - want).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("constant gate with identity projection averages the neighborhood") {
  std::mt19937_64 rng(2);
  auto pts = oracle::random_points(rng, 80, 0.5);
  ConvLayer l;
  l.w1 = Matrix::Zero(3, 2);
  l.b1 = Matrix::Zero(1, 2);
  l.w2 = Matrix::Zero(2, 4);
  l.b2 = Matrix::Ones(1, 4);
  l.proj = Matrix::Identity(4, 4);
  l.bias = Matrix::Zero(1, 4);
  l.relu = false;
  Matrix f = random_matrix(rng, 80, 4);
  Matrix out = conv_forward(l, pts, build_index(pts), 0.12, f);
  for (int i = 0; i < 80; ++i) {
    auto nb = oracle::radius_scan(pts, i, 0.12);
    Eigen::RowVectorXd mean = f.row(i);
    for (int j : nb) mean += f.row(j);
    mean /= static_cast<double>(nb.size() + 1);
    REQUIRE((out.row(i) - mean).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("conv gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto pts = oracle::random_points(rng, 25, 0.4);
    auto idx = build_index(pts);
    auto geo = make_conv_geometry(pts, radius_neighborhoods(idx, 0.2), 0.2);
    ConvLayer layer = random_layer(rng, 3, 4, 5, seed % 2 == 0);
    Matrix f = random_matrix(rng, 25, 3);
    Matrix weight = random_matrix(rng, 25, 4);
    auto loss = [&] { return conv_forward(layer, geo, f).out.cwiseProduct(weight).sum(); };
    auto cache = conv_forward(layer, geo, f);
    auto grads = conv_backward(layer, geo, f, cache, weight);
    auto params = layer.parameters();
    for (std::size_t p = 0; p < params.size(); ++p)
      CHECK(max_fd_error(*params[p], grads.params[p], loss) < 1e-5);
    CHECK(max_fd_error(f, grads.input, loss) < 1e-5);
  }
}

TEST_CASE("conv is translation covariant") {
  std::mt19937_64 rng(3);
  auto pts = oracle::random_points(rng, 200, 0.6);
  auto layer = random_layer(rng, 2, 3, 4, true);
  Matrix f = random_matrix(rng, 200, 2);
  Matrix a = conv_forward(layer, pts, build_index(pts), 0.1, f);
  std::vector<Vec3> moved;
  for (const auto& p : pts) moved.push_back(p + Vec3(3.7, -1.25, 0.5));
  Matrix b = conv_forward(layer, moved, build_index(moved), 0.1, f);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("single class and single point scenes") {
  auto c = checker(4, 200, 1);
  NetConfig cfg;
  cfg.num_classes = 1;
  SegNet net(cfg);
  auto scene = prepare_scene(c, cfg);
  auto fwd = net.forward(scene);
  CHECK(fwd.logits.rows() == 200);
  CHECK(fwd.logits.cols() == 1);
  for (Label l : predict(net, scene)) CHECK(l == 0);

  PointCloud one;
  one.positions = {Vec3(0.2, 0.3, 0.4)};
  one.gt_labels = {2};
  one.num_classes = 3;
  NetConfig c3;
  c3.num_classes = 3;
  SegNet net3(c3);
  auto s1 = prepare_scene(one, c3);
  auto f1 = net3.forward(s1);
  CHECK(f1.logits.rows() == 1);
  CHECK(f1.logits.cols() == 3);
  CHECK(f1.logits.allFinite());
  auto loss = scene_loss(net3, s1, CblConfig{});
  CHECK(std::isfinite(loss.total));
  CHECK(loss.cbl_total == 0.0);
}

TEST_CASE("full network gradient check") {
  CblConfig cbl;
  cbl.lambda = 0.1;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto rep = gradcheck_network(seed, cbl);
    CHECK(rep.max_rel_err < kNetworkGradTolerance);
  }

  // the same check written out against scene_loss with a multi-scale head
  auto cloud = checker(9, 30, 3);
  auto cfg = small_config(3);
  SegNet net(cfg);
  auto scene = prepare_scene(cloud, cfg);
  auto step = scene_loss(net, scene, cbl);
  CHECK(step.cbl_total > 0.0);
  auto params = net.parameters();
  REQUIRE(step.grads.size() == params.size());
  double worst = 0;
  for (std::size_t p = 0; p < params.size(); ++p)
    worst = std::max(worst, max_fd_error(*params[p], step.grads[p],
                                         [&] { return scene_loss(net, scene, cbl).total; }));
  CHECK(worst < kNetworkGradTolerance);
}

TEST_CASE("multi-scale head with zero extra weights equals the plain head") {
  auto cloud = checker(5, 300, 3);
  NetConfig multi;
  multi.num_classes = 3;
  multi.seed = 17;
  NetConfig plain = multi;
  plain.multi_scale_head = false;
  SegNet a(multi), b(plain);
  REQUIRE(a.head_w.rows() == 16 + 32 + 64);
  REQUIRE(b.head_w.rows() == 16);
  a.head_w.setZero();
  a.head_w.topRows(16) = b.head_w;
  a.head_b = b.head_b;
  auto scene = prepare_scene(cloud, multi);
  Matrix la = a.forward(scene).logits;
  Matrix lb = b.forward(scene).logits;
  CHECK((la - lb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("initialization is deterministic in the seed") {
  NetConfig c;
  c.num_classes = 4;
  c.seed = 3;
  SegNet a(c), b(c);
  c.seed = 4;
  SegNet d(c);
  auto pa = a.parameters(), pb = b.parameters(), pd = d.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(*pa[i] == *pb[i]);
    differs |= *pa[i] != *pd[i];
  }
  CHECK(differs);
}

TEST_CASE("network config validation") {
  NetConfig c;
  c.cbl_stages = {3};
  CHECK_THROWS_AS(SegNet{c}, InputError);
  c = NetConfig{};
  c.widths = {};
  CHECK_THROWS_AS(SegNet{c}, InputError);
  c = NetConfig{};
  c.base_cell = 0;
  CHECK_THROWS_AS(SegNet{c}, InputError);
}

TEST_CASE("checkpoint round trip") {
  NetConfig c = small_config(5);
  c.seed = 123;
  c.multi_scale_head = false;
  c.cbl_stages = {1};
  SegNet net(c);
  std::stringstream buf;
  save_checkpoint(buf, net);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "CBL1");
  auto back = load_checkpoint(buf);
  CHECK(back.config().widths == c.widths);
  CHECK(back.config().num_classes == 5);
  CHECK(back.config().seed == 123);
  CHECK(back.config().multi_scale_head == false);
  CHECK(back.config().cbl_stages == std::vector<int>{1});
  CHECK(back.config().base_cell == c.base_cell);
  auto pa = net.parameters(), pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);

  std::stringstream again;
  save_checkpoint(again, back);
  CHECK(again.str() == bytes);

  std::stringstream bad("CBL2" + bytes.substr(4));
  CHECK_THROWS_AS(load_checkpoint(bad), InputError);
  std::stringstream cut(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(load_checkpoint(cut), InputError);
  std::stringstream empty;
  CHECK_THROWS_AS(load_checkpoint(empty), InputError);
  CHECK_THROWS_AS(load_checkpoint_file("/nonexistent/net.ckpt"), InputError);
}
