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

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "cblseg/hierarchy.hpp"
#include "cblseg/neighborhood_index.hpp"
#include "cblseg/point_cloud.hpp"
#include "oracles/oracles.hpp"

using namespace cblseg;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n, int k) {
  PointCloud c;
  c.positions = oracle::random_points(rng, n);
  c.gt_labels = oracle::random_labels(rng, n, k);
  c.num_classes = k;
  return c;
}

std::vector<std::vector<std::vector<int>>> pooling_maps(const SamplingHierarchy& h) {
  std::vector<std::vector<std::vector<int>>> maps;
  for (std::size_t n = 1; n < h.num_stages(); ++n) maps.push_back(h.stage(n).pooling_map);
  return maps;
}

}  // namespace

TEST_CASE("radius query excludes self") {
  std::vector<Vec3> one{Vec3(0.3, 0.2, 0.1)};
  auto idx = build_index(one);
  CHECK(idx.radius_query(0, 0.0).empty());
  CHECK(idx.radius_query(0, 100.0).empty());

  std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(0.05, 0, 0)};
  auto idx2 = build_index(two);
  CHECK(idx2.radius_query(0, 0.1) == std::vector<int>{1});
  CHECK(idx2.radius_query(1, 0.1) == std::vector<int>{0});
  CHECK(idx2.radius_query(0, 0.04).empty());
}

TEST_CASE("radius query matches a pairwise scan") {
  std::mt19937_64 rng(7);
  auto pts = oracle::random_points(rng, 500);
  auto idx = build_index(pts);
  for (int i = 0; i < 500; ++i) REQUIRE(idx.radius_query(i, 0.1) == oracle::radius_scan(pts, i, 0.1));

  for (int trial = 0; trial < 12; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 1000)(rng);
    auto p = oracle::random_points(rng, n);
    auto ix = build_index(p);
    for (double r : {0.05, 0.1, 0.2}) {
      for (int i = 0; i < n; ++i) REQUIRE(ix.radius_query(i, r) == oracle::radius_scan(p, i, r));
      auto nb = radius_neighborhoods(ix, r);
      REQUIRE(nb.num_points() == static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        auto s = nb.of(static_cast<std::size_t>(i));
        REQUIRE(std::vector<int>(s.begin(), s.end()) == oracle::radius_scan(p, i, r));
      }
    }
  }
}

TEST_CASE("radius query on duplicates and the exact radius") {
  std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0.25, 0, 0), Vec3(0.5, 0, 0)};
  auto idx = build_index(pts);
  CHECK(idx.radius_query(0, 0.0) == std::vector<int>{1});
  CHECK(idx.radius_query(2, 0.25) == std::vector<int>{0, 1, 3});
  CHECK(idx.radius_query_point(Vec3(0, 0, 0), 0.0) == std::vector<int>{0, 1});
}

TEST_CASE("nearest matches a linear scan with lowest-index ties") {
  std::mt19937_64 rng(3);
  auto pts = oracle::random_points(rng, 300);
  pts.push_back(pts[10]);  // duplicate of 10 at a higher index
  auto idx = build_index(pts);
  CHECK(idx.nearest(pts[10]) == 10);
  for (int q = 0; q < 200; ++q) {
    auto p = oracle::random_points(rng, 1)[0];
    int best = 0;
    double bd = (pts[0] - p).squaredNorm();
    for (int j = 1; j < static_cast<int>(pts.size()); ++j) {
      const double d = (pts[static_cast<std::size_t>(j)] - p).squaredNorm();
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    REQUIRE(idx.nearest(p) == best);
  }
}

TEST_CASE("build_index rejects bad input") {
  std::vector<Vec3> none;
  CHECK_THROWS_AS(build_index(none), InputError);
  std::vector<Vec3> nan{Vec3(0, std::nan(""), 0)};
  CHECK_THROWS_AS(build_index(nan), InputError);
}

TEST_CASE("grid_subsample examples") {
  SUBCASE("singleton") {
    std::vector<Vec3> p{Vec3(0.3, 0.7, 0.1)};
    Matrix d(1, 3);
    d << 0.2, 0.3, 0.5;
    auto s = grid_subsample(p, d, 1.0);
    REQUIRE(s.size() == 1);
    CHECK(s.positions[0] == p[0]);
    CHECK(s.label_dists == d);
    CHECK(s.pooling_map[0] == std::vector<int>{0});
    CHECK(s.owner == std::vector<int>{0});
  }
  SUBCASE("three points in one cell") {
    std::vector<Vec3> p{Vec3(0.1, 0.1, 0.1), Vec3(0.2, 0.5, 0.3), Vec3(0.9, 0.3, 0.8)};
    std::vector<Label> l{0, 0, 1};
    auto s = grid_subsample(p, one_hot(l, 2), 1.0);
    REQUIRE(s.size() == 1);
    CHECK(s.label_dists(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(s.label_dists(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(s.positions[0].isApprox(Vec3(0.4, 0.3, 0.4)));
  }
  SUBCASE("square of side 1.5") {
    std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(1.5, 0, 0), Vec3(0, 1.5, 0), Vec3(1.5, 1.5, 0)};
    auto s = grid_subsample(p, one_hot(std::vector<Label>{0, 1, 0, 1}, 2), 1.0);
    CHECK(s.size() == 4);
  }
  SUBCASE("half-open cells") {
    std::vector<Vec3> p{Vec3(0.999, 0, 0), Vec3(1.0, 0, 0), Vec3(-0.001, 0, 0)};
    auto s = grid_subsample(p, one_hot(std::vector<Label>{0, 0, 0}, 1), 1.0);
    CHECK(s.size() == 3);
  }
  SUBCASE("non-positive cell") {
    std::vector<Vec3> p{Vec3(0, 0, 0)};
    CHECK_THROWS_AS(grid_subsample(p, one_hot(std::vector<Label>{0}, 1), 0.0), InputError);
  }
}

TEST_CASE("build_hierarchy with one stage is the input cloud") {
  std::mt19937_64 rng(11);
  auto c = random_cloud(rng, 50, 3);
  auto h = build_hierarchy(c, 0.2, 0.1, 1);
  REQUIRE(h.num_stages() == 1);
  CHECK(h.stage(0).positions == c.positions);
  CHECK(h.stage(0).label_dists == one_hot(c.gt_labels, 3));
  CHECK(h.stage(0).radius == 0.1);
}

TEST_CASE("nine collinear points") {
  auto c = read_cloud_file(CBLSEG_FIXTURES "/collinear9.txt");
  auto h = build_hierarchy(c, 1.0, 0.6, 2);
  const auto& s = h.stage(1);
  REQUIRE(s.size() == 3);
  CHECK(s.label_dists(0, 0) == 1.0);
  CHECK(s.label_dists(1, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.label_dists(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.label_dists(2, 1) == 1.0);
  CHECK(s.radius == 1.2);
}

TEST_CASE("hierarchy invariants on random clouds") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 400)(rng);
    const int k = std::uniform_int_distribution<int>(1, 5)(rng);
    auto c = random_cloud(rng, n, k);
    auto h = build_hierarchy(c, 0.1, 0.1, 3);
    REQUIRE(h.num_stages() == 3);

    std::vector<double> hist(static_cast<std::size_t>(k), 0.0);
    for (Label l : c.gt_labels) hist[static_cast<std::size_t>(l)] += 1.0 / n;

    for (std::size_t s = 1; s < 3; ++s) {
      const auto& st = h.stage(s);
      const auto prev = h.stage(s - 1).size();
      CHECK(st.radius == doctest::Approx(0.1 * (1 << s)));
      // partition
      std::vector<int> seen;
      for (std::size_t i = 0; i < st.size(); ++i) {
        REQUIRE(!st.pooling_map[i].empty());
        for (int j : st.pooling_map[i]) {
          seen.push_back(j);
          REQUIRE(st.owner[static_cast<std::size_t>(j)] == static_cast<int>(i));
        }
      }
      std::sort(seen.begin(), seen.end());
      std::vector<int> all(prev);
      std::iota(all.begin(), all.end(), 0);
      REQUIRE(seen == all);
      REQUIRE(st.size() <= prev);
    }

    // conservation and transitive histograms
    const auto maps = pooling_maps(h);
    auto th = oracle::transitive_histograms(maps, c.gt_labels, k);
    const auto& last = h.stage(2);
    REQUIRE(th.size() == last.size());
    for (std::size_t s = 0; s < 3; ++s) {
      const auto& st = h.stage(s);
      // weight each point by the number of input points it represents
      auto mh = oracle::transitive_histograms(
          std::vector<std::vector<std::vector<int>>>(maps.begin(), maps.begin() + static_cast<long>(s)),
          c.gt_labels, k);
      std::vector<double> mean(static_cast<std::size_t>(k), 0.0);
      for (std::size_t i = 0; i < st.size(); ++i) {
        const int cnt = std::accumulate(mh[i].begin(), mh[i].end(), 0);
        REQUIRE(st.weights[i] == cnt);
        for (int cl = 0; cl < k; ++cl)
          REQUIRE(std::abs(st.label_dists(static_cast<Eigen::Index>(i), cl) -
                           static_cast<double>(mh[i][static_cast<std::size_t>(cl)]) / cnt) < 1e-12);
        REQUIRE(st.label_dists.row(static_cast<Eigen::Index>(i)).sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (int cl = 0; cl < k; ++cl) {
          const double v = st.label_dists(static_cast<Eigen::Index>(i), cl);
          REQUIRE(v >= 0.0);
          mean[static_cast<std::size_t>(cl)] += v * cnt / n;
        }
      }
      for (int cl = 0; cl < k; ++cl) REQUIRE(std::abs(mean[static_cast<std::size_t>(cl)] - hist[static_cast<std::size_t>(cl)]) < 1e-9);
    }
  }
}

TEST_CASE("hierarchy is deterministic") {
  std::mt19937_64 rng(9);
  auto c = random_cloud(rng, 300, 4);
  auto a = build_hierarchy(c, 0.08, 0.1, 3);
  auto b = build_hierarchy(c, 0.08, 0.1, 3);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(a.stage(s).positions == b.stage(s).positions);
    CHECK(a.stage(s).label_dists == b.stage(s).label_dists);
    CHECK(a.stage(s).pooling_map == b.stage(s).pooling_map);
  }
}

TEST_CASE("cloud text format") {
  std::istringstream in("# a comment\n# classes 5\n0 0 0 1\n1.5 -2 3e-1 4\n\n");
  auto c = read_cloud(in);
  CHECK(c.num_classes == 5);
  REQUIRE(c.size() == 2);
  CHECK(c.positions[1] == Vec3(1.5, -2, 0.3));
  CHECK_FALSE(c.has_predictions());

  std::istringstream plain("0 0 0 0 1\n1 0 0 2 2\n");
  auto p = read_cloud(plain);
  CHECK(p.num_classes == 3);
  REQUIRE(p.has_predictions());
  CHECK(*p.pred_labels == std::vector<Label>{1, 2});

  std::ostringstream out;
  write_cloud(out, p);
  std::istringstream back(out.str());
  auto q = read_cloud(back);
  CHECK(q.positions == p.positions);
  CHECK(q.gt_labels == p.gt_labels);
  CHECK(*q.pred_labels == *p.pred_labels);
  CHECK(q.num_classes == p.num_classes);
}

TEST_CASE("cloud format errors carry line numbers") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      read_cloud(in);
    } catch (const InputError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_with("0 0 0 0\n0 0 zero 0\n", "line 2"));
  CHECK(fails_with("0 0 0 -1\n", "line 1"));
  CHECK(fails_with("0 0 0 3\n", "line 1") == false);  // K inferred as 4
  CHECK(fails_with("# classes 2\n0 0 0 3\n", "line 2"));
  CHECK(fails_with("0 0\n", "line 1"));
  CHECK(fails_with("0 0 0 1 1\n0 0 0 1\n", "line 2"));
  CHECK(fails_with("# only a comment\n", "no points"));
  CHECK_THROWS_AS(read_cloud_file(CBLSEG_FIXTURES "/bad_line.txt"), InputError);
  CHECK_THROWS_AS(read_cloud_file("/nonexistent/cloud.txt"), InputError);
}

TEST_CASE("PointCloud::validate") {
  PointCloud c;
  c.positions = {Vec3(0, 0, 0)};
  c.gt_labels = {0};
  c.num_classes = 1;
  CHECK_NOTHROW(c.validate());
  c.gt_labels = {1};
  CHECK_THROWS_AS(c.validate(), InputError);
  c.gt_labels = {0, 0};
  CHECK_THROWS_AS(c.validate(), InputError);
  c.gt_labels = {0};
  c.pred_labels = std::vector<Label>{};
  CHECK_THROWS_AS(c.validate(), InputError);
}
