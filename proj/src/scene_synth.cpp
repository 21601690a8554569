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

#include "cblseg/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cblseg {

SceneLayout parse_layout(std::string_view name) {
  if (name == "planar-rooms") return SceneLayout::kPlanarRooms;
  if (name == "checkerboard") return SceneLayout::kCheckerboard;
  if (name == "blobs") return SceneLayout::kBlobs;
  throw InputError("unknown layout '" + std::string(name) + "'");
}

std::string to_string(SceneLayout layout) {
  switch (layout) {
    case SceneLayout::kPlanarRooms:
      return "planar-rooms";
    case SceneLayout::kCheckerboard:
      return "checkerboard";
    case SceneLayout::kBlobs:
      return "blobs";
  }
  throw InputError("unknown layout");
}

void SynthConfig::validate() const {
  if (num_classes < 1) throw InputError("num_classes must be positive");
  if (num_points < num_classes) throw InputError("num_points must be >= num_classes");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw InputError("jitter must be >= 0");
  if (!(extent > 0.0) || !std::isfinite(extent)) throw InputError("degenerate scene extent");
}

namespace {

// Axis-aligned rectangle in 3D: origin plus two spanning edge vectors.
struct Patch {
  Vec3 origin;
  Vec3 u;
  Vec3 v;
  Label label;
  double area() const { return u.norm() * v.norm(); }
};

struct Box {
  double x0, y0, x1, y1, height;
  bool contains_xy(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
};

void add_box_patches(const Box& b, Label label, std::vector<Patch>& out) {
  const double h = b.height;
  const double w = b.x1 - b.x0;
  const double d = b.y1 - b.y0;
  out.push_back({{b.x0, b.y0, h}, {w, 0, 0}, {0, d, 0}, label});
  out.push_back({{b.x0, b.y0, 0}, {w, 0, 0}, {0, 0, h}, label});
  out.push_back({{b.x0, b.y1, 0}, {w, 0, 0}, {0, 0, h}, label});
  out.push_back({{b.x0, b.y0, 0}, {0, d, 0}, {0, 0, h}, label});
  out.push_back({{b.x1, b.y0, 0}, {0, d, 0}, {0, 0, h}, label});
}

PointCloud planar_rooms(const SynthConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double e = c.extent;
  const double wall_h = 0.25 * e;
  const Label wall_label = c.num_classes >= 2 ? 1 : 0;
  const int furniture_kinds = std::max(0, c.num_classes - 2);

  // Interior wall across x with a doorway, plus two perimeter walls.
  const double split = e * (0.35 + 0.3 * unit(rng));
  const double door_lo = e * (0.2 + 0.4 * unit(rng));
  const double door_hi = door_lo + 0.2 * e;
  std::vector<Patch> patches;
  patches.push_back({{0, 0, 0}, {e, 0, 0}, {0, 0, wall_h}, wall_label});
  patches.push_back({{0, 0, 0}, {0, e, 0}, {0, 0, wall_h}, wall_label});
  patches.push_back({{split, 0, 0}, {0, door_lo, 0}, {0, 0, wall_h}, wall_label});
  patches.push_back({{split, door_hi, 0}, {0, e - door_hi, 0}, {0, 0, wall_h}, wall_label});

  // One box per furniture kind in each room; heights grow with the class id.
  std::vector<Box> boxes;
  const double margin = 0.06 * e;
  for (int room = 0; room < 2; ++room) {
    const double rx0 = room == 0 ? 0.0 : split;
    const double rx1 = room == 0 ? split : e;
    for (int k = 0; k < furniture_kinds; ++k) {
      const double height = e * (0.08 + 0.1 * k);
      for (int attempt = 0; attempt < 50; ++attempt) {
        const double w = e * (0.12 + 0.12 * unit(rng));
        const double d = e * (0.12 + 0.12 * unit(rng));
        const double span_x = rx1 - rx0 - 2 * margin - w;
        const double span_y = e - 2 * margin - d;
        if (span_x <= 0 || span_y <= 0) break;
        Box b{rx0 + margin + span_x * unit(rng), margin + span_y * unit(rng), 0, 0, height};
        b.x1 = b.x0 + w;
        b.y1 = b.y0 + d;
        bool overlaps = std::any_of(boxes.begin(), boxes.end(), [&](const Box& o) {
          return b.x0 < o.x1 + margin && o.x0 < b.x1 + margin && b.y0 < o.y1 + margin &&
                 o.y0 < b.y1 + margin;
        });
        if (overlaps) continue;
        boxes.push_back(b);
        add_box_patches(b, static_cast<Label>(2 + k), patches);
        break;
      }
    }
  }

  std::vector<double> areas;
  areas.push_back(e * e);  // floor, minus box footprints by rejection
  for (const auto& p : patches) areas.push_back(p.area());
  std::discrete_distribution<int> pick(areas.begin(), areas.end());

  PointCloud cloud;
  cloud.num_classes = c.num_classes;
  while (cloud.size() < static_cast<std::size_t>(c.num_points)) {
    const int which = pick(rng);
    const double a = unit(rng);
    const double b = unit(rng);
    if (which == 0) {
      const double x = a * e;
      const double y = b * e;
      if (std::any_of(boxes.begin(), boxes.end(), [&](const Box& bx) { return bx.contains_xy(x, y); }))
        continue;
      cloud.positions.emplace_back(x, y, 0.0);
      cloud.gt_labels.push_back(0);
    } else {
      const Patch& p = patches[static_cast<std::size_t>(which - 1)];
      cloud.positions.push_back(p.origin + a * p.u + b * p.v);
      cloud.gt_labels.push_back(p.label);
    }
  }
  return cloud;
}

PointCloud checkerboard(const SynthConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cell = c.extent / 4.0;
  PointCloud cloud;
  cloud.num_classes = c.num_classes;
  for (int i = 0; i < c.num_points; ++i) {
    const double x = unit(rng) * c.extent;
    const double y = unit(rng) * c.extent;
    const auto ix = static_cast<int>(std::floor(x / cell));
    const auto iy = static_cast<int>(std::floor(y / cell));
    cloud.positions.emplace_back(x, y, 0.0);
    cloud.gt_labels.push_back(static_cast<Label>((ix + iy) % c.num_classes));
  }
  return cloud;
}

PointCloud blobs(const SynthConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, c.extent / 8.0);
  std::vector<Vec3> centers;
  for (int k = 0; k < c.num_classes; ++k) {
    centers.emplace_back(c.extent * (0.2 + 0.6 * unit(rng)), c.extent * (0.2 + 0.6 * unit(rng)),
                         c.extent * (0.2 + 0.6 * unit(rng)));
  }
  PointCloud cloud;
  cloud.num_classes = c.num_classes;
  for (int i = 0; i < c.num_points; ++i) {
    const int k = i % c.num_classes;
    cloud.positions.push_back(centers[static_cast<std::size_t>(k)] + Vec3(gauss(rng), gauss(rng), gauss(rng)));
    cloud.gt_labels.push_back(static_cast<Label>(k));
  }
  return cloud;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

PointCloud generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  PointCloud cloud;
  switch (config.layout) {
    case SceneLayout::kPlanarRooms:
      cloud = planar_rooms(config, rng);
      break;
    case SceneLayout::kCheckerboard:
      cloud = checkerboard(config, rng);
      break;
    case SceneLayout::kBlobs:
      cloud = blobs(config, rng);
      break;
  }
  // Separate stream so the same seed yields the same base geometry for any jitter.
  std::mt19937_64 noise(splitmix64(config.seed ^ 0x6a09e667f3bcc909ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& p : cloud.positions) {
    Vec3 d(gauss(noise), gauss(noise), gauss(noise));
    p += config.jitter * d;
  }
  cloud.validate();
  return cloud;
}

std::pair<std::vector<PointCloud>, std::vector<PointCloud>> generate_split(
    const SynthConfig& config, int n_train, int n_test) {
  if (n_train < 0 || n_test < 0) throw InputError("split sizes must be >= 0");
  std::pair<std::vector<PointCloud>, std::vector<PointCloud>> out;
  SynthConfig c = config;
  for (int i = 0; i < n_train; ++i) {
    c.seed = splitmix64(config.seed * 2 + splitmix64(2 * static_cast<std::uint64_t>(i)));
    out.first.push_back(generate(c));
  }
  for (int i = 0; i < n_test; ++i) {
    c.seed = splitmix64(config.seed * 2 + splitmix64(2 * static_cast<std::uint64_t>(i) + 1));
    out.second.push_back(generate(c));
  }
  return out;
}

}  // namespace cblseg
