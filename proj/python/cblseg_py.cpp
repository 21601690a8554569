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

// Python bindings for the cblseg core.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cblseg/boundary_metrics.hpp"
#include "cblseg/cbl_loss.hpp"
#include "cblseg/checkpoint.hpp"
#include "cblseg/gradcheck.hpp"
#include "cblseg/hierarchy.hpp"
#include "cblseg/neighborhood_index.hpp"
#include "cblseg/point_cloud.hpp"
#include "cblseg/scene_synth.hpp"
#include "cblseg/subscene_mining.hpp"
#include "cblseg/trainer.hpp"

namespace py = pybind11;
using namespace cblseg;

namespace {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const Positions& p) {
  std::vector<Vec3> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) out[static_cast<std::size_t>(i)] = p.row(i).transpose();
  return out;
}

Positions from_points(const std::vector<Vec3>& pts) {
  Positions p(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return p;
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

PointCloud make_cloud(const Positions& positions, std::vector<Label> gt,
                      std::optional<std::vector<Label>> pred, int num_classes) {
  PointCloud c;
  c.positions = to_points(positions);
  c.gt_labels = std::move(gt);
  c.pred_labels = std::move(pred);
  if (num_classes <= 0) {
    Label top = 0;
    for (Label l : c.gt_labels) top = std::max(top, l);
    if (c.pred_labels)
      for (Label l : *c.pred_labels) top = std::max(top, l);
    num_classes = top + 1;
  }
  c.num_classes = num_classes;
  c.validate();
  return c;
}

py::dict epoch_dict(const EpochLog& e) {
  py::dict d;
  d["epoch"] = e.epoch;
  d["ce"] = e.ce;
  d["cbl_total"] = e.cbl_total;
  d["total"] = e.total;
  d["lr"] = e.lr;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Boundary-aware point cloud segmentation metrics and contrastive boundary learning";
  m.attr("__version__") = kVersion;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init(&make_cloud), py::arg("positions"), py::arg("gt_labels"),
           py::arg("pred_labels") = std::nullopt, py::arg("num_classes") = 0)
      .def_property_readonly("positions", [](const PointCloud& c) { return from_points(c.positions); })
      .def_readonly("gt_labels", &PointCloud::gt_labels)
      .def_readwrite("pred_labels", &PointCloud::pred_labels)
      .def_readonly("num_classes", &PointCloud::num_classes)
      .def("__len__", &PointCloud::size)
      .def("__repr__", [](const PointCloud& c) {
        return "<PointCloud points=" + std::to_string(c.size()) +
               " classes=" + std::to_string(c.num_classes) + ">";
      });

  m.def("read_cloud", &read_cloud_file, py::arg("path"));
  m.def("write_cloud", &write_cloud_file, py::arg("path"), py::arg("cloud"));

  py::class_<NeighborhoodIndex>(m, "NeighborhoodIndex")
      .def(py::init([](const Positions& p) { return build_index(to_points(p)); }), py::arg("positions"))
      .def("radius_query", &NeighborhoodIndex::radius_query, py::arg("i"), py::arg("radius"))
      .def("nearest", [](const NeighborhoodIndex& ix, const Vec3& p) { return ix.nearest(p); },
           py::arg("point"))
      .def("__len__", &NeighborhoodIndex::size);

  m.def(
      "extract_boundary",
      [](const Positions& p, const std::vector<Label>& labels, double radius) {
        return extract_boundary(labels, build_index(to_points(p)), radius).indices;
      },
      py::arg("positions"), py::arg("labels"), py::arg("radius") = kDefaultBoundaryRadius,
      "Indices of points with a differently labeled neighbor within radius.");

  m.def(
      "metrics", [](const PointCloud& c, double radius) { return to_python(to_json(full_report(c, radius))); },
      py::arg("cloud"), py::arg("radius") = kDefaultBoundaryRadius,
      "Boundary-aware metric report of a cloud carrying predictions, as a dict.");

  py::class_<SamplingHierarchy>(m, "SamplingHierarchy")
      .def_property_readonly("num_stages", &SamplingHierarchy::num_stages)
      .def_readonly("num_classes", &SamplingHierarchy::num_classes)
      .def("positions", [](const SamplingHierarchy& h, std::size_t n) { return from_points(h.stage(n).positions); })
      .def("label_dists", [](const SamplingHierarchy& h, std::size_t n) { return h.stage(n).label_dists; })
      .def("pooling_map", [](const SamplingHierarchy& h, std::size_t n) { return h.stage(n).pooling_map; })
      .def("weights", [](const SamplingHierarchy& h, std::size_t n) { return h.stage(n).weights; })
      .def("radius", [](const SamplingHierarchy& h, std::size_t n) { return h.stage(n).radius; })
      .def("argmax_labels", &stage_labels_argmax, py::arg("stage"));

  m.def("build_hierarchy", &build_hierarchy, py::arg("cloud"), py::arg("base_cell"),
        py::arg("base_radius") = kDefaultBoundaryRadius, py::arg("num_stages") = 3);

  m.def(
      "mine_stage_boundaries",
      [](const SamplingHierarchy& h, std::size_t stage, const std::string& variant, double kl_threshold) {
        MiningConfig cfg;
        cfg.variant = parse_mining_variant(variant);
        cfg.kl_threshold = kl_threshold;
        return mine_stage_boundaries(h, stage, cfg).indices;
      },
      py::arg("hierarchy"), py::arg("stage"), py::arg("variant") = "argmax",
      py::arg("kl_threshold") = 0.5);

  m.def(
      "soft_vs_hard_divergence",
      [](const SamplingHierarchy& h) {
        std::vector<std::pair<int, int>> out;
        for (const auto& s : soft_vs_hard_divergence(h)) out.emplace_back(s.stage, s.disagreements);
        return out;
      },
      py::arg("hierarchy"), "List of (stage, disagreements) for stages >= 1.");

  m.def(
      "cbl_loss",
      [](const Positions& p, const std::vector<Label>& labels, const Matrix& features, double radius,
         double temperature) {
        auto index = build_index(to_points(p));
        auto nb = radius_neighborhoods(index, radius);
        auto boundary = extract_boundary(labels, nb);
        CblConfig cfg;
        cfg.temperature = temperature;
        cfg.validate();
        auto r = cbl_loss_and_grad(features, boundary, labels, nb, cfg);
        return py::make_tuple(r.value, r.grad);
      },
      py::arg("positions"), py::arg("labels"), py::arg("features"),
      py::arg("radius") = kDefaultBoundaryRadius, py::arg("temperature") = 1.0,
      "Contrastive boundary loss and its gradient with respect to the features.");

  m.def(
      "gradcheck_cbl",
      [](int instances, std::uint64_t seed, double temperature) {
        CblConfig cfg;
        cfg.temperature = temperature;
        auto r = gradcheck_cbl(instances, seed, cfg);
        return py::make_tuple(r.instances, r.max_rel_err);
      },
      py::arg("instances") = 20, py::arg("seed") = 0, py::arg("temperature") = 1.0);

  m.def(
      "generate_scene",
      [](std::uint64_t seed, int num_points, int num_classes, const std::string& layout, double jitter,
         double extent) {
        SynthConfig s;
        s.seed = seed;
        s.num_points = num_points;
        s.num_classes = num_classes;
        s.layout = parse_layout(layout);
        s.jitter = jitter;
        s.extent = extent;
        return generate(s);
      },
      py::arg("seed") = 0, py::arg("num_points") = 2000, py::arg("num_classes") = 4,
      py::arg("layout") = "planar-rooms", py::arg("jitter") = 0.0, py::arg("extent") = 2.0);

  m.def(
      "generate_split",
      [](std::uint64_t seed, int n_train, int n_test, int num_points, int num_classes,
         const std::string& layout) {
        SynthConfig s;
        s.seed = seed;
        s.num_points = num_points;
        s.num_classes = num_classes;
        s.layout = parse_layout(layout);
        return generate_split(s, n_train, n_test);
      },
      py::arg("seed"), py::arg("n_train"), py::arg("n_test"), py::arg("num_points") = 2000,
      py::arg("num_classes") = 4, py::arg("layout") = "planar-rooms");

  py::class_<SegNet>(m, "SegNet")
      .def(py::init([](int num_classes, std::uint64_t seed, std::vector<int> cbl_stages, bool multi_scale_head) {
             NetConfig c;
             c.num_classes = num_classes;
             c.seed = seed;
             c.cbl_stages = std::move(cbl_stages);
             c.multi_scale_head = multi_scale_head;
             return SegNet(c);
           }),
           py::arg("num_classes"), py::arg("seed") = 0, py::arg("cbl_stages") = std::vector<int>{0, 1, 2},
           py::arg("multi_scale_head") = true)
      .def("predict",
           [](const SegNet& net, const PointCloud& c) { return predict(net, prepare_scene(c, net.config())); },
           py::arg("cloud"))
      .def("save", [](const SegNet& net, const std::string& path) { save_checkpoint_file(path, net); },
           py::arg("path"))
      .def_static("load", &load_checkpoint_file, py::arg("path"))
      .def("to_bytes",
           [](const SegNet& net) {
             std::ostringstream out;
             save_checkpoint(out, net);
             return py::bytes(out.str());
           })
      .def_property_readonly("num_classes", [](const SegNet& n) { return n.config().num_classes; });

  m.def(
      "train",
      [](SegNet& net, const std::vector<PointCloud>& scenes, int epochs, double lambda_, double temperature,
         const std::string& variant, double learning_rate) {
        TrainConfig t;
        t.epochs = epochs;
        t.cbl.lambda = lambda_;
        t.cbl.temperature = temperature;
        t.mining.variant = parse_mining_variant(variant);
        t.learning_rate = learning_rate;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(net, scenes, t);
        }
        py::list log;
        for (const auto& e : r.log) log.append(epoch_dict(e));
        return log;
      },
      py::arg("net"), py::arg("scenes"), py::arg("epochs") = 60, py::arg("lambda_") = 0.1,
      py::arg("temperature") = 1.0, py::arg("variant") = "argmax", py::arg("learning_rate") = 0.01,
      "Train in place; returns the per-epoch log as a list of dicts.");

  m.def(
      "evaluate",
      [](const SegNet& net, const std::vector<PointCloud>& scenes, double radius) {
        return to_python(to_json(evaluate(net, scenes, radius).aggregate));
      },
      py::arg("net"), py::arg("scenes"), py::arg("radius") = kDefaultBoundaryRadius);
}
