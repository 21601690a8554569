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

#include "cblseg/point_cloud.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cblseg {

void PointCloud::validate() const {
  if (num_classes <= 0) throw InputError("num_classes must be positive");
  if (gt_labels.size() != positions.size())
    throw InputError("gt_labels length does not match positions");
  if (pred_labels && pred_labels->size() != positions.size())
    throw InputError("pred_labels length does not match positions");
  for (const auto& p : positions) {
    if (!p.allFinite()) throw InputError("non-finite coordinate");
  }
  auto check = [this](const std::vector<Label>& labels, const char* what) {
    for (Label l : labels) {
      if (l < 0 || l >= num_classes)
        throw InputError(std::string(what) + " label " + std::to_string(l) +
                         " outside [0, " + std::to_string(num_classes) + ")");
    }
  };
  check(gt_labels, "gt");
  if (pred_labels) check(*pred_labels, "pred");
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw InputError("line " + std::to_string(line) + ": " + msg);
}

Label parse_label(const std::string& tok, std::size_t line) {
  Label v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0)
    fail(line, "bad label '" + tok + "'");
  return v;
}

double parse_coord(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) fail(line, "bad coordinate '" + tok + "'");
    if (!std::isfinite(v)) fail(line, "non-finite coordinate");
    return v;
  } catch (const std::logic_error&) {
    fail(line, "bad coordinate '" + tok + "'");
  }
}

}  // namespace

PointCloud read_cloud(std::istream& in) {
  PointCloud cloud;
  std::vector<Label> preds;
  int declared_classes = 0;
  std::optional<bool> with_pred;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    if (toks[0].front() == '#') {
      // "# classes K" (also accepts "#classes K")
      std::string head = toks[0] == "#" && toks.size() > 1 ? toks[1] : toks[0].substr(1);
      std::size_t at = toks[0] == "#" ? 2 : 1;
      if (head == "classes") {
        if (toks.size() != at + 1) fail(lineno, "malformed classes header");
        declared_classes = parse_label(toks[at], lineno);
        if (declared_classes <= 0) fail(lineno, "classes must be positive");
      }
      continue;
    }
    if (toks.size() != 4 && toks.size() != 5)
      fail(lineno, "expected 'x y z gt [pred]', got " + std::to_string(toks.size()) + " fields");
    bool has_pred = toks.size() == 5;
    if (with_pred && *with_pred != has_pred) fail(lineno, "inconsistent pred column");
    with_pred = has_pred;
    cloud.positions.emplace_back(parse_coord(toks[0], lineno), parse_coord(toks[1], lineno),
                                 parse_coord(toks[2], lineno));
    cloud.gt_labels.push_back(parse_label(toks[3], lineno));
    if (has_pred) preds.push_back(parse_label(toks[4], lineno));
    if (declared_classes > 0) {
      const Label top = has_pred ? std::max(cloud.gt_labels.back(), preds.back()) : cloud.gt_labels.back();
      if (top >= declared_classes)
        fail(lineno, "label " + std::to_string(top) + " >= declared classes " + std::to_string(declared_classes));
    }
  }
  if (cloud.positions.empty()) throw InputError("cloud has no points");
  if (with_pred.value_or(false)) cloud.pred_labels = std::move(preds);

  Label max_label = *std::max_element(cloud.gt_labels.begin(), cloud.gt_labels.end());
  if (cloud.pred_labels) {
    max_label = std::max(max_label,
                         *std::max_element(cloud.pred_labels->begin(), cloud.pred_labels->end()));
  }
  cloud.num_classes = declared_classes > 0 ? declared_classes : max_label + 1;
  cloud.validate();
  return cloud;
}

PointCloud read_cloud_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return read_cloud(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_cloud(std::ostream& out, const PointCloud& cloud) {
  cloud.validate();
  out << "# classes " << cloud.num_classes << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << cloud.gt_labels[i];
    if (cloud.pred_labels) out << ' ' << (*cloud.pred_labels)[i];
    out << '\n';
  }
}

void write_cloud_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_cloud(out, cloud);
}

Matrix one_hot(std::span<const Label> labels, int num_classes) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return m;
}

}  // namespace cblseg
