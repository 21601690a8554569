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

#include "cblseg/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace cblseg {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'B', 'L', '1'};
constexpr std::uint64_t kMaxDim = 1u << 24;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(b.data(), 8);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(b.data(), 4);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw InputError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw InputError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void save_checkpoint(std::ostream& out, const SegNet& net) {
  const NetConfig& c = net.config();
  out.write(kMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(c.num_classes));
  put_u32(out, static_cast<std::uint32_t>(c.input_dim));
  put_u32(out, static_cast<std::uint32_t>(c.widths.size()));
  for (int w : c.widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, static_cast<std::uint32_t>(c.kernel_hidden));
  put_u32(out, c.multi_scale_head ? 1u : 0u);
  put_u32(out, static_cast<std::uint32_t>(c.cbl_stages.size()));
  for (int s : c.cbl_stages) put_u32(out, static_cast<std::uint32_t>(s));
  put_u64(out, c.seed);
  put_f64(out, c.base_cell);
  put_f64(out, c.base_radius);

  auto params = net.parameters();
  put_u64(out, params.size());
  for (const Matrix* m : params) {
    put_u64(out, static_cast<std::uint64_t>(m->rows()));
    put_u64(out, static_cast<std::uint64_t>(m->cols()));
    for (Eigen::Index i = 0; i < m->size(); ++i) put_f64(out, m->data()[i]);
  }
  if (!out) throw RuntimeFailure("failed writing checkpoint");
}

void save_checkpoint_file(const std::string& path, const SegNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  save_checkpoint(out, net);
}

SegNet load_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw InputError("bad checkpoint magic");
  NetConfig c;
  c.num_classes = static_cast<int>(get_u32(in));
  c.input_dim = static_cast<int>(get_u32(in));
  const std::uint32_t stages = get_u32(in);
  if (stages == 0 || stages > 16) throw InputError("checkpoint stage count out of range");
  c.widths.clear();
  for (std::uint32_t k = 0; k < stages; ++k) c.widths.push_back(static_cast<int>(get_u32(in)));
  c.kernel_hidden = static_cast<int>(get_u32(in));
  c.multi_scale_head = get_u32(in) != 0;
  const std::uint32_t cbl = get_u32(in);
  if (cbl > stages) throw InputError("checkpoint cbl stage list too long");
  c.cbl_stages.clear();
  for (std::uint32_t k = 0; k < cbl; ++k) c.cbl_stages.push_back(static_cast<int>(get_u32(in)));
  c.seed = get_u64(in);
  c.base_cell = get_f64(in);
  c.base_radius = get_f64(in);
  c.validate();

  SegNet net(c);
  auto params = net.parameters();
  if (get_u64(in) != params.size()) throw InputError("checkpoint tensor count mismatch");
  for (Matrix* m : params) {
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    if (rows > kMaxDim || cols > kMaxDim || rows != static_cast<std::uint64_t>(m->rows()) ||
        cols != static_cast<std::uint64_t>(m->cols()))
      throw InputError("checkpoint tensor shape mismatch");
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = get_f64(in);
  }
  return net;
}

SegNet load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace cblseg
