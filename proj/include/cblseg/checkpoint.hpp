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

#include <iosfwd>
#include <string>

#include "cblseg/seg_net.hpp"

namespace cblseg {

/// Binary little-endian checkpoint: "CBL1", a config block, then every
/// parameter tensor (rows, cols, float64 data) in declaration order.
void save_checkpoint(std::ostream& out, const SegNet& net);
void save_checkpoint_file(const std::string& path, const SegNet& net);

/// Throws InputError on a bad magic number, truncated data or a tensor whose
/// shape does not match the stored config.
SegNet load_checkpoint(std::istream& in);
SegNet load_checkpoint_file(const std::string& path);

}  // namespace cblseg
