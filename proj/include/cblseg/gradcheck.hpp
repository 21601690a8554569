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
#include <functional>

#include "cblseg/cbl_loss.hpp"
#include "cblseg/common.hpp"

namespace cblseg {

inline constexpr double kCblGradTolerance = 1e-5;
inline constexpr double kNetworkGradTolerance = 1e-4;
inline constexpr double kFiniteDifferenceStep = 1e-5;
/// Components smaller than this are compared on an absolute scale.
inline constexpr double kGradMagnitudeFloor = 1e-4;

struct GradcheckReport {
  int instances = 0;
  double max_rel_err = 0.0;
};

/// |a - b| / max(|a|, |b|, kGradMagnitudeFloor)
double gradient_rel_err(double analytic, double numeric);

/// Largest relative error between `analytic` and central differences of
/// `loss` around `x` (x is restored afterwards).
double max_fd_error(Matrix& x, const Matrix& analytic, const std::function<double()>& loss,
                    double step = kFiniteDifferenceStep);

/// Random CBL instances (N <= 64 points, C <= 16 channels).
GradcheckReport gradcheck_cbl(int instances, std::uint64_t seed, const CblConfig& config);

/// Every parameter of a small network on a 30-point scene, loss CE + lambda * sum CBL.
GradcheckReport gradcheck_network(std::uint64_t seed, const CblConfig& config);

}  // namespace cblseg
