// src/gradcheck.cc

// Copyright 2026  The densenet-am authors

// See ../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "densenet/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace densenet {

double FiniteDiffCheck(const std::function<double(const Tensor<double>&)>& loss,
                       const Tensor<double>& point,
                       const Tensor<double>& analytic, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4))
    throw ConfigError("finite-difference step " + std::to_string(eps) +
                      " outside [1e-7, 1e-4]");
  if (analytic.shape() != point.shape())
    throw ShapeError("analytic gradient " + ShapeString(analytic.shape()) +
                     " does not match point " + ShapeString(point.shape()));
  RequireFinite(point, "gradient-check point");
  RequireFinite(analytic, "analytic gradient");
  Tensor<double> probe = point;
  double worst = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = loss(probe);
    probe[i] = saved - eps;
    const double down = loss(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("non-finite loss while perturbing element " +
                         std::to_string(i));
    const double numeric = (up - down) / (2 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

double Dot(const Tensor<double>& a, const Tensor<double>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("dot of " + ShapeString(a.shape()) + " and " +
                     ShapeString(b.shape()));
  // Extended accumulator: a perturbation moves only a few terms, and double
  // rounding of the whole sum would otherwise swamp small gradient entries.
  long double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    sum += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(sum);
}

}  // namespace densenet
