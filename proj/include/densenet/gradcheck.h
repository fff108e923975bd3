// include/densenet/gradcheck.h

// Copyright 2026  The densenet-am authors

// See ../../COPYING for clarification regarding multiple authors
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

#ifndef DENSENET_GRADCHECK_H_
#define DENSENET_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "densenet/architecture.h"

#include "densenet/tensor.h"

namespace densenet {

/// Compares `analytic` against central differences of the scalar `loss`
/// around `point`:
///
///   numeric_i = (loss(x + eps e_i) - loss(x - eps e_i)) / (2 eps)
///   error_i   = |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1e-8)
///
/// and returns max_i error_i. Runs in double precision only; eps must lie in
/// [1e-7, 1e-4]. Throws NumericError on any non-finite value.
double FiniteDiffCheck(const std::function<double(const Tensor<double>&)>& loss,
                       const Tensor<double>& point,
                       const Tensor<double>& analytic, double eps);

/// Dot product <a, b>, used to turn a layer output into a scalar loss with a
/// fixed random upstream gradient.
double Dot(const Tensor<double>& a, const Tensor<double>& b);

struct GradcheckResult {
  std::string name;
  double max_error = 0;  // worst relative error over all instances
  int instances = 0;
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Default step. Rounding in the loss grows like 1/eps and truncation like
/// eps^2; 1e-5 keeps both near 1e-11 for these layers.
inline constexpr double kGradcheckStep = 1e-5;

/// Checks every layer primitive on `instances` random problems: convolution
/// 3x3 and 1x1, train-mode batchnorm, ReLU (inputs kept away from the kink),
/// 2x2 average pooling, global average pooling, linear and softmax
/// cross-entropy. Each layer output is reduced to a scalar with a fixed random
/// upstream gradient.
std::vector<GradcheckResult> RunLayerGradchecks(int instances, std::uint64_t seed,
                                                double eps = kGradcheckStep);

/// Whole-network check in double precision: every parameter tensor and the
/// input, grouped per stage ("conv", "block1", "transition1", ...,
/// "classifier", "input"). Meant for small configurations.
std::vector<GradcheckResult> RunModelGradcheck(const DenseNetConfig& config,
                                               int batch, std::uint64_t seed,
                                               double eps = kGradcheckStep);

}  // namespace densenet

#endif  // DENSENET_GRADCHECK_H_
