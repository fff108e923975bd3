// include/densenet/layers.h

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

#ifndef DENSENET_LAYERS_H_
#define DENSENET_LAYERS_H_

// Forward and backward passes for every primitive the network uses.
// Activations are N x C x H x W. Backward functions return fresh gradient
// tensors; the caller accumulates where a value fans out.

#include <span>
#include <vector>

#include "densenet/tensor.h"

namespace densenet {

enum class Mode { kTrain, kInfer };

// ---- concatenation along channels ----------------------------------------

template <typename T>
Tensor<T> ConcatChannels(std::span<const Tensor<T>* const> inputs);

/// Inverse of ConcatChannels for gradients: cuts `grad` into pieces with the
/// given channel counts, in order.
template <typename T>
std::vector<Tensor<T>> SplitChannels(const Tensor<T>& grad,
                                     std::span<const int> channels);

// ---- convolution ------------------------------------------------------------

struct Conv2dSpec {
  int stride = 1;
  int pad = 0;
};

/// Kernel is out_channels x in_channels x kh x kw; any size that fits the
/// padded input is accepted.
/// There is no bias; a batchnorm always follows.
Shape Conv2dOutputShape(const Shape& input, const Shape& kernel,
                        Conv2dSpec spec);

template <typename T>
Tensor<T> Conv2d(const Tensor<T>& x, const Tensor<T>& kernel, Conv2dSpec spec);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> kernel;
};

template <typename T>
Conv2dGrads<T> Conv2dBackward(const Tensor<T>& x, const Tensor<T>& kernel,
                              const Tensor<T>& dy, Conv2dSpec spec);

// ---- batch normalization ---------------------------------------------------

struct BatchNormOptions {
  double epsilon = 1e-5;
  /// running = momentum * running + (1 - momentum) * batch
  double momentum = 0.9;
};

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

  /// gamma = 1, beta = 0, running mean 0, running variance 1.
  static BatchNormParams Identity(int channels);
  int channels() const { return gamma.dim(0); }
};

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
  bool batch_statistics = false;
};

/// Train mode normalizes with batch statistics over N, H, W and updates the
/// running statistics in `params`; infer mode reads them only.
template <typename T>
Tensor<T> BatchNorm(const Tensor<T>& x, BatchNormParams<T>& params, Mode mode,
                    const BatchNormOptions& options,
                    BatchNormCache<T>* cache = nullptr);

/// Infer-mode overload; never touches `params`.
template <typename T>
Tensor<T> BatchNorm(const Tensor<T>& x, const BatchNormParams<T>& params,
                    const BatchNormOptions& options,
                    BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> BatchNormBackward(const Tensor<T>& dy,
                                    const BatchNormParams<T>& params,
                                    const BatchNormCache<T>& cache);

// ---- activations and pooling -------------------------------------------------

template <typename T>
Tensor<T> Relu(const Tensor<T>& x);

/// Gradient passes only where x > 0; the subgradient at exactly 0 is 0.
template <typename T>
Tensor<T> ReluBackward(const Tensor<T>& x, const Tensor<T>& dy);

/// 2x2 window, stride 2, floor semantics on odd extents.
template <typename T>
Tensor<T> AvgPool2x2(const Tensor<T>& x);

template <typename T>
Tensor<T> AvgPool2x2Backward(const Shape& input_shape, const Tensor<T>& dy);

/// N x C x H x W -> N x C x 1 x 1.
template <typename T>
Tensor<T> GlobalAvgPool(const Tensor<T>& x);

template <typename T>
Tensor<T> GlobalAvgPoolBackward(const Shape& input_shape, const Tensor<T>& dy);

// ---- classifier ----------------------------------------------------------------

/// x is treated as N x (product of remaining extents); weight is
/// out x in, bias is out. Output is N x out.
template <typename T>
Tensor<T> Linear(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias);

template <typename T>
struct LinearGrads {
  Tensor<T> input;  // same shape as the forward input
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
LinearGrads<T> LinearBackward(const Tensor<T>& x, const Tensor<T>& weight,
                              const Tensor<T>& dy);

template <typename T>
struct SoftmaxLoss {
  double loss = 0;      // mean over the batch of -log p(label)
  Tensor<T> grad;       // (softmax - onehot) / batch
  Tensor<T> probabilities;
};

template <typename T>
SoftmaxLoss<T> SoftmaxCrossEntropy(const Tensor<T>& logits,
                                   std::span<const int> labels);

/// Row-wise softmax of an N x C tensor, max-subtracted.
template <typename T>
Tensor<T> Softmax(const Tensor<T>& logits);

}  // namespace densenet

#endif  // DENSENET_LAYERS_H_
