// include/densenet/kernels.h

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

#ifndef DENSENET_KERNELS_H_
#define DENSENET_KERNELS_H_

// Raw numeric kernels behind the layer primitives. Every kernel exists twice
// with identical signatures:
//
//   kernels::serial    plain nested loops, kept as the reference for tests
//                      and as the baseline in the benchmark.
//   kernels::parallel  OpenMP data-parallel version used by the layers.
//
// Parallel kernels partition work by output element (or output plane), and
// each output is accumulated by exactly one thread in a fixed order, so
// results do not depend on the thread count.

#include <span>

namespace densenet::kernels {

struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_h = 1;
  int in_w = 1;
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int pad = 0;

  int out_h() const { return (in_h + 2 * pad - kernel_h) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel_w) / stride + 1; }
};

/// Per-channel view of an N x C x S activation (S = H*W).
struct ChannelGeometry {
  int batch = 1;
  int channels = 1;
  int spatial = 1;
};

struct PoolGeometry {
  int batch = 1;
  int channels = 1;
  int in_h = 2;
  int in_w = 2;

  int out_h() const { return in_h / 2; }
  int out_w() const { return in_w / 2; }
};

struct LinearGeometry {
  int batch = 1;
  int in_features = 1;
  int out_features = 1;
};

#define DENSENET_DECLARE_KERNELS                                              \
  template <typename T>                                                       \
  void Conv2dForward(const ConvGeometry& g, std::span<const T> x,             \
                     std::span<const T> w, std::span<T> y);                   \
  template <typename T>                                                       \
  void Conv2dBackwardData(const ConvGeometry& g, std::span<const T> dy,       \
                          std::span<const T> w, std::span<T> dx);             \
  template <typename T>                                                       \
  void Conv2dBackwardFilter(const ConvGeometry& g, std::span<const T> x,      \
                            std::span<const T> dy, std::span<T> dw);          \
  template <typename T>                                                       \
  void ChannelMoments(const ChannelGeometry& g, std::span<const T> x,         \
                      std::span<T> mean, std::span<T> var);                   \
  template <typename T>                                                       \
  void BatchNormApply(const ChannelGeometry& g, std::span<const T> x,         \
                      std::span<const T> mean, std::span<const T> inv_std,    \
                      std::span<const T> gamma, std::span<const T> beta,      \
                      std::span<T> xhat, std::span<T> y);                     \
  template <typename T>                                                       \
  void BatchNormBackward(const ChannelGeometry& g, std::span<const T> dy,     \
                         std::span<const T> xhat, std::span<const T> inv_std, \
                         std::span<const T> gamma, bool batch_statistics,     \
                         std::span<T> dx, std::span<T> dgamma,                \
                         std::span<T> dbeta);                                 \
  template <typename T>                                                       \
  void AvgPool2x2Forward(const PoolGeometry& g, std::span<const T> x,         \
                         std::span<T> y);                                     \
  template <typename T>                                                       \
  void AvgPool2x2Backward(const PoolGeometry& g, std::span<const T> dy,       \
                          std::span<T> dx);                                   \
  template <typename T>                                                       \
  void LinearForward(const LinearGeometry& g, std::span<const T> x,           \
                     std::span<const T> w, std::span<const T> b,              \
                     std::span<T> y);                                         \
  template <typename T>                                                       \
  void LinearBackward(const LinearGeometry& g, std::span<const T> x,          \
                      std::span<const T> w, std::span<const T> dy,            \
                      std::span<T> dx, std::span<T> dw, std::span<T> db);

// Shapes: x is N x Cin x H x W, w is Cout x Cin x kh x kw, y is
// N x Cout x OH x OW. Backward kernels overwrite (not accumulate) their output.
// BatchNormBackward with batch_statistics=false treats mean/inv_std as
// constants (inference-mode normalization).
// Linear: x is N x In, w is Out x In, b is Out, y is N x Out.
namespace serial {
DENSENET_DECLARE_KERNELS
}  // namespace serial

namespace parallel {
DENSENET_DECLARE_KERNELS
int MaxThreads();
}  // namespace parallel

#undef DENSENET_DECLARE_KERNELS

}  // namespace densenet::kernels

#endif  // DENSENET_KERNELS_H_
