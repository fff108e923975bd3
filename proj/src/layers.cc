// src/layers.cc

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

#include "densenet/layers.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "densenet/kernels.h"

namespace densenet {

namespace {

void RequireRank4(const Shape& s, const char* what) {
  if (s.size() != 4)
    throw ShapeError(std::string(what) + " expects an N x C x H x W tensor, got " +
                     ShapeString(s));
}

}  // namespace

template <typename T>
Tensor<T> ConcatChannels(std::span<const Tensor<T>* const> inputs) {
  if (inputs.empty()) throw ShapeError("concat of an empty input list");
  const Shape& first = inputs[0]->shape();
  RequireRank4(first, "concat");
  int channels = 0;
  for (const Tensor<T>* t : inputs) {
    const Shape& s = t->shape();
    RequireRank4(s, "concat");
    if (s[0] != first[0] || s[2] != first[2] || s[3] != first[3])
      throw ShapeError("concat extent mismatch: " + ShapeString(first) +
                       " vs " + ShapeString(s));
    channels += s[1];
  }
  Tensor<T> out({first[0], channels, first[2], first[3]});
  const std::size_t plane = static_cast<std::size_t>(first[2]) * first[3];
  T* dst = out.data().data();
  for (int n = 0; n < first[0]; ++n)
    for (const Tensor<T>* t : inputs) {
      const std::size_t chunk = plane * t->dim(1);
      const T* src = t->data().data() + chunk * n;
      std::copy(src, src + chunk, dst);
      dst += chunk;
    }
  return out;
}

template <typename T>
std::vector<Tensor<T>> SplitChannels(const Tensor<T>& grad,
                                     std::span<const int> channels) {
  const Shape& s = grad.shape();
  RequireRank4(s, "split");
  int total = 0;
  for (int c : channels) total += c;
  if (total != s[1])
    throw ShapeError("split channel counts sum to " + std::to_string(total) +
                     " but tensor has " + std::to_string(s[1]));
  const std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
  std::vector<Tensor<T>> parts;
  parts.reserve(channels.size());
  for (int c : channels) parts.emplace_back(Shape{s[0], c, s[2], s[3]});
  const T* src = grad.data().data();
  for (int n = 0; n < s[0]; ++n)
    for (auto& part : parts) {
      const std::size_t chunk = plane * part.dim(1);
      std::copy(src, src + chunk, part.data().data() + chunk * n);
      src += chunk;
    }
  return parts;
}

Shape Conv2dOutputShape(const Shape& input, const Shape& kernel,
                        Conv2dSpec spec) {
  RequireRank4(input, "conv2d");
  if (kernel.size() != 4)
    throw ShapeError("conv2d kernel must be rank 4, got " + ShapeString(kernel));
  if (kernel[1] != input[1])
    throw ShapeError("conv2d channel mismatch: input has " +
                     std::to_string(input[1]) + " channels, kernel expects " +
                     std::to_string(kernel[1]));
  if (spec.stride < 1 || spec.pad < 0)
    throw ShapeError("conv2d stride must be >= 1 and pad >= 0");
  const int oh = (input[2] + 2 * spec.pad - kernel[2]);
  const int ow = (input[3] + 2 * spec.pad - kernel[3]);
  if (oh < 0 || ow < 0)
    throw ShapeError("conv2d kernel " + ShapeString(kernel) +
                     " larger than padded input " + ShapeString(input));
  return {input[0], kernel[0], oh / spec.stride + 1, ow / spec.stride + 1};
}

namespace {

kernels::ConvGeometry Geometry(const Shape& x, const Shape& k, Conv2dSpec spec) {
  kernels::ConvGeometry g;
  g.batch = x[0];
  g.in_channels = x[1];
  g.in_h = x[2];
  g.in_w = x[3];
  g.out_channels = k[0];
  g.kernel_h = k[2];
  g.kernel_w = k[3];
  g.stride = spec.stride;
  g.pad = spec.pad;
  return g;
}

}  // namespace

template <typename T>
Tensor<T> Conv2d(const Tensor<T>& x, const Tensor<T>& kernel, Conv2dSpec spec) {
  Tensor<T> y(Conv2dOutputShape(x.shape(), kernel.shape(), spec));
  kernels::parallel::Conv2dForward<T>(Geometry(x.shape(), kernel.shape(), spec),
                                      x.data(), kernel.data(), y.data());
  return y;
}

template <typename T>
Conv2dGrads<T> Conv2dBackward(const Tensor<T>& x, const Tensor<T>& kernel,
                              const Tensor<T>& dy, Conv2dSpec spec) {
  const Shape out = Conv2dOutputShape(x.shape(), kernel.shape(), spec);
  if (dy.shape() != out)
    throw ShapeError("conv2d upstream gradient " + ShapeString(dy.shape()) +
                     " does not match output " + ShapeString(out));
  const auto g = Geometry(x.shape(), kernel.shape(), spec);
  Conv2dGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(kernel.shape())};
  kernels::parallel::Conv2dBackwardData<T>(g, dy.data(), kernel.data(),
                                           grads.input.data());
  kernels::parallel::Conv2dBackwardFilter<T>(g, x.data(), dy.data(),
                                             grads.kernel.data());
  return grads;
}

template <typename T>
BatchNormParams<T> BatchNormParams<T>::Identity(int channels) {
  return {Tensor<T>({channels}, T(1)), Tensor<T>({channels}, T(0)),
          Tensor<T>({channels}, T(0)), Tensor<T>({channels}, T(1))};
}

namespace {

template <typename T>
kernels::ChannelGeometry ChannelView(const Tensor<T>& x,
                                     const BatchNormParams<T>& p) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("batchnorm expects at least N x C");
  if (p.gamma.size() != static_cast<std::size_t>(s[1]) ||
      p.beta.size() != p.gamma.size() ||
      p.running_mean.size() != p.gamma.size() ||
      p.running_var.size() != p.gamma.size())
    throw ShapeError("batchnorm parameters sized for " +
                     std::to_string(p.gamma.size()) + " channels, input has " +
                     std::to_string(s[1]));
  int spatial = 1;
  for (std::size_t i = 2; i < s.size(); ++i) spatial *= s[i];
  return {s[0], s[1], spatial};
}

template <typename T>
Tensor<T> Normalize(const Tensor<T>& x, const BatchNormParams<T>& params,
                    const kernels::ChannelGeometry& g,
                    std::span<const T> mean, std::vector<T> inv_std,
                    bool batch_statistics, BatchNormCache<T>* cache) {
  Tensor<T> xhat(x.shape());
  Tensor<T> y(x.shape());
  kernels::parallel::BatchNormApply<T>(g, x.data(), mean, inv_std,
                                       params.gamma.data(), params.beta.data(),
                                       xhat.data(), y.data());
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->batch_statistics = batch_statistics;
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> BatchNorm(const Tensor<T>& x, const BatchNormParams<T>& params,
                    const BatchNormOptions& options, BatchNormCache<T>* cache) {
  const auto g = ChannelView(x, params);
  std::vector<T> inv_std(g.channels);
  for (int c = 0; c < g.channels; ++c) {
    if (!(params.running_var[c] > 0))
      throw NumericError("batchnorm running variance must be positive");
    inv_std[c] = static_cast<T>(
        1.0 / std::sqrt(static_cast<double>(params.running_var[c]) +
                        options.epsilon));
  }
  return Normalize<T>(x, params, g, params.running_mean.data(),
                      std::move(inv_std), false, cache);
}

template <typename T>
Tensor<T> BatchNorm(const Tensor<T>& x, BatchNormParams<T>& params, Mode mode,
                    const BatchNormOptions& options, BatchNormCache<T>* cache) {
  if (mode == Mode::kInfer)
    return BatchNorm(x, std::as_const(params), options, cache);
  const auto g = ChannelView(x, params);
  if (static_cast<long>(g.batch) * g.spatial < 2)
    throw ShapeError("batchnorm train mode needs at least 2 values per channel, "
                     "got a degenerate batch of shape " +
                     ShapeString(x.shape()));
  std::vector<T> mean(g.channels), var(g.channels), inv_std(g.channels);
  kernels::parallel::ChannelMoments<T>(g, x.data(), mean, var);
  const T keep = static_cast<T>(options.momentum);
  const T take = static_cast<T>(1.0 - options.momentum);
  for (int c = 0; c < g.channels; ++c) {
    inv_std[c] = static_cast<T>(
        1.0 / std::sqrt(static_cast<double>(var[c]) + options.epsilon));
    params.running_mean[c] = keep * params.running_mean[c] + take * mean[c];
    params.running_var[c] = keep * params.running_var[c] + take * var[c];
  }
  return Normalize<T>(x, params, g, mean, std::move(inv_std), true, cache);
}

template <typename T>
BatchNormGrads<T> BatchNormBackward(const Tensor<T>& dy,
                                    const BatchNormParams<T>& params,
                                    const BatchNormCache<T>& cache) {
  if (dy.shape() != cache.xhat.shape())
    throw ShapeError("batchnorm upstream gradient " + ShapeString(dy.shape()) +
                     " does not match cached input " +
                     ShapeString(cache.xhat.shape()));
  const auto g = ChannelView(dy, params);
  BatchNormGrads<T> grads{Tensor<T>(dy.shape()), Tensor<T>({g.channels}),
                          Tensor<T>({g.channels})};
  kernels::parallel::BatchNormBackward<T>(
      g, dy.data(), cache.xhat.data(), cache.inv_std, params.gamma.data(),
      cache.batch_statistics, grads.input.data(), grads.gamma.data(),
      grads.beta.data());
  return grads;
}

template <typename T>
Tensor<T> Relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::size_t n = x.size();
  const T* src = x.data().data();
  T* dst = y.data().data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> ReluBackward(const Tensor<T>& x, const Tensor<T>& dy) {
  if (x.shape() != dy.shape())
    throw ShapeError("relu gradient shape mismatch");
  Tensor<T> dx(x.shape());
  const std::size_t n = x.size();
  const T* src = x.data().data();
  const T* g = dy.data().data();
  T* dst = dx.data().data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] > T(0) ? g[i] : T(0);
  return dx;
}

namespace {

kernels::PoolGeometry PoolView(const Shape& s) {
  RequireRank4(s, "avgpool");
  if (s[2] < 2 || s[3] < 2)
    throw ShapeError("2x2 average pooling needs spatial extents >= 2, got " +
                     ShapeString(s));
  return {s[0], s[1], s[2], s[3]};
}

}  // namespace

template <typename T>
Tensor<T> AvgPool2x2(const Tensor<T>& x) {
  const auto g = PoolView(x.shape());
  Tensor<T> y({g.batch, g.channels, g.out_h(), g.out_w()});
  kernels::parallel::AvgPool2x2Forward<T>(g, x.data(), y.data());
  return y;
}

template <typename T>
Tensor<T> AvgPool2x2Backward(const Shape& input_shape, const Tensor<T>& dy) {
  const auto g = PoolView(input_shape);
  if (dy.shape() != Shape{g.batch, g.channels, g.out_h(), g.out_w()})
    throw ShapeError("avgpool upstream gradient " + ShapeString(dy.shape()) +
                     " does not match input " + ShapeString(input_shape));
  Tensor<T> dx(input_shape);
  kernels::parallel::AvgPool2x2Backward<T>(g, dy.data(), dx.data());
  return dx;
}

template <typename T>
Tensor<T> GlobalAvgPool(const Tensor<T>& x) {
  const Shape& s = x.shape();
  RequireRank4(s, "global pool");
  const int planes = s[0] * s[1];
  const std::size_t area = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> y({s[0], s[1], 1, 1});
  for (int p = 0; p < planes; ++p) {
    const T* src = x.data().data() + p * area;
    double sum = 0;
    for (std::size_t i = 0; i < area; ++i) sum += src[i];
    y[p] = static_cast<T>(sum / static_cast<double>(area));
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPoolBackward(const Shape& input_shape, const Tensor<T>& dy) {
  RequireRank4(input_shape, "global pool");
  if (dy.size() != static_cast<std::size_t>(input_shape[0]) * input_shape[1])
    throw ShapeError("global pool gradient size mismatch");
  const std::size_t area =
      static_cast<std::size_t>(input_shape[2]) * input_shape[3];
  Tensor<T> dx(input_shape);
  for (std::size_t p = 0; p < dy.size(); ++p) {
    const T v = dy[p] / static_cast<T>(area);
    std::fill_n(dx.data().data() + p * area, area, v);
  }
  return dx;
}

namespace {

template <typename T>
kernels::LinearGeometry LinearView(const Tensor<T>& x, const Tensor<T>& w) {
  if (x.rank() < 1 || w.rank() != 2)
    throw ShapeError("linear expects a batched input and a rank-2 weight");
  const int features = static_cast<int>(x.size() / x.dim(0));
  if (features != w.dim(1))
    throw ShapeError("linear input has " + std::to_string(features) +
                     " features, weight expects " + std::to_string(w.dim(1)));
  return {x.dim(0), features, w.dim(0)};
}

}  // namespace

template <typename T>
Tensor<T> Linear(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  const auto g = LinearView(x, weight);
  if (bias.size() != static_cast<std::size_t>(g.out_features))
    throw ShapeError("linear bias size mismatch");
  Tensor<T> y({g.batch, g.out_features});
  kernels::parallel::LinearForward<T>(g, x.data(), weight.data(), bias.data(),
                                      y.data());
  return y;
}

template <typename T>
LinearGrads<T> LinearBackward(const Tensor<T>& x, const Tensor<T>& weight,
                              const Tensor<T>& dy) {
  const auto g = LinearView(x, weight);
  if (dy.shape() != Shape{g.batch, g.out_features})
    throw ShapeError("linear upstream gradient shape mismatch");
  LinearGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(weight.shape()),
                       Tensor<T>({g.out_features})};
  kernels::parallel::LinearBackward<T>(g, x.data(), weight.data(), dy.data(),
                                       grads.input.data(), grads.weight.data(),
                                       grads.bias.data());
  return grads;
}

template <typename T>
Tensor<T> Softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects N x C logits");
  const int rows = logits.dim(0), cols = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (int n = 0; n < rows; ++n) {
    const T* z = logits.data().data() + static_cast<std::size_t>(n) * cols;
    T* out = p.data().data() + static_cast<std::size_t>(n) * cols;
    const double top = *std::max_element(z, z + cols);
    double total = 0;
    for (int c = 0; c < cols; ++c) total += std::exp(z[c] - top);
    for (int c = 0; c < cols; ++c)
      out[c] = static_cast<T>(std::exp(z[c] - top) / total);
  }
  return p;
}

template <typename T>
SoftmaxLoss<T> SoftmaxCrossEntropy(const Tensor<T>& logits,
                                   std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax expects N x C logits");
  const int rows = logits.dim(0), cols = logits.dim(1);
  if (labels.size() != static_cast<std::size_t>(rows))
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " logit rows");
  SoftmaxLoss<T> result;
  result.probabilities = Softmax(logits);
  result.grad = result.probabilities;
  double loss = 0;
  for (int n = 0; n < rows; ++n) {
    const int label = labels[n];
    if (label < 0 || label >= cols)
      throw LabelError("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(cols) + ")");
    const T* z = logits.data().data() + static_cast<std::size_t>(n) * cols;
    const double top = *std::max_element(z, z + cols);
    double total = 0;
    for (int c = 0; c < cols; ++c) total += std::exp(z[c] - top);
    loss += std::log(total) - (z[label] - top);
    result.grad[static_cast<std::size_t>(n) * cols + label] -= T(1);
  }
  for (auto& g : result.grad.data()) g /= static_cast<T>(rows);
  result.loss = loss / rows;
  return result;
}

#define DENSENET_INSTANTIATE(T)                                               \
  template Tensor<T> ConcatChannels<T>(std::span<const Tensor<T>* const>);    \
  template std::vector<Tensor<T>> SplitChannels<T>(const Tensor<T>&,          \
                                                   std::span<const int>);     \
  template Tensor<T> Conv2d<T>(const Tensor<T>&, const Tensor<T>&,            \
                               Conv2dSpec);                                   \
  template Conv2dGrads<T> Conv2dBackward<T>(                                  \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dSpec);      \
  template struct BatchNormParams<T>;                                         \
  template Tensor<T> BatchNorm<T>(const Tensor<T>&, BatchNormParams<T>&,      \
                                  Mode, const BatchNormOptions&,              \
                                  BatchNormCache<T>*);                        \
  template Tensor<T> BatchNorm<T>(const Tensor<T>&,                           \
                                  const BatchNormParams<T>&,                  \
                                  const BatchNormOptions&,                    \
                                  BatchNormCache<T>*);                        \
  template BatchNormGrads<T> BatchNormBackward<T>(                            \
      const Tensor<T>&, const BatchNormParams<T>&, const BatchNormCache<T>&); \
  template Tensor<T> Relu<T>(const Tensor<T>&);                               \
  template Tensor<T> ReluBackward<T>(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> AvgPool2x2<T>(const Tensor<T>&);                         \
  template Tensor<T> AvgPool2x2Backward<T>(const Shape&, const Tensor<T>&);   \
  template Tensor<T> GlobalAvgPool<T>(const Tensor<T>&);                      \
  template Tensor<T> GlobalAvgPoolBackward<T>(const Shape&,                   \
                                              const Tensor<T>&);              \
  template Tensor<T> Linear<T>(const Tensor<T>&, const Tensor<T>&,            \
                               const Tensor<T>&);                             \
  template LinearGrads<T> LinearBackward<T>(                                  \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> Softmax<T>(const Tensor<T>&);                            \
  template SoftmaxLoss<T> SoftmaxCrossEntropy<T>(const Tensor<T>&,            \
                                                 std::span<const int>);

DENSENET_INSTANTIATE(float)
DENSENET_INSTANTIATE(double)

#undef DENSENET_INSTANTIATE

}  // namespace densenet
