// bench/kernel_bench.cc

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

// Serial reference kernels against their OpenMP counterparts, on shapes taken
// from the depth-22 network with a 64-frame minibatch.

#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "densenet/kernels.h"

namespace {

using namespace densenet::kernels;

std::vector<float> Random(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.f, 1.f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Last 3x3 layer of the first dense block: 76 -> 12 maps on 9x38.
ConvGeometry BlockConv() {
  ConvGeometry g;
  g.batch = 64;
  g.in_channels = 76;
  g.in_h = 9;
  g.in_w = 38;
  g.out_channels = 12;
  g.kernel_h = g.kernel_w = 3;
  g.pad = 1;
  return g;
}

std::size_t InSize(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.batch) * g.in_channels * g.in_h * g.in_w;
}
std::size_t OutSize(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.batch) * g.out_channels * g.out_h() * g.out_w();
}
std::size_t KernelSize(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.out_channels) * g.in_channels * g.kernel_h * g.kernel_w;
}

template <bool kParallel>
void BM_ConvForward(benchmark::State& state) {
  const auto g = BlockConv();
  const auto x = Random(InSize(g), 1), w = Random(KernelSize(g), 2);
  std::vector<float> y(OutSize(g));
  for (auto _ : state) {
    if constexpr (kParallel) parallel::Conv2dForward<float>(g, x, w, y);
    else serial::Conv2dForward<float>(g, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool kParallel>
void BM_ConvBackwardData(benchmark::State& state) {
  const auto g = BlockConv();
  const auto dy = Random(OutSize(g), 3), w = Random(KernelSize(g), 2);
  std::vector<float> dx(InSize(g));
  for (auto _ : state) {
    if constexpr (kParallel) parallel::Conv2dBackwardData<float>(g, dy, w, dx);
    else serial::Conv2dBackwardData<float>(g, dy, w, dx);
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool kParallel>
void BM_ConvBackwardFilter(benchmark::State& state) {
  const auto g = BlockConv();
  const auto x = Random(InSize(g), 1), dy = Random(OutSize(g), 3);
  std::vector<float> dw(KernelSize(g));
  for (auto _ : state) {
    if constexpr (kParallel) parallel::Conv2dBackwardFilter<float>(g, x, dy, dw);
    else serial::Conv2dBackwardFilter<float>(g, x, dy, dw);
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool kParallel>
void BM_BatchNorm(benchmark::State& state) {
  const ChannelGeometry c{64, 88, 9 * 38};
  const std::size_t n = static_cast<std::size_t>(c.batch) * c.channels * c.spatial;
  const auto x = Random(n, 4), dy = Random(n, 5);
  const std::vector<float> gamma(c.channels, 1.f), beta(c.channels, 0.f);
  std::vector<float> mean(c.channels), var(c.channels), inv(c.channels), xhat(n), y(n), dx(n);
  std::vector<float> dg(c.channels), db(c.channels);
  for (auto _ : state) {
    if constexpr (kParallel) {
      parallel::ChannelMoments<float>(c, x, mean, var);
      for (int i = 0; i < c.channels; ++i) inv[i] = 1.f / std::sqrt(var[i] + 1e-5f);
      parallel::BatchNormApply<float>(c, x, mean, inv, gamma, beta, xhat, y);
      parallel::BatchNormBackward<float>(c, dy, xhat, inv, gamma, true, dx, dg, db);
    } else {
      serial::ChannelMoments<float>(c, x, mean, var);
      for (int i = 0; i < c.channels; ++i) inv[i] = 1.f / std::sqrt(var[i] + 1e-5f);
      serial::BatchNormApply<float>(c, x, mean, inv, gamma, beta, xhat, y);
      serial::BatchNormBackward<float>(c, dy, xhat, inv, gamma, true, dx, dg, db);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool kParallel>
void BM_AvgPool(benchmark::State& state) {
  const PoolGeometry p{64, 44, 9, 38};
  const std::size_t in = static_cast<std::size_t>(p.batch) * p.channels * p.in_h * p.in_w;
  const std::size_t out = static_cast<std::size_t>(p.batch) * p.channels * p.out_h() * p.out_w();
  const auto x = Random(in, 6), dy = Random(out, 7);
  std::vector<float> y(out), dx(in);
  for (auto _ : state) {
    if constexpr (kParallel) {
      parallel::AvgPool2x2Forward<float>(p, x, y);
      parallel::AvgPool2x2Backward<float>(p, dy, dx);
    } else {
      serial::AvgPool2x2Forward<float>(p, x, y);
      serial::AvgPool2x2Backward<float>(p, dy, dx);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

// Classifier of a depth-41 network over 1500 tied states.
template <bool kParallel>
void BM_Linear(benchmark::State& state) {
  const LinearGeometry l{64, 130, 1500};
  const auto x = Random(static_cast<std::size_t>(l.batch) * l.in_features, 8);
  const auto w = Random(static_cast<std::size_t>(l.out_features) * l.in_features, 9);
  const auto b = Random(l.out_features, 10);
  const auto dy = Random(static_cast<std::size_t>(l.batch) * l.out_features, 11);
  std::vector<float> y(dy.size()), dx(x.size()), dw(w.size()), db(b.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      parallel::LinearForward<float>(l, x, w, b, y);
      parallel::LinearBackward<float>(l, x, w, dy, dx, dw, db);
    } else {
      serial::LinearForward<float>(l, x, w, b, y);
      serial::LinearBackward<float>(l, x, w, dy, dx, dw, db);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardData<false>)->Name("conv_backward_data/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardData<true>)->Name("conv_backward_data/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardFilter<false>)->Name("conv_backward_filter/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardFilter<true>)->Name("conv_backward_filter/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNorm<false>)->Name("batchnorm/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNorm<true>)->Name("batchnorm/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AvgPool<false>)->Name("avgpool/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AvgPool<true>)->Name("avgpool/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Linear<false>)->Name("linear/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Linear<true>)->Name("linear/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
