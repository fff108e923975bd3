// src/kernels_serial.cc

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

#include <algorithm>
#include <cstddef>

#include "densenet/kernels.h"

namespace densenet::kernels::serial {

namespace {

std::size_t Idx4(int a, int b, int c, int d, int B, int C, int D) {
  return ((static_cast<std::size_t>(a) * B + b) * C + c) * D + d;
}

}  // namespace

template <typename T>
void Conv2dForward(const ConvGeometry& g, std::span<const T> x,
                   std::span<const T> w, std::span<T> y) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          T sum = 0;
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int u = 0; u < g.kernel_h; ++u)
              for (int v = 0; v < g.kernel_w; ++v) {
                int r = i * g.stride - g.pad + u;
                int c = j * g.stride - g.pad + v;
                if (r < 0 || r >= g.in_h || c < 0 || c >= g.in_w) continue;
                sum += x[Idx4(n, ci, r, c, g.in_channels, g.in_h, g.in_w)] *
                       w[Idx4(co, ci, u, v, g.in_channels, g.kernel_h,
                              g.kernel_w)];
              }
          y[Idx4(n, co, i, j, g.out_channels, oh, ow)] = sum;
        }
}

template <typename T>
void Conv2dBackwardData(const ConvGeometry& g, std::span<const T> dy,
                        std::span<const T> w, std::span<T> dx) {
  const int oh = g.out_h(), ow = g.out_w();
  std::fill(dx.begin(), dx.end(), T(0));
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          T d = dy[Idx4(n, co, i, j, g.out_channels, oh, ow)];
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int u = 0; u < g.kernel_h; ++u)
              for (int v = 0; v < g.kernel_w; ++v) {
                int r = i * g.stride - g.pad + u;
                int c = j * g.stride - g.pad + v;
                if (r < 0 || r >= g.in_h || c < 0 || c >= g.in_w) continue;
                dx[Idx4(n, ci, r, c, g.in_channels, g.in_h, g.in_w)] +=
                    d * w[Idx4(co, ci, u, v, g.in_channels, g.kernel_h,
                               g.kernel_w)];
              }
        }
}

template <typename T>
void Conv2dBackwardFilter(const ConvGeometry& g, std::span<const T> x,
                          std::span<const T> dy, std::span<T> dw) {
  const int oh = g.out_h(), ow = g.out_w();
  std::fill(dw.begin(), dw.end(), T(0));
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          T d = dy[Idx4(n, co, i, j, g.out_channels, oh, ow)];
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int u = 0; u < g.kernel_h; ++u)
              for (int v = 0; v < g.kernel_w; ++v) {
                int r = i * g.stride - g.pad + u;
                int c = j * g.stride - g.pad + v;
                if (r < 0 || r >= g.in_h || c < 0 || c >= g.in_w) continue;
                dw[Idx4(co, ci, u, v, g.in_channels, g.kernel_h, g.kernel_w)] +=
                    d * x[Idx4(n, ci, r, c, g.in_channels, g.in_h, g.in_w)];
              }
        }
}

template <typename T>
void ChannelMoments(const ChannelGeometry& g, std::span<const T> x,
                    std::span<T> mean, std::span<T> var) {
  const double count = static_cast<double>(g.batch) * g.spatial;
  for (int c = 0; c < g.channels; ++c) {
    double sum = 0;
    for (int n = 0; n < g.batch; ++n)
      for (int s = 0; s < g.spatial; ++s)
        sum += x[(static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s];
    double mu = sum / count;
    double sq = 0;
    for (int n = 0; n < g.batch; ++n)
      for (int s = 0; s < g.spatial; ++s) {
        double d =
            x[(static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s] -
            mu;
        sq += d * d;
      }
    mean[c] = static_cast<T>(mu);
    var[c] = static_cast<T>(sq / count);
  }
}

template <typename T>
void BatchNormApply(const ChannelGeometry& g, std::span<const T> x,
                    std::span<const T> mean, std::span<const T> inv_std,
                    std::span<const T> gamma, std::span<const T> beta,
                    std::span<T> xhat, std::span<T> y) {
  for (int n = 0; n < g.batch; ++n)
    for (int c = 0; c < g.channels; ++c)
      for (int s = 0; s < g.spatial; ++s) {
        std::size_t i =
            (static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s;
        xhat[i] = (x[i] - mean[c]) * inv_std[c];
        y[i] = gamma[c] * xhat[i] + beta[c];
      }
}

template <typename T>
void BatchNormBackward(const ChannelGeometry& g, std::span<const T> dy,
                       std::span<const T> xhat, std::span<const T> inv_std,
                       std::span<const T> gamma, bool batch_statistics,
                       std::span<T> dx, std::span<T> dgamma,
                       std::span<T> dbeta) {
  const double count = static_cast<double>(g.batch) * g.spatial;
  for (int c = 0; c < g.channels; ++c) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int n = 0; n < g.batch; ++n)
      for (int s = 0; s < g.spatial; ++s) {
        std::size_t i =
            (static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s;
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xhat[i];
      }
    dgamma[c] = static_cast<T>(sum_dy_xhat);
    dbeta[c] = static_cast<T>(sum_dy);
    for (int n = 0; n < g.batch; ++n)
      for (int s = 0; s < g.spatial; ++s) {
        std::size_t i =
            (static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s;
        double v = dy[i];
        if (batch_statistics)
          v -= (sum_dy + xhat[i] * sum_dy_xhat) / count;
        dx[i] = static_cast<T>(gamma[c] * inv_std[c] * v);
      }
  }
}

template <typename T>
void AvgPool2x2Forward(const PoolGeometry& g, std::span<const T> x,
                       std::span<T> y) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int n = 0; n < g.batch; ++n)
    for (int c = 0; c < g.channels; ++c)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          T sum = 0;
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v)
              sum += x[Idx4(n, c, 2 * i + u, 2 * j + v, g.channels, g.in_h,
                            g.in_w)];
          y[Idx4(n, c, i, j, g.channels, oh, ow)] = sum / T(4);
        }
}

template <typename T>
void AvgPool2x2Backward(const PoolGeometry& g, std::span<const T> dy,
                        std::span<T> dx) {
  const int oh = g.out_h(), ow = g.out_w();
  std::fill(dx.begin(), dx.end(), T(0));
  for (int n = 0; n < g.batch; ++n)
    for (int c = 0; c < g.channels; ++c)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          T d = dy[Idx4(n, c, i, j, g.channels, oh, ow)] / T(4);
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v)
              dx[Idx4(n, c, 2 * i + u, 2 * j + v, g.channels, g.in_h,
                      g.in_w)] = d;
        }
}

template <typename T>
void LinearForward(const LinearGeometry& g, std::span<const T> x,
                   std::span<const T> w, std::span<const T> b, std::span<T> y) {
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_features; ++o) {
      T sum = b[o];
      for (int i = 0; i < g.in_features; ++i)
        sum += w[static_cast<std::size_t>(o) * g.in_features + i] *
               x[static_cast<std::size_t>(n) * g.in_features + i];
      y[static_cast<std::size_t>(n) * g.out_features + o] = sum;
    }
}

template <typename T>
void LinearBackward(const LinearGeometry& g, std::span<const T> x,
                    std::span<const T> w, std::span<const T> dy,
                    std::span<T> dx, std::span<T> dw, std::span<T> db) {
  std::fill(dx.begin(), dx.end(), T(0));
  std::fill(dw.begin(), dw.end(), T(0));
  std::fill(db.begin(), db.end(), T(0));
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_features; ++o) {
      T d = dy[static_cast<std::size_t>(n) * g.out_features + o];
      db[o] += d;
      for (int i = 0; i < g.in_features; ++i) {
        dw[static_cast<std::size_t>(o) * g.in_features + i] +=
            d * x[static_cast<std::size_t>(n) * g.in_features + i];
        dx[static_cast<std::size_t>(n) * g.in_features + i] +=
            d * w[static_cast<std::size_t>(o) * g.in_features + i];
      }
    }
}

#include "kernels_instantiate.inc"

}  // namespace densenet::kernels::serial
