// src/kernels_parallel.cc

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

#include <omp.h>

#include "densenet/kernels.h"

namespace densenet::kernels::parallel {

namespace {

// Output index range [lo, hi) for which in = out*stride - pad + offset lands
// inside [0, extent).
void ValidRange(int out_extent, int in_extent, int stride, int pad, int offset,
                int* lo, int* hi) {
  int first = pad - offset;
  *lo = first <= 0 ? 0 : (first + stride - 1) / stride;
  int last = in_extent - 1 + pad - offset;  // largest out*stride allowed
  *hi = last < 0 ? 0 : std::min(out_extent, last / stride + 1);
  if (*hi < *lo) *hi = *lo;
}

}  // namespace

int MaxThreads() { return omp_get_max_threads(); }

template <typename T>
void Conv2dForward(const ConvGeometry& g, std::span<const T> x,
                   std::span<const T> w, std::span<T> y) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t taps = static_cast<std::size_t>(g.kernel_h) * g.kernel_w;
  const int planes = g.batch * g.out_channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int n = p / g.out_channels, co = p % g.out_channels;
    T* out = y.data() + static_cast<std::size_t>(p) * out_plane;
    std::fill(out, out + out_plane, T(0));
    for (int ci = 0; ci < g.in_channels; ++ci) {
      const T* in = x.data() + (static_cast<std::size_t>(n) * g.in_channels + ci) * in_plane;
      const T* ker = w.data() + (static_cast<std::size_t>(co) * g.in_channels + ci) * taps;
      for (int u = 0; u < g.kernel_h; ++u) {
        int i_lo, i_hi;
        ValidRange(oh, g.in_h, g.stride, g.pad, u, &i_lo, &i_hi);
        for (int v = 0; v < g.kernel_w; ++v) {
          int j_lo, j_hi;
          ValidRange(ow, g.in_w, g.stride, g.pad, v, &j_lo, &j_hi);
          const T wv = ker[u * g.kernel_w + v];
          for (int i = i_lo; i < i_hi; ++i) {
            const T* row = in + static_cast<std::size_t>(i * g.stride - g.pad + u) * g.in_w;
            T* orow = out + static_cast<std::size_t>(i) * ow;
            if (g.stride == 1) {
              const T* src = row - g.pad + v;
              for (int j = j_lo; j < j_hi; ++j) orow[j] += wv * src[j];
            } else {
              for (int j = j_lo; j < j_hi; ++j)
                orow[j] += wv * row[j * g.stride - g.pad + v];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Conv2dBackwardData(const ConvGeometry& g, std::span<const T> dy,
                        std::span<const T> w, std::span<T> dx) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t taps = static_cast<std::size_t>(g.kernel_h) * g.kernel_w;
  const int planes = g.batch * g.in_channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int n = p / g.in_channels, ci = p % g.in_channels;
    T* out = dx.data() + static_cast<std::size_t>(p) * in_plane;
    std::fill(out, out + in_plane, T(0));
    for (int co = 0; co < g.out_channels; ++co) {
      const T* grad = dy.data() + (static_cast<std::size_t>(n) * g.out_channels + co) * out_plane;
      const T* ker = w.data() + (static_cast<std::size_t>(co) * g.in_channels + ci) * taps;
      for (int u = 0; u < g.kernel_h; ++u) {
        int i_lo, i_hi;
        ValidRange(oh, g.in_h, g.stride, g.pad, u, &i_lo, &i_hi);
        for (int v = 0; v < g.kernel_w; ++v) {
          int j_lo, j_hi;
          ValidRange(ow, g.in_w, g.stride, g.pad, v, &j_lo, &j_hi);
          const T wv = ker[u * g.kernel_w + v];
          for (int i = i_lo; i < i_hi; ++i) {
            T* row = out + static_cast<std::size_t>(i * g.stride - g.pad + u) * g.in_w;
            const T* grow = grad + static_cast<std::size_t>(i) * ow;
            if (g.stride == 1) {
              T* dst = row - g.pad + v;
              for (int j = j_lo; j < j_hi; ++j) dst[j] += wv * grow[j];
            } else {
              for (int j = j_lo; j < j_hi; ++j)
                row[j * g.stride - g.pad + v] += wv * grow[j];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Conv2dBackwardFilter(const ConvGeometry& g, std::span<const T> x,
                          std::span<const T> dy, std::span<T> dw) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t taps = static_cast<std::size_t>(g.kernel_h) * g.kernel_w;
  const int pairs = g.out_channels * g.in_channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < pairs; ++p) {
    const int co = p / g.in_channels, ci = p % g.in_channels;
    T* ker = dw.data() + static_cast<std::size_t>(p) * taps;
    for (int u = 0; u < g.kernel_h; ++u) {
      int i_lo, i_hi;
      ValidRange(oh, g.in_h, g.stride, g.pad, u, &i_lo, &i_hi);
      for (int v = 0; v < g.kernel_w; ++v) {
        int j_lo, j_hi;
        ValidRange(ow, g.in_w, g.stride, g.pad, v, &j_lo, &j_hi);
        T sum = 0;
        for (int n = 0; n < g.batch; ++n) {
          const T* in = x.data() + (static_cast<std::size_t>(n) * g.in_channels + ci) * in_plane;
          const T* grad = dy.data() + (static_cast<std::size_t>(n) * g.out_channels + co) * out_plane;
          for (int i = i_lo; i < i_hi; ++i) {
            const T* row = in + static_cast<std::size_t>(i * g.stride - g.pad + u) * g.in_w;
            const T* grow = grad + static_cast<std::size_t>(i) * ow;
            for (int j = j_lo; j < j_hi; ++j)
              sum += grow[j] * row[j * g.stride - g.pad + v];
          }
        }
        ker[u * g.kernel_w + v] = sum;
      }
    }
  }
}

template <typename T>
void ChannelMoments(const ChannelGeometry& g, std::span<const T> x,
                    std::span<T> mean, std::span<T> var) {
  const double count = static_cast<double>(g.batch) * g.spatial;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    double sum = 0;
    for (int n = 0; n < g.batch; ++n) {
      const T* p = x.data() + (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) sum += p[s];
    }
    const double mu = sum / count;
    double sq = 0;
    for (int n = 0; n < g.batch; ++n) {
      const T* p = x.data() + (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) {
        double d = p[s] - mu;
        sq += d * d;
      }
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
  const int planes = g.batch * g.channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int c = p % g.channels;
    const std::size_t base = static_cast<std::size_t>(p) * g.spatial;
    const T mu = mean[c], is = inv_std[c], ga = gamma[c], be = beta[c];
    for (int s = 0; s < g.spatial; ++s) {
      const T h = (x[base + s] - mu) * is;
      xhat[base + s] = h;
      y[base + s] = ga * h + be;
    }
  }
}

template <typename T>
void BatchNormBackward(const ChannelGeometry& g, std::span<const T> dy,
                       std::span<const T> xhat, std::span<const T> inv_std,
                       std::span<const T> gamma, bool batch_statistics,
                       std::span<T> dx, std::span<T> dgamma,
                       std::span<T> dbeta) {
  const double count = static_cast<double>(g.batch) * g.spatial;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int n = 0; n < g.batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) {
        sum_dy += dy[base + s];
        sum_dy_xhat += dy[base + s] * xhat[base + s];
      }
    }
    dgamma[c] = static_cast<T>(sum_dy_xhat);
    dbeta[c] = static_cast<T>(sum_dy);
    const double scale = static_cast<double>(gamma[c]) * inv_std[c];
    const double mean_dy = batch_statistics ? sum_dy / count : 0.0;
    const double mean_dy_xhat = batch_statistics ? sum_dy_xhat / count : 0.0;
    for (int n = 0; n < g.batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s)
        dx[base + s] = static_cast<T>(
            scale * (dy[base + s] - mean_dy - xhat[base + s] * mean_dy_xhat));
    }
  }
}

template <typename T>
void AvgPool2x2Forward(const PoolGeometry& g, std::span<const T> x,
                       std::span<T> y) {
  const int oh = g.out_h(), ow = g.out_w();
  const int planes = g.batch * g.channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T* in = x.data() + static_cast<std::size_t>(p) * g.in_h * g.in_w;
    T* out = y.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int i = 0; i < oh; ++i) {
      const T* r0 = in + static_cast<std::size_t>(2 * i) * g.in_w;
      const T* r1 = r0 + g.in_w;
      for (int j = 0; j < ow; ++j)
        out[i * ow + j] =
            (r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]) / T(4);
    }
  }
}

template <typename T>
void AvgPool2x2Backward(const PoolGeometry& g, std::span<const T> dy,
                        std::span<T> dx) {
  const int oh = g.out_h(), ow = g.out_w();
  const int planes = g.batch * g.channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    T* in = dx.data() + static_cast<std::size_t>(p) * g.in_h * g.in_w;
    const T* out = dy.data() + static_cast<std::size_t>(p) * oh * ow;
    std::fill(in, in + static_cast<std::size_t>(g.in_h) * g.in_w, T(0));
    for (int i = 0; i < oh; ++i) {
      T* r0 = in + static_cast<std::size_t>(2 * i) * g.in_w;
      T* r1 = r0 + g.in_w;
      for (int j = 0; j < ow; ++j) {
        const T d = out[i * ow + j] / T(4);
        r0[2 * j] = r0[2 * j + 1] = r1[2 * j] = r1[2 * j + 1] = d;
      }
    }
  }
}

template <typename T>
void LinearForward(const LinearGeometry& g, std::span<const T> x,
                   std::span<const T> w, std::span<const T> b, std::span<T> y) {
  const int cells = g.batch * g.out_features;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < cells; ++p) {
    const int n = p / g.out_features, o = p % g.out_features;
    const T* xr = x.data() + static_cast<std::size_t>(n) * g.in_features;
    const T* wr = w.data() + static_cast<std::size_t>(o) * g.in_features;
    T sum = b[o];
    for (int i = 0; i < g.in_features; ++i) sum += wr[i] * xr[i];
    y[p] = sum;
  }
}

template <typename T>
void LinearBackward(const LinearGeometry& g, std::span<const T> x,
                    std::span<const T> w, std::span<const T> dy,
                    std::span<T> dx, std::span<T> dw, std::span<T> db) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < g.out_features; ++o) {
    T* wr = dw.data() + static_cast<std::size_t>(o) * g.in_features;
    std::fill(wr, wr + g.in_features, T(0));
    T bias = 0;
    for (int n = 0; n < g.batch; ++n) {
      const T d = dy[static_cast<std::size_t>(n) * g.out_features + o];
      const T* xr = x.data() + static_cast<std::size_t>(n) * g.in_features;
      bias += d;
      for (int i = 0; i < g.in_features; ++i) wr[i] += d * xr[i];
    }
    db[o] = bias;
  }
#pragma omp parallel for schedule(static)
  for (int n = 0; n < g.batch; ++n) {
    T* xr = dx.data() + static_cast<std::size_t>(n) * g.in_features;
    std::fill(xr, xr + g.in_features, T(0));
    for (int o = 0; o < g.out_features; ++o) {
      const T d = dy[static_cast<std::size_t>(n) * g.out_features + o];
      const T* wr = w.data() + static_cast<std::size_t>(o) * g.in_features;
      for (int i = 0; i < g.in_features; ++i) xr[i] += d * wr[i];
    }
  }
}

#include "kernels_instantiate.inc"

}  // namespace densenet::kernels::parallel
