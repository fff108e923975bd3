// tests/test_kernels.cc

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

#include <cmath>
#include <random>

#include <omp.h>

#include "densenet/kernels.h"
#include "doctest.h"
#include "test_util.h"

using namespace densenet;
using namespace densenet::kernels;
using densenet::testing::RandInt;

namespace {

std::vector<double> Random(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// The parallel kernels sum in a different order, so agreement is to rounding.
template <typename T>
void Same(const std::vector<T>& a, const std::vector<T>& b, double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO("index ", i);
    REQUIRE(std::abs(static_cast<double>(a[i]) - b[i]) <= tol * (1 + std::abs(static_cast<double>(a[i]))));
  }
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("parallel convolution agrees with the serial reference") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 25; ++trial) {
      ConvGeometry g;
      g.batch = RandInt(rng, 1, 3);
      g.in_channels = RandInt(rng, 1, 5);
      g.out_channels = RandInt(rng, 1, 5);
      g.kernel_h = g.kernel_w = trial % 3 == 0 ? 1 : 3;
      g.pad = g.kernel_h == 3 ? RandInt(rng, 0, 1) : 0;
      g.stride = RandInt(rng, 1, 2);
      g.in_h = RandInt(rng, 3, 9);
      g.in_w = RandInt(rng, 3, 12);
      const std::size_t nx = static_cast<std::size_t>(g.batch) * g.in_channels * g.in_h * g.in_w;
      const std::size_t nw = static_cast<std::size_t>(g.out_channels) * g.in_channels * g.kernel_h * g.kernel_w;
      const std::size_t ny = static_cast<std::size_t>(g.batch) * g.out_channels * g.out_h() * g.out_w();
      const auto x = Random(nx, rng), w = Random(nw, rng), dy = Random(ny, rng);
      std::vector<double> ys(ny), yp(ny), dxs(nx), dxp(nx), dws(nw), dwp(nw);
      serial::Conv2dForward<double>(g, x, w, ys);
      parallel::Conv2dForward<double>(g, x, w, yp);
      Same(ys, yp);
      serial::Conv2dBackwardData<double>(g, dy, w, dxs);
      parallel::Conv2dBackwardData<double>(g, dy, w, dxp);
      Same(dxs, dxp);
      serial::Conv2dBackwardFilter<double>(g, x, dy, dws);
      parallel::Conv2dBackwardFilter<double>(g, x, dy, dwp);
      Same(dws, dwp);
    }
  }

  TEST_CASE("parallel batchnorm, pooling and linear agree with the serial reference") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 25; ++trial) {
      ChannelGeometry c{RandInt(rng, 1, 4), RandInt(rng, 1, 5), RandInt(rng, 2, 20)};
      const std::size_t n = static_cast<std::size_t>(c.batch) * c.channels * c.spatial;
      const auto x = Random(n, rng), dy = Random(n, rng);
      const auto gamma = Random(c.channels, rng), beta = Random(c.channels, rng);
      std::vector<double> ms(c.channels), vs(c.channels), mp(c.channels), vp(c.channels);
      serial::ChannelMoments<double>(c, x, ms, vs);
      parallel::ChannelMoments<double>(c, x, mp, vp);
      Same(ms, mp);
      Same(vs, vp);
      std::vector<double> inv(c.channels);
      for (int i = 0; i < c.channels; ++i) inv[i] = 1 / std::sqrt(vs[i] + 1e-5);
      std::vector<double> xh_s(n), y_s(n), xh_p(n), y_p(n);
      serial::BatchNormApply<double>(c, x, ms, inv, gamma, beta, xh_s, y_s);
      parallel::BatchNormApply<double>(c, x, ms, inv, gamma, beta, xh_p, y_p);
      Same(xh_s, xh_p);
      Same(y_s, y_p);
      for (bool batch_stats : {true, false}) {
        std::vector<double> dx_s(n), dg_s(c.channels), db_s(c.channels);
        std::vector<double> dx_p(n), dg_p(c.channels), db_p(c.channels);
        serial::BatchNormBackward<double>(c, dy, xh_s, inv, gamma, batch_stats, dx_s, dg_s, db_s);
        parallel::BatchNormBackward<double>(c, dy, xh_s, inv, gamma, batch_stats, dx_p, dg_p, db_p);
        Same(dx_s, dx_p);
        Same(dg_s, dg_p);
        Same(db_s, db_p);
      }

      PoolGeometry p{RandInt(rng, 1, 3), RandInt(rng, 1, 4), RandInt(rng, 2, 9), RandInt(rng, 2, 9)};
      const std::size_t pin = static_cast<std::size_t>(p.batch) * p.channels * p.in_h * p.in_w;
      const std::size_t pout = static_cast<std::size_t>(p.batch) * p.channels * p.out_h() * p.out_w();
      const auto px = Random(pin, rng), pdy = Random(pout, rng);
      std::vector<double> py_s(pout), py_p(pout), pdx_s(pin), pdx_p(pin);
      serial::AvgPool2x2Forward<double>(p, px, py_s);
      parallel::AvgPool2x2Forward<double>(p, px, py_p);
      Same(py_s, py_p);
      serial::AvgPool2x2Backward<double>(p, pdy, pdx_s);
      parallel::AvgPool2x2Backward<double>(p, pdy, pdx_p);
      Same(pdx_s, pdx_p);

      LinearGeometry l{RandInt(rng, 1, 5), RandInt(rng, 1, 30), RandInt(rng, 1, 12)};
      const auto lx = Random(static_cast<std::size_t>(l.batch) * l.in_features, rng);
      const auto lw = Random(static_cast<std::size_t>(l.out_features) * l.in_features, rng);
      const auto lb = Random(l.out_features, rng);
      const auto ldy = Random(static_cast<std::size_t>(l.batch) * l.out_features, rng);
      std::vector<double> ly_s(ldy.size()), ly_p(ldy.size());
      serial::LinearForward<double>(l, lx, lw, lb, ly_s);
      parallel::LinearForward<double>(l, lx, lw, lb, ly_p);
      Same(ly_s, ly_p);
      std::vector<double> ldx_s(lx.size()), ldw_s(lw.size()), ldb_s(lb.size());
      std::vector<double> ldx_p(lx.size()), ldw_p(lw.size()), ldb_p(lb.size());
      serial::LinearBackward<double>(l, lx, lw, ldy, ldx_s, ldw_s, ldb_s);
      parallel::LinearBackward<double>(l, lx, lw, ldy, ldx_p, ldw_p, ldb_p);
      Same(ldx_s, ldx_p);
      Same(ldw_s, ldw_p);
      Same(ldb_s, ldb_p);
    }
  }

  TEST_CASE("float instantiations agree as well") {
    std::mt19937_64 rng(23);
    ConvGeometry g{2, 3, 11, 40, 8, 3, 3, 1, 1};
    std::normal_distribution<float> d(0, 1);
    std::vector<float> x(2 * 3 * 11 * 40), w(8 * 3 * 9), ys(2 * 8 * 11 * 40), yp(ys.size());
    for (auto& v : x) v = d(rng);
    for (auto& v : w) v = d(rng);
    serial::Conv2dForward<float>(g, x, w, ys);
    parallel::Conv2dForward<float>(g, x, w, yp);
    Same(ys, yp, 1e-5);
    CHECK(parallel::MaxThreads() >= 1);
  }

  TEST_CASE("parallel results do not depend on the thread count") {
    std::mt19937_64 rng(24);
    ConvGeometry g{3, 5, 9, 20, 7, 3, 3, 1, 1};
    const auto x = Random(3 * 5 * 9 * 20, rng), w = Random(7 * 5 * 9, rng);
    const auto dy = Random(3 * 7 * 9 * 20, rng);
    auto run = [&](int threads) {
      omp_set_num_threads(threads);
      std::vector<double> y(dy.size()), dx(x.size()), dw(w.size());
      parallel::Conv2dForward<double>(g, x, w, y);
      parallel::Conv2dBackwardData<double>(g, dy, w, dx);
      parallel::Conv2dBackwardFilter<double>(g, x, dy, dw);
      y.insert(y.end(), dx.begin(), dx.end());
      y.insert(y.end(), dw.begin(), dw.end());
      return y;
    };
    const int saved = omp_get_max_threads();
    const auto one = run(1), four = run(4);
    omp_set_num_threads(saved);
    CHECK(one == four);
  }
}
