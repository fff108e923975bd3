// tests/test_tensor_layers.cc

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
#include <numeric>
#include <random>

#include "densenet/gradcheck.h"
#include "densenet/layers.h"
#include "doctest.h"
#include "test_util.h"

using namespace densenet;
using densenet::testing::RandInt;
using densenet::testing::RandomTensor;

namespace {

using TD = Tensor<double>;

// Direct convolution written from the definition, independent of the
// library kernels.
TD NaiveConv(const TD& x, const TD& w, int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = h + 2 * pad - kh + 1, ow = wd + 2 * pad - kw + 1;
  TD y({n, co, oh, ow});
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < co; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double s = 0;
          for (int c = 0; c < ci; ++c)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int r = i + u - pad, q = j + v - pad;
                if (r >= 0 && r < h && q >= 0 && q < wd)
                  s += x.at(b, c, r, q) * w.at(o, c, u, v);
              }
          y.at(b, o, i, j) = s;
        }
  return y;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("extent product must equal data length") {
    CHECK_THROWS_AS(Tensor<float>({2, 3}, std::vector<float>(5)), ShapeError);
    CHECK_THROWS_AS(Tensor<float>(Shape{2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor<float>(Shape{-1}), ShapeError);
    Tensor<float> t({2, 3}, std::vector<float>(6, 1.f));
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(t.Reshaped({4, 2}), ShapeError);
    CHECK(t.Reshaped({3, 2}).shape() == Shape{3, 2});
  }

  TEST_CASE("non-finite values are reported") {
    Tensor<float> t({2}, std::vector<float>{1.f, NAN});
    CHECK_FALSE(t.AllFinite());
    CHECK_THROWS_AS(RequireFinite(t, "t"), NumericError);
  }
}

TEST_SUITE("concat") {
  TEST_CASE("12 and 24 channels give 36") {
    std::mt19937_64 rng(1);
    const auto a = RandomTensor<float>({2, 12, 3, 4}, rng);
    const auto b = RandomTensor<float>({2, 24, 3, 4}, rng);
    const Tensor<float>* in[] = {&a, &b};
    const auto y = ConcatChannels<float>(in);
    CHECK(y.shape() == Shape{2, 36, 3, 4});
    CHECK(y.at(1, 0, 2, 3) == a.at(1, 0, 2, 3));
    CHECK(y.at(1, 12, 2, 3) == b.at(1, 0, 2, 3));
    CHECK(y.at(0, 35, 0, 0) == b.at(0, 23, 0, 0));
  }

  TEST_CASE("single input is returned unchanged") {
    std::mt19937_64 rng(2);
    const auto a = RandomTensor<float>({3, 5, 2, 2}, rng);
    const Tensor<float>* in[] = {&a};
    CHECK(ConcatChannels<float>(in) == a);
  }

  TEST_CASE("split of an all-ones gradient") {
    const Tensor<float> ones({4, 8, 2, 2}, 1.f);
    const int channels[] = {3, 5};
    const auto parts = SplitChannels<float>(ones, channels);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0] == Tensor<float>({4, 3, 2, 2}, 1.f));
    CHECK(parts[1] == Tensor<float>({4, 5, 2, 2}, 1.f));
  }

  TEST_CASE("split then concat reproduces the gradient exactly") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> channels(RandInt(rng, 1, 5));
      for (int& c : channels) c = RandInt(rng, 1, 6);
      const int total = std::accumulate(channels.begin(), channels.end(), 0);
      const auto g = RandomTensor<float>({RandInt(rng, 1, 3), total, 2, 3}, rng);
      const auto parts = SplitChannels<float>(g, channels);
      std::vector<const Tensor<float>*> ptrs;
      for (const auto& p : parts) ptrs.push_back(&p);
      CHECK(ConcatChannels<float>(ptrs) == g);
    }
  }

  TEST_CASE("mismatched extents are rejected") {
    const Tensor<float> a({2, 3, 4, 4}), b({2, 3, 4, 5}), c({3, 3, 4, 4});
    const Tensor<float>* ab[] = {&a, &b};
    const Tensor<float>* ac[] = {&a, &c};
    CHECK_THROWS_AS(ConcatChannels<float>(ab), ShapeError);
    CHECK_THROWS_AS(ConcatChannels<float>(ac), ShapeError);
    CHECK_THROWS_AS(ConcatChannels<float>(std::span<const Tensor<float>* const>{}), ShapeError);
    const int wrong[] = {1, 1};
    CHECK_THROWS_AS(SplitChannels<float>(a, wrong), ShapeError);
  }
}

TEST_SUITE("conv2d") {
  TEST_CASE("11x40 with a 3x3 kernel and no padding gives 9x38") {
    const Tensor<float> x({1, 3, 11, 40}), w({16, 3, 3, 3});
    CHECK(Conv2d(x, w, {1, 0}).shape() == Shape{1, 16, 9, 38});
    CHECK(Conv2dOutputShape({5, 3, 11, 40}, {16, 3, 3, 3}, {1, 1}) == Shape{5, 16, 11, 40});
    CHECK(Conv2dOutputShape({1, 1, 7, 7}, {1, 1, 3, 3}, {2, 0}) == Shape{1, 1, 3, 3});
  }

  TEST_CASE("1x1 all-ones kernel on one channel is the identity") {
    std::mt19937_64 rng(4);
    const auto x = RandomTensor<float>({2, 1, 5, 6}, rng);
    CHECK(Conv2d(x, Tensor<float>({1, 1, 1, 1}, 1.f), {1, 0}) == x);
  }

  TEST_CASE("2x2 diagonal kernel over [[1,2],[3,4]] is 5") {
    const Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    const Tensor<double> w({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 1});
    const auto y = Conv2d(x, w, {1, 0});
    REQUIRE(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 5.0);
  }

  TEST_CASE("matches direct summation on random problems") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const int k = trial % 2 ? 3 : 1, pad = k == 3 ? trial % 4 / 2 : 0;
      const Shape xs{RandInt(rng, 1, 3), RandInt(rng, 1, 4), RandInt(rng, 3, 7), RandInt(rng, 3, 7)};
      const auto x = RandomTensor<double>(xs, rng);
      const auto w = RandomTensor<double>({RandInt(rng, 1, 4), xs[1], k, k}, rng);
      CHECK(testing::MaxAbsDiff(Conv2d(x, w, {1, pad}), NaiveConv(x, w, pad)) < 1e-12);
    }
  }

  TEST_CASE("channel mismatch and oversize kernels are rejected") {
    const Tensor<float> x({1, 3, 5, 5});
    CHECK_THROWS_AS(Conv2d(x, Tensor<float>({4, 2, 3, 3}), {1, 1}), ShapeError);
    CHECK_THROWS_AS(Conv2d(Tensor<float>({1, 3, 2, 2}), Tensor<float>({4, 3, 3, 3}), {1, 0}),
                    ShapeError);
  }

  TEST_CASE("3x3 on 1x5x5 passes finite differences below 1e-5") {
    std::mt19937_64 rng(6);
    const auto x = RandomTensor<double>({1, 1, 5, 5}, rng);
    const auto w = RandomTensor<double>({2, 1, 3, 3}, rng);
    const auto r = RandomTensor<double>({1, 2, 5, 5}, rng);
    const auto g = Conv2dBackward(x, w, r, {1, 1});
    CHECK(FiniteDiffCheck([&](const TD& p) { return Dot(Conv2d(p, w, {1, 1}), r); }, x,
                          g.input, 1e-6) < 1e-5);
    CHECK(FiniteDiffCheck([&](const TD& p) { return Dot(Conv2d(x, p, {1, 1}), r); }, w,
                          g.kernel, 1e-6) < 1e-5);
  }
}

TEST_SUITE("batchnorm") {
  TEST_CASE("constant channels normalize to zero") {
    Tensor<float> x({4, 2, 3, 3});
    for (int n = 0; n < 4; ++n)
      for (int c = 0; c < 2; ++c)
        for (int h = 0; h < 3; ++h)
          for (int w = 0; w < 3; ++w) x.at(n, c, h, w) = c == 0 ? 3.f : -7.f;
    auto params = BatchNormParams<float>::Identity(2);
    const auto y = BatchNorm(x, params, Mode::kTrain, BatchNormOptions{});
    for (float v : y.data()) CHECK(v == 0.f);
  }

  TEST_CASE("batch {-1, +1} gives (x - mu) / sqrt(var + eps)") {
    const Tensor<double> x({2, 1, 1, 1}, std::vector<double>{-1, 1});
    auto params = BatchNormParams<double>::Identity(1);
    const auto y = BatchNorm(x, params, Mode::kTrain, BatchNormOptions{});
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y[0] == doctest::Approx(-expect).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(y[1]) < 1.0);
    // running statistics: 0.9 * old + 0.1 * batch
    CHECK(params.running_mean[0] == doctest::Approx(0.0));
    CHECK(params.running_var[0] == doctest::Approx(0.9 + 0.1 * 1.0));
  }

  TEST_CASE("infer mode with gamma 2, beta 3 maps 1 to 5") {
    auto params = BatchNormParams<double>::Identity(1);
    params.gamma[0] = 2;
    params.beta[0] = 3;
    const Tensor<double> x({1, 1, 1, 1}, std::vector<double>{1});
    const auto y = BatchNorm(x, params, Mode::kInfer, BatchNormOptions{});
    CHECK(y[0] == doctest::Approx(3 + 2 / std::sqrt(1 + 1e-5)).epsilon(1e-12));
    CHECK(y[0] == doctest::Approx(5.0).epsilon(1e-5));
    CHECK(params.running_var[0] == 1.0);
  }

  TEST_CASE("a single element per channel in train mode is degenerate") {
    auto params = BatchNormParams<float>::Identity(3);
    CHECK_THROWS_AS(BatchNorm(Tensor<float>({1, 3, 1, 1}), params, Mode::kTrain, BatchNormOptions{}),
                    ShapeError);
    CHECK_NOTHROW(BatchNorm(Tensor<float>({1, 3, 1, 1}), params, Mode::kInfer, BatchNormOptions{}));
  }

  TEST_CASE("infer mode refuses a non-positive running variance") {
    auto params = BatchNormParams<float>::Identity(1);
    params.running_var[0] = 0.f;
    CHECK_THROWS_AS(BatchNorm(Tensor<float>({1, 1, 2, 2}), params, Mode::kInfer, BatchNormOptions{}),
                    NumericError);
  }

  TEST_CASE("train-mode output has mean beta and unit variance") {
    std::mt19937_64 rng(7);
    const auto x = RandomTensor<double>({8, 3, 4, 5}, rng, 3.0);
    auto params = BatchNormParams<double>::Identity(3);
    params.beta[1] = 0.5;
    const auto y = BatchNorm(x, params, Mode::kTrain, BatchNormOptions{});
    for (int c = 0; c < 3; ++c) {
      double sum = 0, sq = 0;
      int count = 0;
      for (int n = 0; n < 8; ++n)
        for (int h = 0; h < 4; ++h)
          for (int w = 0; w < 5; ++w) {
            sum += y.at(n, c, h, w);
            ++count;
          }
      const double mean = sum / count;
      for (int n = 0; n < 8; ++n)
        for (int h = 0; h < 4; ++h)
          for (int w = 0; w < 5; ++w) sq += (y.at(n, c, h, w) - mean) * (y.at(n, c, h, w) - mean);
      CHECK(std::abs(mean - params.beta[c]) < 1e-5);
      CHECK(std::abs(sq / count - 1.0) < 1e-3);
    }
  }

  TEST_CASE("train mode with batch 8 passes finite differences below 1e-4") {
    std::mt19937_64 rng(8);
    const auto x = RandomTensor<double>({8, 2, 3, 3}, rng);
    auto params = BatchNormParams<double>::Identity(2);
    params.gamma = RandomTensor<double>({2}, rng);
    const auto r = RandomTensor<double>(x.shape(), rng);
    auto work = params;
    BatchNormCache<double> cache;
    BatchNorm(x, work, Mode::kTrain, BatchNormOptions{}, &cache);
    const auto g = BatchNormBackward(r, params, cache);
    const double err = FiniteDiffCheck(
        [&](const TD& p) {
          auto copy = params;
          return Dot(BatchNorm(p, copy, Mode::kTrain, BatchNormOptions{}), r);
        },
        x, g.input, 1e-6);
    CHECK(err < 1e-4);
  }

  TEST_CASE("infer-mode backward treats the statistics as constants") {
    std::mt19937_64 rng(9);
    const auto x = RandomTensor<double>({3, 2, 2, 2}, rng);
    auto params = BatchNormParams<double>::Identity(2);
    params.running_mean = RandomTensor<double>({2}, rng);
    params.running_var[0] = 2.0;
    params.gamma = RandomTensor<double>({2}, rng);
    const auto r = RandomTensor<double>(x.shape(), rng);
    BatchNormCache<double> cache;
    BatchNorm(x, std::as_const(params), BatchNormOptions{}, &cache);
    const auto g = BatchNormBackward(r, params, cache);
    CHECK(FiniteDiffCheck(
              [&](const TD& p) {
                return Dot(BatchNorm(p, std::as_const(params), BatchNormOptions{}), r);
              },
              x, g.input, 1e-6) < 1e-7);
  }
}

TEST_SUITE("relu") {
  TEST_CASE("[-1, 0, 2] -> [0, 0, 2]") {
    const Tensor<float> x({3}, std::vector<float>{-1, 0, 2});
    CHECK(Relu(x) == Tensor<float>({3}, std::vector<float>{0, 0, 2}));
    const Tensor<float> dy({3}, std::vector<float>{5, 5, 5});
    CHECK(ReluBackward(x, dy) == Tensor<float>({3}, std::vector<float>{0, 0, 5}));
  }

  TEST_CASE("negative inputs give zero output and zero gradient") {
    Tensor<float> x({2, 3}, -1.5f);
    CHECK(Relu(x) == Tensor<float>({2, 3}, 0.f));
    CHECK(ReluBackward(x, Tensor<float>({2, 3}, 1.f)) == Tensor<float>({2, 3}, 0.f));
  }

  TEST_CASE("idempotent") {
    std::mt19937_64 rng(10);
    const auto x = RandomTensor<float>({4, 5, 6}, rng);
    CHECK(Relu(Relu(x)) == Relu(x));
  }

  TEST_CASE("gradient exact away from zero") {
    std::mt19937_64 rng(11);
    TD x = RandomTensor<double>({3, 4}, rng);
    for (auto& v : x.data()) v += v > 0 ? 0.1 : -0.1;
    const auto r = RandomTensor<double>(x.shape(), rng);
    CHECK(FiniteDiffCheck([&](const TD& p) { return Dot(Relu(p), r); }, x,
                          ReluBackward(x, r), 1e-6) < 1e-7);
  }
}

TEST_SUITE("pooling") {
  TEST_CASE("9x38 -> 4x19 -> 2x9") {
    const Tensor<float> a({1, 2, 9, 38});
    const auto b = AvgPool2x2(a);
    CHECK(b.shape() == Shape{1, 2, 4, 19});
    CHECK(AvgPool2x2(b).shape() == Shape{1, 2, 2, 9});
  }

  TEST_CASE("window means with the odd edge dropped") {
    Tensor<double> x({1, 1, 3, 3});
    for (std::size_t i = 0; i < 9; ++i) x[i] = static_cast<double>(i);
    const auto y = AvgPool2x2(x);
    REQUIRE(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == doctest::Approx((0 + 1 + 3 + 4) / 4.0));
    const auto dx = AvgPool2x2Backward(x.shape(), Tensor<double>({1, 1, 1, 1}, 1.0));
    CHECK(dx == Tensor<double>({1, 1, 3, 3}, std::vector<double>{.25, .25, 0, .25, .25, 0, 0, 0, 0}));
  }

  TEST_CASE("constant input stays constant") {
    const Tensor<float> x({2, 3, 5, 7}, 2.5f);
    const auto pooled = AvgPool2x2(x), global = GlobalAvgPool(x);
    for (float v : pooled.data()) CHECK(v == 2.5f);
    for (float v : global.data()) CHECK(v == 2.5f);
    CHECK(GlobalAvgPool(Tensor<float>({1, 1, 2, 9}, 4.f))[0] == 4.f);
  }

  TEST_CASE("spatial extent below 2 is rejected") {
    CHECK_THROWS_AS(AvgPool2x2(Tensor<float>({1, 1, 1, 4})), ShapeError);
    CHECK_THROWS_AS(AvgPool2x2(Tensor<float>({1, 1, 4, 1})), ShapeError);
  }

  TEST_CASE("global pool of [3, 5] is 4; gradient is 1/(H W)") {
    const Tensor<double> x({1, 1, 1, 2}, std::vector<double>{3, 5});
    const auto y = GlobalAvgPool(x);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 4.0);
    const auto dx = GlobalAvgPoolBackward({2, 3, 2, 9}, Tensor<double>({2, 3, 1, 1}, 1.0));
    for (double v : dx.data()) CHECK(v == doctest::Approx(1.0 / 18));
  }
}

TEST_SUITE("linear") {
  TEST_CASE("identity weights") {
    std::mt19937_64 rng(12);
    const auto x = RandomTensor<double>({3, 4}, rng);
    Tensor<double> w({4, 4});
    for (int i = 0; i < 4; ++i) w[i * 4 + i] = 1;
    CHECK(Linear(x, w, Tensor<double>({4})) == x);
  }

  TEST_CASE("W=[[1,2]], b=[1], x=[3,4] -> 12") {
    const auto y = Linear(Tensor<double>({1, 2}, std::vector<double>{3, 4}),
                          Tensor<double>({1, 2}, std::vector<double>{1, 2}),
                          Tensor<double>({1}, std::vector<double>{1}));
    CHECK(y == Tensor<double>({1, 1}, std::vector<double>{12}));
  }

  TEST_CASE("a batch equals its rows processed separately") {
    std::mt19937_64 rng(13);
    const auto x = RandomTensor<float>({2, 5, 1, 1}, rng);
    const auto w = RandomTensor<float>({3, 5}, rng);
    const auto b = RandomTensor<float>({3}, rng);
    const auto both = Linear(x, w, b);
    for (int n = 0; n < 2; ++n) {
      Tensor<float> row({1, 5}, std::vector<float>(x.data().begin() + 5 * n, x.data().begin() + 5 * n + 5));
      const auto one = Linear(row, w, b);
      for (int o = 0; o < 3; ++o) CHECK(one[o] == both[n * 3 + o]);
    }
  }

  TEST_CASE("extent mismatch is rejected") {
    CHECK_THROWS_AS(Linear(Tensor<float>({2, 3}), Tensor<float>({4, 5}), Tensor<float>({4})),
                    ShapeError);
    CHECK_THROWS_AS(Linear(Tensor<float>({2, 5}), Tensor<float>({4, 5}), Tensor<float>({3})),
                    ShapeError);
  }
}

TEST_SUITE("softmax cross-entropy") {
  TEST_CASE("uniform logits give ln C") {
    const Tensor<double> logits({3, 7}, 0.25);
    const int labels[] = {0, 3, 6};
    const auto out = SoftmaxCrossEntropy(logits, labels);
    CHECK(out.loss == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  }

  TEST_CASE("logits [1000, 0] with label 0 do not overflow") {
    const Tensor<float> logits({1, 2}, std::vector<float>{1000, 0});
    const int labels[] = {0};
    const auto out = SoftmaxCrossEntropy(logits, labels);
    CHECK(std::isfinite(out.loss));
    CHECK(out.loss == doctest::Approx(0.0));
    CHECK(out.grad.AllFinite());
    const int other[] = {1};
    CHECK(SoftmaxCrossEntropy(logits, other).loss == doctest::Approx(1000.0));
  }

  TEST_CASE("rows of the softmax sum to 1") {
    std::mt19937_64 rng(14);
    const auto logits = RandomTensor<float>({6, 9}, rng, 10.0);
    const auto p = Softmax(logits);
    for (int n = 0; n < 6; ++n) {
      double s = 0;
      for (int c = 0; c < 9; ++c) s += p[n * 9 + c];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }

  TEST_CASE("4-class gradient matches finite differences below 1e-6") {
    std::mt19937_64 rng(15);
    const auto logits = RandomTensor<double>({5, 4}, rng);
    const int labels[] = {0, 1, 2, 3, 1};
    const auto out = SoftmaxCrossEntropy(logits, labels);
    CHECK(FiniteDiffCheck([&](const TD& p) { return SoftmaxCrossEntropy(p, labels).loss; },
                          logits, out.grad, 1e-6) < 1e-6);
  }

  TEST_CASE("labels outside [0, C) are rejected") {
    const Tensor<float> logits({2, 3});
    const int high[] = {0, 3};
    const int low[] = {-1, 0};
    const int short_list[] = {0};
    CHECK_THROWS_AS(SoftmaxCrossEntropy(logits, high), LabelError);
    CHECK_THROWS_AS(SoftmaxCrossEntropy(logits, low), LabelError);
    CHECK_THROWS_AS(SoftmaxCrossEntropy(logits, short_list), ShapeError);
  }
}

TEST_SUITE("finite differences") {
  TEST_CASE("step outside [1e-7, 1e-4] is a config error") {
    const TD x({2}, 1.0);
    auto f = [](const TD& p) { return p[0] * p[1]; };
    CHECK_THROWS_AS(FiniteDiffCheck(f, x, x, 1e-3), ConfigError);
    CHECK_THROWS_AS(FiniteDiffCheck(f, x, x, 1e-8), ConfigError);
  }

  TEST_CASE("non-finite loss is a numeric error") {
    const TD x({2}, 1.0);
    CHECK_THROWS_AS(FiniteDiffCheck([](const TD&) { return NAN; }, x, x, 1e-6), NumericError);
  }

  TEST_CASE("detects a wrong gradient") {
    const TD x({2}, std::vector<double>{2, 3});
    auto f = [](const TD& p) { return p[0] * p[1]; };
    CHECK(FiniteDiffCheck(f, x, TD({2}, std::vector<double>{3, 2}), 1e-6) < 1e-8);
    CHECK(FiniteDiffCheck(f, x, TD({2}, std::vector<double>{3, 2.1}), 1e-6) > 0.04);
  }

  TEST_CASE("every layer primitive passes on random instances") {
    for (const auto& r : RunLayerGradchecks(4, 99)) {
      INFO(r.name);
      CHECK(r.instances == 4);
      CHECK(r.max_error < kGradcheckTolerance);
    }
  }
}
