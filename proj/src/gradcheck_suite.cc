// src/gradcheck_suite.cc

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
#include <cmath>
#include <random>

#include "densenet/gradcheck.h"
#include "densenet/layers.h"
#include "densenet/model.h"

namespace densenet {

namespace {

using TensorD = Tensor<double>;

TensorD Random(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  TensorD t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// Uniform magnitude in [0.1, 1] with random sign, so no entry sits near 0.
TensorD AwayFromZero(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  TensorD t(shape);
  for (auto& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

int Pick(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

class Recorder {
 public:
  explicit Recorder(std::string name) { result_.name = std::move(name); }
  void Add(double err) {
    result_.max_error = std::max(result_.max_error, err);
  }
  void NextInstance() { ++result_.instances; }
  GradcheckResult result() const { return result_; }

 private:
  GradcheckResult result_;
};

GradcheckResult CheckConv(int kernel, int pad, int instances, std::mt19937_64& rng,
                          double eps) {
  Recorder rec("conv" + std::to_string(kernel) + "x" + std::to_string(kernel));
  for (int i = 0; i < instances; ++i) {
    const Conv2dSpec spec{1, pad};
    const Shape xs{Pick(rng, 1, 3), Pick(rng, 1, 4), Pick(rng, kernel, 6), Pick(rng, kernel, 6)};
    const TensorD x = Random(xs, rng);
    const TensorD w = Random({Pick(rng, 1, 4), xs[1], kernel, kernel}, rng);
    const TensorD r = Random(Conv2dOutputShape(xs, w.shape(), spec), rng);
    const auto g = Conv2dBackward(x, w, r, spec);
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(Conv2d(p, w, spec), r); },
                            x, g.input, eps));
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(Conv2d(x, p, spec), r); },
                            w, g.kernel, eps));
    rec.NextInstance();
  }
  return rec.result();
}

GradcheckResult CheckBatchNorm(int instances, std::mt19937_64& rng, double eps) {
  Recorder rec("batchnorm");
  const BatchNormOptions opts;
  for (int i = 0; i < instances; ++i) {
    // Two values per channel normalize to +-1 whatever they are, leaving an
    // input gradient that is pure rounding noise; use at least four.
    const Shape xs{Pick(rng, 2, 4), Pick(rng, 1, 4), Pick(rng, 2, 4), Pick(rng, 1, 4)};
    const int c = xs[1];
    const TensorD x = Random(xs, rng, 2.0);
    BatchNormParams<double> params = BatchNormParams<double>::Identity(c);
    params.gamma = AwayFromZero({c}, rng);
    params.beta = Random({c}, rng);
    const TensorD r = Random(xs, rng);
    auto forward = [&](const TensorD& in, const BatchNormParams<double>& p) {
      BatchNormParams<double> copy = p;
      return Dot(BatchNorm(in, copy, Mode::kTrain, opts), r);
    };
    BatchNormParams<double> work = params;
    BatchNormCache<double> cache;
    BatchNorm(x, work, Mode::kTrain, opts, &cache);
    const auto g = BatchNormBackward(r, params, cache);
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return forward(p, params); }, x,
                            g.input, eps));
    rec.Add(FiniteDiffCheck(
        [&](const TensorD& p) {
          auto q = params;
          q.gamma = p;
          return forward(x, q);
        },
        params.gamma, g.gamma, eps));
    rec.Add(FiniteDiffCheck(
        [&](const TensorD& p) {
          auto q = params;
          q.beta = p;
          return forward(x, q);
        },
        params.beta, g.beta, eps));
    rec.NextInstance();
  }
  return rec.result();
}

GradcheckResult CheckRelu(int instances, std::mt19937_64& rng, double eps) {
  Recorder rec("relu");
  for (int i = 0; i < instances; ++i) {
    const Shape xs{Pick(rng, 1, 3), Pick(rng, 1, 3), Pick(rng, 1, 5), Pick(rng, 1, 5)};
    const TensorD x = AwayFromZero(xs, rng);
    const TensorD r = Random(xs, rng);
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(Relu(p), r); }, x,
                            ReluBackward(Relu(x), r), eps));
    rec.NextInstance();
  }
  return rec.result();
}

GradcheckResult CheckAvgPool(int instances, std::mt19937_64& rng, double eps) {
  Recorder rec("avgpool2x2");
  for (int i = 0; i < instances; ++i) {
    const Shape xs{Pick(rng, 1, 3), Pick(rng, 1, 3), Pick(rng, 2, 7), Pick(rng, 2, 7)};
    const TensorD x = Random(xs, rng);
    const TensorD r = Random(AvgPool2x2(x).shape(), rng);
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(AvgPool2x2(p), r); }, x,
                            AvgPool2x2Backward(xs, r), eps));
    rec.NextInstance();
  }
  return rec.result();
}

GradcheckResult CheckGlobalPool(int instances, std::mt19937_64& rng, double eps) {
  Recorder rec("global_avgpool");
  for (int i = 0; i < instances; ++i) {
    const Shape xs{Pick(rng, 1, 3), Pick(rng, 1, 4), Pick(rng, 1, 5), Pick(rng, 1, 5)};
    const TensorD x = Random(xs, rng);
    const TensorD r = Random({xs[0], xs[1], 1, 1}, rng);
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(GlobalAvgPool(p), r); }, x,
                            GlobalAvgPoolBackward(xs, r), eps));
    rec.NextInstance();
  }
  return rec.result();
}

GradcheckResult CheckLinear(int instances, std::mt19937_64& rng, double eps) {
  Recorder rec("linear");
  for (int i = 0; i < instances; ++i) {
    const int n = Pick(rng, 1, 4), in = Pick(rng, 1, 6), out = Pick(rng, 1, 5);
    const TensorD x = Random({n, in, 1, 1}, rng);
    const TensorD w = Random({out, in}, rng);
    const TensorD b = Random({out}, rng);
    const TensorD r = Random({n, out}, rng);
    const auto g = LinearBackward(x, w, r);
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(Linear(p, w, b), r); }, x,
                            g.input, eps));
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(Linear(x, p, b), r); }, w,
                            g.weight, eps));
    rec.Add(FiniteDiffCheck([&](const TensorD& p) { return Dot(Linear(x, w, p), r); }, b,
                            g.bias, eps));
    rec.NextInstance();
  }
  return rec.result();
}

GradcheckResult CheckSoftmax(int instances, std::mt19937_64& rng, double eps) {
  Recorder rec("softmax_xent");
  for (int i = 0; i < instances; ++i) {
    const int n = Pick(rng, 1, 4), c = Pick(rng, 2, 6);
    const TensorD logits = Random({n, c}, rng, 2.0);
    std::vector<int> labels(n);
    for (int& l : labels) l = Pick(rng, 0, c - 1);
    const auto loss = SoftmaxCrossEntropy(logits, std::span<const int>(labels));
    rec.Add(FiniteDiffCheck(
        [&](const TensorD& p) {
          return SoftmaxCrossEntropy(p, std::span<const int>(labels)).loss;
        },
        logits, loss.grad, eps));
    rec.NextInstance();
  }
  return rec.result();
}

std::string StageLabel(const StageRecord& s, int block) {
  switch (s.kind) {
    case StageKind::kInitialConv: return "conv";
    case StageKind::kDenseBlock: return "block" + std::to_string(block);
    case StageKind::kTransition: return "transition" + std::to_string(block);
    case StageKind::kClassifier: return "classifier";
  }
  return "?";
}

}  // namespace

std::vector<GradcheckResult> RunLayerGradchecks(int instances, std::uint64_t seed,
                                                double eps) {
  if (instances < 1) throw ConfigError("gradient check needs at least one instance");
  std::mt19937_64 rng(seed);
  return {CheckConv(3, 1, instances, rng, eps), CheckConv(1, 0, instances, rng, eps),
          CheckBatchNorm(instances, rng, eps),  CheckRelu(instances, rng, eps),
          CheckAvgPool(instances, rng, eps),    CheckGlobalPool(instances, rng, eps),
          CheckLinear(instances, rng, eps),     CheckSoftmax(instances, rng, eps)};
}

std::vector<GradcheckResult> RunModelGradcheck(const DenseNetConfig& config, int batch,
                                               std::uint64_t seed, double eps) {
  if (batch < 2) throw ConfigError("model gradient check needs a batch of at least 2");
  Model<double> model = BuildModel<double>(config, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const TensorD x = Random(
      {batch, config.input_channels, config.input_height, config.input_width}, rng);
  std::vector<int> labels(batch);
  for (int& l : labels) l = Pick(rng, 0, config.num_classes - 1);

  auto loss_of = [&](Model<double>& m, const TensorD& in) {
    return SoftmaxCrossEntropy(m.Forward(in, Mode::kTrain), std::span<const int>(labels)).loss;
  };
  ForwardTrace<double> trace;
  Model<double> reference = model;
  const TensorD logits = reference.Forward(x, Mode::kTrain, &trace);
  const auto loss = SoftmaxCrossEntropy(logits, std::span<const int>(labels));
  const TensorD dx = reference.Backward(trace, loss.grad);

  const auto& stages = model.plan().stages;
  std::vector<Recorder> per_stage;
  for (std::size_t s = 0, block = 0; s < stages.size(); ++s) {
    if (stages[s].kind == StageKind::kDenseBlock) ++block;
    per_stage.emplace_back(StageLabel(stages[s], static_cast<int>(block)));
  }

  std::vector<ParameterRef<double>> analytic, probes;
  reference.ForEachParameter([&](const ParameterRef<double>& p) {
    if (p.grad) analytic.push_back(p);
  });
  model.ForEachParameter([&](const ParameterRef<double>& p) {
    if (p.grad) probes.push_back(p);
  });
  for (std::size_t i = 0; i < probes.size(); ++i) {
    Tensor<double>* slot = probes[i].value;
    const TensorD saved = *slot;
    const double err = FiniteDiffCheck(
        [&](const TensorD& p) {
          *slot = p;
          return loss_of(model, x);
        },
        saved, *analytic[i].grad, eps);
    *slot = saved;
    per_stage.at(probes[i].stage).Add(err);
  }
  Recorder input("input");
  input.Add(FiniteDiffCheck([&](const TensorD& p) { return loss_of(model, p); }, x, dx, eps));

  std::vector<GradcheckResult> out;
  for (auto& r : per_stage) {
    r.NextInstance();
    out.push_back(r.result());
  }
  input.NextInstance();
  out.push_back(input.result());
  return out;
}

}  // namespace densenet
