// src/model.cc

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

#include "densenet/model.h"

#include <cmath>
#include <random>

namespace densenet {

namespace {

template <typename T>
Tensor<T> HeNormal(Shape shape, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(normal(rng));
  return t;
}

template <typename T>
NormReluConv<T> MakeUnit(int in, int out, int kernel, int pad,
                         std::mt19937_64& rng) {
  NormReluConv<T> unit;
  unit.bn = BatchNormParams<T>::Identity(in);
  unit.kernel = HeNormal<T>({out, in, kernel, kernel}, in * kernel * kernel, rng);
  unit.spec = {1, pad};
  unit.d_gamma = Tensor<T>({in});
  unit.d_beta = Tensor<T>({in});
  unit.d_kernel = Tensor<T>(unit.kernel.shape());
  return unit;
}

template <typename T>
Tensor<T> UnitForward(NormReluConv<T>& unit, const Tensor<T>& x, Mode mode,
                      const BatchNormOptions& options, UnitTrace<T>* trace) {
  Tensor<T> activated =
      Relu(BatchNorm(x, unit.bn, mode, options, trace ? &trace->bn : nullptr));
  Tensor<T> y = Conv2d(activated, unit.kernel, unit.spec);
  if (trace) trace->activated = std::move(activated);
  return y;
}

template <typename T>
Tensor<T> UnitBackward(NormReluConv<T>& unit, const UnitTrace<T>& trace,
                       const Tensor<T>& dy) {
  auto conv = Conv2dBackward(trace.activated, unit.kernel, dy, unit.spec);
  unit.d_kernel = std::move(conv.kernel);
  auto bn = BatchNormBackward(ReluBackward(trace.activated, conv.input), unit.bn,
                              trace.bn);
  unit.d_gamma = std::move(bn.gamma);
  unit.d_beta = std::move(bn.beta);
  return std::move(bn.input);
}

template <typename T>
void AddInto(Tensor<T>& acc, const Tensor<T>& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

template <typename T>
std::vector<const Tensor<T>*> Gather(const std::vector<Tensor<T>>& features,
                                     const std::vector<int>& sources) {
  std::vector<const Tensor<T>*> inputs;
  inputs.reserve(sources.size());
  for (int s : sources) inputs.push_back(&features.at(s));
  return inputs;
}

template <typename T, typename U>
NormReluConv<U> CastUnit(const NormReluConv<T>& u) {
  NormReluConv<U> out;
  out.bn = {u.bn.gamma.template Cast<U>(), u.bn.beta.template Cast<U>(),
            u.bn.running_mean.template Cast<U>(),
            u.bn.running_var.template Cast<U>()};
  out.kernel = u.kernel.template Cast<U>();
  out.spec = u.spec;
  out.d_gamma = u.d_gamma.template Cast<U>();
  out.d_beta = u.d_beta.template Cast<U>();
  out.d_kernel = u.d_kernel.template Cast<U>();
  return out;
}

int BlockStage(int b) { return 1 + 2 * b; }
int TransitionStage(int b) { return 2 + 2 * b; }

}  // namespace

template <typename T>
Model<T> BuildModel(const DenseNetConfig& config, std::uint64_t seed) {
  Model<T> model;
  model.table_ = PlanArchitecture(config);
  const auto& table = model.table_;
  std::mt19937_64 rng(seed);
  const int k = config.growth_rate;

  model.initial_kernel_ = HeNormal<T>(
      {config.first_conv_channels, config.input_channels, 3, 3},
      config.input_channels * 9, rng);
  model.d_initial_kernel_ = Tensor<T>(model.initial_kernel_.shape());

  for (const auto& stage : table.stages) {
    if (stage.kind == StageKind::kDenseBlock) {
      DenseBlock<T> block;
      block.input_channels = stage.in_channels;
      for (std::size_t n = 0; n < stage.layer_input_channels.size(); ++n) {
        const int in = stage.layer_input_channels[n];
        DenseLayer<T> layer;
        int conv_in = in;
        if (config.variant == Variant::kBC) {
          layer.bottleneck = MakeUnit<T>(in, 4 * k, 1, 0, rng);
          conv_in = 4 * k;
        }
        layer.conv = MakeUnit<T>(conv_in, k, 3, 1, rng);
        for (std::size_t s = 0; s <= n; ++s) layer.sources.push_back(static_cast<int>(s));
        block.layers.push_back(std::move(layer));
      }
      model.blocks_.push_back(std::move(block));
    } else if (stage.kind == StageKind::kTransition) {
      model.transitions_.push_back(
          MakeUnit<T>(stage.in_channels, stage.out_channels, 1, 0, rng));
    } else if (stage.kind == StageKind::kClassifier) {
      auto& head = model.head_;
      head.bn = BatchNormParams<T>::Identity(stage.in_channels);
      head.weight = HeNormal<T>({config.num_classes, stage.in_channels},
                                stage.in_channels, rng);
      head.bias = Tensor<T>({config.num_classes});
      head.d_gamma = Tensor<T>({stage.in_channels});
      head.d_beta = Tensor<T>({stage.in_channels});
      head.d_weight = Tensor<T>(head.weight.shape());
      head.d_bias = Tensor<T>(head.bias.shape());
    }
  }
  return model;
}

template <typename T>
Tensor<T> Model<T>::Run(const Tensor<T>& batch, Mode mode,
                        ForwardTrace<T>* trace,
                        std::vector<Shape>* stage_shapes) {
  const auto& cfg = config();
  const Shape want{batch.rank() == 4 ? batch.dim(0) : 0, cfg.input_channels,
                   cfg.input_height, cfg.input_width};
  if (batch.shape() != want)
    throw ShapeError("input batch " + ShapeString(batch.shape()) +
                     " does not match model geometry (N," +
                     std::to_string(cfg.input_channels) + "," +
                     std::to_string(cfg.input_height) + "," +
                     std::to_string(cfg.input_width) + ")");
  const auto& opts = cfg.batchnorm;
  auto record = [&](const Tensor<T>& t) {
    if (stage_shapes) stage_shapes->push_back({t.dim(1), t.dim(2), t.dim(3)});
  };
  if (trace) {
    *trace = ForwardTrace<T>{};
    trace->input = batch;
  }

  Tensor<T> x = Conv2d(batch, initial_kernel_, {1, 0});
  record(x);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& block = blocks_[b];
    std::vector<Tensor<T>> features;
    features.reserve(block.layers.size() + 1);
    features.push_back(std::move(x));
    BlockTrace<T>* bt = nullptr;
    if (trace) {
      trace->blocks.emplace_back();
      bt = &trace->blocks.back();
      bt->layers.resize(block.layers.size());
    }
    for (std::size_t n = 0; n < block.layers.size(); ++n) {
      auto& layer = block.layers[n];
      const auto inputs = Gather(features, layer.sources);
      Tensor<T> h = ConcatChannels<T>(inputs);
      LayerTrace<T>* lt = bt ? &bt->layers[n] : nullptr;
      if (layer.bottleneck) {
        if (lt) lt->bottleneck.emplace();
        h = UnitForward(*layer.bottleneck, h, mode, opts,
                        lt ? &*lt->bottleneck : nullptr);
      }
      features.push_back(UnitForward(layer.conv, h, mode, opts,
                                     lt ? &lt->conv : nullptr));
    }
    std::vector<const Tensor<T>*> all;
    for (const auto& f : features) all.push_back(&f);
    x = ConcatChannels<T>(all);
    if (bt) bt->features = std::move(features);
    record(x);

    if (b + 1 == blocks_.size()) break;
    UnitTrace<T>* tt = nullptr;
    if (trace) {
      trace->transitions.emplace_back();
      tt = &trace->transitions.back();
    }
    Tensor<T> pre = UnitForward(transitions_[b], x, mode, opts, tt);
    if (trace) trace->transition_pre_pool.push_back(pre.shape());
    x = AvgPool2x2(pre);
    record(x);
  }

  Tensor<T> activated = Relu(BatchNorm(x, head_.bn, mode, opts,
                                       trace ? &trace->head.bn : nullptr));
  Tensor<T> pooled = GlobalAvgPool(activated);
  Tensor<T> logits = Linear(pooled, head_.weight, head_.bias);
  if (stage_shapes) stage_shapes->push_back({logits.dim(1), pooled.dim(2), pooled.dim(3)});
  if (trace) {
    trace->head.activated = std::move(activated);
    trace->pooled = std::move(pooled);
  }
  return logits;
}

template <typename T>
Tensor<T> Model<T>::Forward(const Tensor<T>& batch, Mode mode,
                            ForwardTrace<T>* trace) {
  return Run(batch, mode, trace, nullptr);
}

template <typename T>
Tensor<T> Model<T>::Infer(const Tensor<T>& batch) const {
  // Infer mode only reads parameters and running statistics.
  return const_cast<Model*>(this)->Run(batch, Mode::kInfer, nullptr, nullptr);
}

template <typename T>
std::vector<Shape> Model<T>::RealizedStageShapes(const Tensor<T>& batch) const {
  std::vector<Shape> shapes;
  const_cast<Model*>(this)->Run(batch, Mode::kInfer, nullptr, &shapes);
  return shapes;
}

template <typename T>
Tensor<T> Model<T>::Backward(const ForwardTrace<T>& trace,
                             const Tensor<T>& dlogits) {
  if (trace.blocks.size() != blocks_.size())
    throw ShapeError("backward needs the trace of a train-mode forward");
  // Classifier.
  auto lin = LinearBackward(trace.pooled, head_.weight, dlogits);
  head_.d_weight = std::move(lin.weight);
  head_.d_bias = std::move(lin.bias);
  Tensor<T> dact = GlobalAvgPoolBackward(trace.head.activated.shape(),
                                         lin.input.Reshaped(trace.pooled.shape()));
  auto bn = BatchNormBackward(ReluBackward(trace.head.activated, dact), head_.bn,
                              trace.head.bn);
  head_.d_gamma = std::move(bn.gamma);
  head_.d_beta = std::move(bn.beta);
  Tensor<T> grad = std::move(bn.input);

  for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) {
    if (b + 1 < static_cast<int>(blocks_.size())) {
      grad = AvgPool2x2Backward(trace.transition_pre_pool[b], grad);
      grad = UnitBackward(transitions_[b], trace.transitions[b], grad);
    }
    auto& block = blocks_[b];
    const auto& bt = trace.blocks[b];
    std::vector<int> channels;
    for (const auto& f : bt.features) channels.push_back(f.dim(1));
    std::vector<Tensor<T>> grads = SplitChannels<T>(grad, channels);
    for (int n = static_cast<int>(block.layers.size()) - 1; n >= 0; --n) {
      auto& layer = block.layers[n];
      const auto& lt = bt.layers[n];
      Tensor<T> g = UnitBackward(layer.conv, lt.conv, grads[n + 1]);
      if (layer.bottleneck) g = UnitBackward(*layer.bottleneck, *lt.bottleneck, g);
      std::vector<int> source_channels;
      for (int s : layer.sources) source_channels.push_back(channels[s]);
      auto parts = SplitChannels<T>(g, source_channels);
      for (std::size_t i = 0; i < parts.size(); ++i)
        AddInto(grads[layer.sources[i]], parts[i]);
    }
    grad = std::move(grads[0]);
  }
  auto conv = Conv2dBackward(trace.input, initial_kernel_, grad, {1, 0});
  d_initial_kernel_ = std::move(conv.kernel);
  return std::move(conv.input);
}

template <typename T>
void Model<T>::ForEachParameter(
    const std::function<void(const ParameterRef<T>&)>& fn) {
  auto unit = [&](NormReluConv<T>& u, const std::string& prefix, int stage) {
    fn({prefix + ".bn.gamma", stage, &u.bn.gamma, &u.d_gamma});
    fn({prefix + ".bn.beta", stage, &u.bn.beta, &u.d_beta});
    fn({prefix + ".bn.running_mean", stage, &u.bn.running_mean, nullptr});
    fn({prefix + ".bn.running_var", stage, &u.bn.running_var, nullptr});
    fn({prefix + ".conv.kernel", stage, &u.kernel, &u.d_kernel});
  };
  fn({"conv0.kernel", 0, &initial_kernel_, &d_initial_kernel_});
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string block = "block" + std::to_string(b + 1);
    for (std::size_t n = 0; n < blocks_[b].layers.size(); ++n) {
      auto& layer = blocks_[b].layers[n];
      const std::string name = block + ".layer" + std::to_string(n + 1);
      if (layer.bottleneck) unit(*layer.bottleneck, name + ".bottleneck", BlockStage(b));
      unit(layer.conv, name, BlockStage(b));
    }
    if (b < transitions_.size())
      unit(transitions_[b], "transition" + std::to_string(b + 1), TransitionStage(b));
  }
  const int last = static_cast<int>(table_.stages.size()) - 1;
  fn({"head.bn.gamma", last, &head_.bn.gamma, &head_.d_gamma});
  fn({"head.bn.beta", last, &head_.bn.beta, &head_.d_beta});
  fn({"head.bn.running_mean", last, &head_.bn.running_mean, nullptr});
  fn({"head.bn.running_var", last, &head_.bn.running_var, nullptr});
  fn({"head.fc.weight", last, &head_.weight, &head_.d_weight});
  fn({"head.fc.bias", last, &head_.bias, &head_.d_bias});
}

template <typename T>
void Model<T>::ForEachParameter(
    const std::function<void(const std::string&, int, const Tensor<T>&, bool)>& fn)
    const {
  const_cast<Model*>(this)->ForEachParameter([&](const ParameterRef<T>& p) {
    fn(p.name, p.stage, *p.value, p.grad != nullptr);
  });
}

template <typename T>
void Model<T>::ZeroGradients() {
  ForEachParameter([](const ParameterRef<T>& p) {
    if (p.grad) p.grad->Fill(T(0));
  });
}

template <typename T>
template <typename U>
Model<U> Model<T>::Cast() const {
  Model<U> out;
  out.table_ = table_;
  out.initial_kernel_ = initial_kernel_.template Cast<U>();
  out.d_initial_kernel_ = d_initial_kernel_.template Cast<U>();
  for (const auto& block : blocks_) {
    DenseBlock<U> nb;
    nb.input_channels = block.input_channels;
    for (const auto& layer : block.layers) {
      DenseLayer<U> nl;
      if (layer.bottleneck) nl.bottleneck = CastUnit<T, U>(*layer.bottleneck);
      nl.conv = CastUnit<T, U>(layer.conv);
      nl.sources = layer.sources;
      nb.layers.push_back(std::move(nl));
    }
    out.blocks_.push_back(std::move(nb));
  }
  for (const auto& t : transitions_) out.transitions_.push_back(CastUnit<T, U>(t));
  out.head_.bn = {head_.bn.gamma.template Cast<U>(), head_.bn.beta.template Cast<U>(),
                  head_.bn.running_mean.template Cast<U>(),
                  head_.bn.running_var.template Cast<U>()};
  out.head_.weight = head_.weight.template Cast<U>();
  out.head_.bias = head_.bias.template Cast<U>();
  out.head_.d_gamma = head_.d_gamma.template Cast<U>();
  out.head_.d_beta = head_.d_beta.template Cast<U>();
  out.head_.d_weight = head_.d_weight.template Cast<U>();
  out.head_.d_bias = head_.d_bias.template Cast<U>();
  return out;
}

template <typename T>
ParameterCount CountParameters(const Model<T>& model) {
  ParameterCount count;
  count.per_stage.assign(model.plan().stages.size(), 0);
  model.ForEachParameter(
      [&](const std::string&, int stage, const Tensor<T>& value, bool trainable) {
        if (!trainable) return;
        count.per_stage.at(stage) += static_cast<std::int64_t>(value.size());
        count.total += static_cast<std::int64_t>(value.size());
      });
  return count;
}

template <typename T>
std::int64_t WiringEdgeCount(const DenseBlock<T>& block) {
  std::int64_t edges = 0;
  for (const auto& layer : block.layers) edges += static_cast<std::int64_t>(layer.sources.size());
  return edges;
}

template class Model<float>;
template class Model<double>;
template Model<float> BuildModel<float>(const DenseNetConfig&, std::uint64_t);
template Model<double> BuildModel<double>(const DenseNetConfig&, std::uint64_t);
template Model<double> Model<float>::Cast<double>() const;
template Model<float> Model<double>::Cast<float>() const;
template Model<float> Model<float>::Cast<float>() const;
template Model<double> Model<double>::Cast<double>() const;
template ParameterCount CountParameters<float>(const Model<float>&);
template ParameterCount CountParameters<double>(const Model<double>&);
template std::int64_t WiringEdgeCount<float>(const DenseBlock<float>&);
template std::int64_t WiringEdgeCount<double>(const DenseBlock<double>&);

}  // namespace densenet
