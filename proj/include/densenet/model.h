// include/densenet/model.h

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

#ifndef DENSENET_MODEL_H_
#define DENSENET_MODEL_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "densenet/architecture.h"
#include "densenet/layers.h"

namespace densenet {

/// BN -> ReLU -> convolution, the composite unit used inside dense blocks,
/// bottlenecks and transitions.
template <typename T>
struct NormReluConv {
  BatchNormParams<T> bn;
  Tensor<T> kernel;  // out x in x k x k
  Conv2dSpec spec;
  Tensor<T> d_gamma, d_beta, d_kernel;
};

template <typename T>
struct DenseLayer {
  std::optional<NormReluConv<T>> bottleneck;  // variant BC only
  NormReluConv<T> conv;                       // 3x3, pad 1, growth-rate maps
  /// Indices into the block's feature list this layer concatenates:
  /// 0 is the block input, j >= 1 is the output of layer j.
  std::vector<int> sources;
};

template <typename T>
struct DenseBlock {
  int input_channels = 0;
  std::vector<DenseLayer<T>> layers;
};

template <typename T>
struct Classifier {
  BatchNormParams<T> bn;
  Tensor<T> weight;  // classes x channels
  Tensor<T> bias;    // classes
  Tensor<T> d_gamma, d_beta, d_weight, d_bias;
};

/// Named view of one parameter tensor. `grad` is null for running
/// statistics, which are stored and checkpointed but not trained.
template <typename T>
struct ParameterRef {
  std::string name;
  int stage = 0;  // index into ArchitectureTable::stages
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
struct ForwardTrace;
template <typename T>
class Model;
template <typename T>
Model<T> BuildModel(const DenseNetConfig& config, std::uint64_t seed);

/// Executable network for one DenseNetConfig. Every dense-block layer reads
/// the concatenation of the sources listed in its wiring, which the builder
/// fills with the block input and all earlier layer outputs.
template <typename T>
class Model {
 public:
  const DenseNetConfig& config() const { return table_.config; }
  const ArchitectureTable& plan() const { return table_; }
  const std::vector<DenseBlock<T>>& blocks() const { return blocks_; }
  std::vector<DenseBlock<T>>& mutable_blocks() { return blocks_; }

  /// Returns logits N x classes. Train mode uses batch statistics, updates
  /// running statistics and, if `trace` is given, records what backward
  /// needs. Infer mode does not modify the model.
  Tensor<T> Forward(const Tensor<T>& batch, Mode mode,
                    ForwardTrace<T>* trace = nullptr);
  Tensor<T> Infer(const Tensor<T>& batch) const;

  /// Fills every parameter gradient from d(loss)/d(logits) and returns the
  /// gradient with respect to the input batch.
  Tensor<T> Backward(const ForwardTrace<T>& trace, const Tensor<T>& dlogits);

  /// Visits every parameter tensor in a fixed order.
  void ForEachParameter(const std::function<void(const ParameterRef<T>&)>& fn);
  void ForEachParameter(
      const std::function<void(const std::string&, int, const Tensor<T>&, bool)>& fn) const;

  void ZeroGradients();

  /// Realized output shape (C, H, W) after every stage for one input sample,
  /// obtained by running the network. Used to check the plan.
  std::vector<Shape> RealizedStageShapes(const Tensor<T>& batch) const;

  template <typename U>
  Model<U> Cast() const;

 private:
  template <typename U>
  friend class Model;
  template <typename U>
  friend Model<U> BuildModel(const DenseNetConfig&, std::uint64_t);

  Tensor<T> Run(const Tensor<T>& batch, Mode mode, ForwardTrace<T>* trace,
                std::vector<Shape>* stage_shapes);

  ArchitectureTable table_;
  Tensor<T> initial_kernel_;  // first_conv x input_channels x 3 x 3
  Tensor<T> d_initial_kernel_;
  std::vector<DenseBlock<T>> blocks_;
  std::vector<NormReluConv<T>> transitions_;
  Classifier<T> head_;
};

/// Kernels and classifier weights ~ N(0, 2 / fan_in); batchnorm gamma 1,
/// beta 0, running mean 0, running variance 1; biases 0. Same seed and
/// config give bitwise-identical parameters.
template <typename T>
Model<T> BuildModel(const DenseNetConfig& config, std::uint64_t seed);

struct ParameterCount {
  std::vector<std::int64_t> per_stage;  // aligned with the plan's stages
  std::int64_t total = 0;
};

/// Walks the built model's trainable tensors (running statistics excluded).
template <typename T>
ParameterCount CountParameters(const Model<T>& model);

/// Edges in a block's realized wiring (sum over layers of source count).
template <typename T>
std::int64_t WiringEdgeCount(const DenseBlock<T>& block);

/// Everything the backward pass needs from one train-mode forward.
template <typename T>
struct UnitTrace {
  BatchNormCache<T> bn;
  Tensor<T> activated;  // ReLU output; positive exactly where the BN output is
};

template <typename T>
struct LayerTrace {
  std::optional<UnitTrace<T>> bottleneck;
  UnitTrace<T> conv;
};

template <typename T>
struct BlockTrace {
  std::vector<Tensor<T>> features;  // block input, then each layer output
  std::vector<LayerTrace<T>> layers;
};

template <typename T>
struct ForwardTrace {
  Tensor<T> input;
  std::vector<BlockTrace<T>> blocks;
  std::vector<UnitTrace<T>> transitions;
  std::vector<Shape> transition_pre_pool;
  UnitTrace<T> head;     // BN + ReLU part of the classifier
  Tensor<T> pooled;      // N x C x 1 x 1
};

}  // namespace densenet

#endif  // DENSENET_MODEL_H_
