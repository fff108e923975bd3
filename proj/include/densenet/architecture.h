// include/densenet/architecture.h

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

#ifndef DENSENET_ARCHITECTURE_H_
#define DENSENET_ARCHITECTURE_H_

// Architecture arithmetic for DenseNet / DenseNet-C / DenseNet-BC acoustic
// models and the planned per-stage table (layer list, output sizes, channel
// counts, parameter counts) derived from a configuration alone.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "densenet/layers.h"

namespace densenet {

enum class Variant {
  kPlain,  // no compression, no bottleneck
  kC,      // compression at transitions
  kBC,     // bottleneck 1x1 convolutions plus compression
};

std::string_view VariantName(Variant v);
Variant ParseVariant(std::string_view name);

struct DenseNetConfig {
  Variant variant = Variant::kC;
  int depth = 22;
  int blocks = 3;
  int growth_rate = 12;
  double compression = 0.5;
  int input_channels = 3;   // static, delta, delta-delta
  int input_height = 11;    // spliced context frames
  int input_width = 40;     // mel bins
  int num_classes = 10;
  int first_conv_channels = 16;
  BatchNormOptions batchnorm;

  /// Throws ConfigError naming the offending field.
  void Validate() const;

  /// Fixed-order key=value rendering, and its inverse. Unknown keys are
  /// rejected; missing keys keep their defaults.
  std::map<std::string, std::string> ToKeyValues() const;
  static DenseNetConfig FromKeyValues(const std::map<std::string, std::string>& kv);

  friend bool operator==(const DenseNetConfig&, const DenseNetConfig&);
};

/// Keys understood by DenseNetConfig::FromKeyValues, in rendering order.
const std::vector<std::string>& DenseNetConfigKeys();

/// Convolution layers per dense block: floor((depth - blocks - 1) / blocks).
/// The initial convolution, blocks-1 transitions and the classifier use the
/// remaining blocks+1 depth units.
int LayersPerBlock(int depth, int blocks);

/// Bottleneck {1x1, 3x3} pairs per block; the layer count must be even.
int BottleneckPairsPerBlock(int depth, int blocks);

/// Channels consumed by the n-th layer (1-based) of a block whose input has
/// k0 channels: k * (n - 1) + k0.
int BlockInputChannels(int k0, int k, int n);

/// floor(theta * c); zero is an over-compression error.
int TransitionOutputChannels(int c, double theta);

/// Directed connections in an L-layer dense block, counting the block input
/// as a source: L (L + 1) / 2.
std::int64_t BlockConnectionCount(int layers);

enum class StageKind { kInitialConv, kDenseBlock, kTransition, kClassifier };

std::string_view StageKindName(StageKind kind);

struct StageRecord {
  StageKind kind = StageKind::kInitialConv;
  std::string name;                 // "Dense block (2)", "Transition (1)", ...
  std::vector<std::string> layers;  // one repeated unit, e.g. {"1x1 conv", "3x3 conv"}
  int repeat = 1;                   // how many times the unit is stacked
  int in_channels = 0, in_h = 0, in_w = 0;
  int out_channels = 0, out_h = 0, out_w = 0;
  // Transition only: size after the 1x1 convolution, before pooling.
  int pre_pool_h = 0, pre_pool_w = 0;
  // Dense block only: channels seen by each composite layer, in order.
  std::vector<int> layer_input_channels;
  std::int64_t parameters = 0;
};

struct ArchitectureTable {
  DenseNetConfig config;
  int layers_per_block = 0;  // 3x3 and 1x1 convolutions per block
  int effective_depth = 0;   // blocks * layers_per_block + blocks + 1
  std::vector<StageRecord> stages;

  std::int64_t total_parameters() const;
};

/// Plans the network: 3x3 conv (pad 0) to first_conv_channels, then dense
/// blocks of BN-ReLU-conv layers (preceded by a BN-ReLU-1x1 bottleneck to 4k
/// maps in variant BC) separated by BN-ReLU-1x1 conv + 2x2 average pool
/// transitions, then BN-ReLU-global pool-linear-softmax.
ArchitectureTable PlanArchitecture(const DenseNetConfig& config);

// Analytic parameter counts of the building units (running statistics are
// not parameters).
std::int64_t ConvParameters(int in_channels, int out_channels, int kernel);
std::int64_t BatchNormParameters(int channels);
std::int64_t DenseLayerParameters(int in_channels, int growth_rate,
                                  bool bottleneck);
std::int64_t TransitionParameters(int in_channels, int out_channels);
std::int64_t ClassifierParameters(int in_channels, int num_classes);

}  // namespace densenet

#endif  // DENSENET_ARCHITECTURE_H_
