// src/architecture.cc

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

#include "densenet/architecture.h"

#include <cmath>
#include <numeric>

#include "densenet/keyvalue.h"

namespace densenet {

std::string_view VariantName(Variant v) {
  switch (v) {
    case Variant::kPlain: return "plain";
    case Variant::kC: return "C";
    case Variant::kBC: return "BC";
  }
  return "?";
}

Variant ParseVariant(std::string_view name) {
  if (name == "plain" || name == "DenseNet") return Variant::kPlain;
  if (name == "C" || name == "DenseNet-C") return Variant::kC;
  if (name == "BC" || name == "DenseNet-BC") return Variant::kBC;
  throw ConfigError("invalid value '" + std::string(name) +
                    "' for key 'variant': expected plain, C or BC");
}

void DenseNetConfig::Validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid '" + key + "': " + why);
  };
  if (blocks < 1) fail("blocks", "need at least one dense block");
  if (depth <= blocks + 1)
    fail("depth", "depth " + std::to_string(depth) + " must exceed blocks + 1 = " +
                      std::to_string(blocks + 1));
  if (growth_rate < 1) fail("growth_rate", "must be >= 1");
  if (!(compression > 0 && compression <= 1)) fail("compression", "must lie in (0, 1]");
  if (variant == Variant::kPlain && compression != 1.0)
    fail("compression", "variant plain requires compression 1.0");
  if (variant != Variant::kPlain && !(compression < 1.0))
    fail("compression", "variants C and BC require compression < 1.0");
  if (input_channels < 1) fail("input_channels", "must be >= 1");
  if (input_height < 3 || input_width < 3)
    fail(input_height < 3 ? "input_height" : "input_width",
         "must be >= 3 for the initial 3x3 convolution");
  if (num_classes < 2) fail("num_classes", "must be >= 2");
  if (first_conv_channels < 1) fail("first_conv_channels", "must be >= 1");
  if (!(batchnorm.epsilon > 0)) fail("bn_epsilon", "must be positive");
  if (!(batchnorm.momentum >= 0 && batchnorm.momentum < 1))
    fail("bn_momentum", "must lie in [0, 1)");
  const int layers = LayersPerBlock(depth, blocks);
  if (variant == Variant::kBC && layers % 2 != 0)
    fail("depth", "variant BC needs an even number of layers per block, got " +
                      std::to_string(layers));
}

const std::vector<std::string>& DenseNetConfigKeys() {
  static const std::vector<std::string> keys = {
      "variant",        "depth",          "blocks",
      "growth_rate",    "compression",    "input_channels",
      "input_height",   "input_width",    "num_classes",
      "first_conv_channels", "bn_epsilon", "bn_momentum"};
  return keys;
}

std::map<std::string, std::string> DenseNetConfig::ToKeyValues() const {
  return {{"variant", std::string(VariantName(variant))},
          {"depth", std::to_string(depth)},
          {"blocks", std::to_string(blocks)},
          {"growth_rate", std::to_string(growth_rate)},
          {"compression", FormatDouble(compression)},
          {"input_channels", std::to_string(input_channels)},
          {"input_height", std::to_string(input_height)},
          {"input_width", std::to_string(input_width)},
          {"num_classes", std::to_string(num_classes)},
          {"first_conv_channels", std::to_string(first_conv_channels)},
          {"bn_epsilon", FormatDouble(batchnorm.epsilon)},
          {"bn_momentum", FormatDouble(batchnorm.momentum)}};
}

DenseNetConfig DenseNetConfig::FromKeyValues(
    const std::map<std::string, std::string>& kv) {
  DenseNetConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "variant") c.variant = ParseVariant(value);
    else if (key == "depth") c.depth = ParseInt(key, value);
    else if (key == "blocks") c.blocks = ParseInt(key, value);
    else if (key == "growth_rate") c.growth_rate = ParseInt(key, value);
    else if (key == "compression") c.compression = ParseDouble(key, value);
    else if (key == "input_channels") c.input_channels = ParseInt(key, value);
    else if (key == "input_height") c.input_height = ParseInt(key, value);
    else if (key == "input_width") c.input_width = ParseInt(key, value);
    else if (key == "num_classes") c.num_classes = ParseInt(key, value);
    else if (key == "first_conv_channels") c.first_conv_channels = ParseInt(key, value);
    else if (key == "bn_epsilon") c.batchnorm.epsilon = ParseDouble(key, value);
    else if (key == "bn_momentum") c.batchnorm.momentum = ParseDouble(key, value);
    else throw ConfigError("unknown key '" + key + "'");
  }
  return c;
}

bool operator==(const DenseNetConfig& a, const DenseNetConfig& b) {
  return a.ToKeyValues() == b.ToKeyValues();
}

int LayersPerBlock(int depth, int blocks) {
  if (blocks < 1) throw ConfigError("invalid 'blocks': need at least one dense block");
  if (depth <= blocks + 1)
    throw ConfigError("invalid 'depth': depth " + std::to_string(depth) +
                      " must exceed blocks + 1 = " + std::to_string(blocks + 1));
  const int layers = (depth - blocks - 1) / blocks;
  if (layers <= 0)
    throw ConfigError("invalid 'depth': depth " + std::to_string(depth) +
                      " leaves no layers for " + std::to_string(blocks) +
                      " dense blocks");
  return layers;
}

int BottleneckPairsPerBlock(int depth, int blocks) {
  const int layers = LayersPerBlock(depth, blocks);
  if (layers % 2 != 0)
    throw ConfigError("invalid 'depth': " + std::to_string(layers) +
                      " layers per block cannot form bottleneck pairs");
  return layers / 2;
}

int BlockInputChannels(int k0, int k, int n) {
  if (n < 1) throw ConfigError("layer index within a block is 1-based");
  return k * (n - 1) + k0;
}

int TransitionOutputChannels(int c, double theta) {
  if (c < 1) throw ConfigError("transition input must have at least one channel");
  if (!(theta > 0 && theta <= 1))
    throw ConfigError("invalid 'compression': must lie in (0, 1]");
  // theta is a short decimal such as 0.3; the tolerance keeps 0.3 * 10 from
  // landing just below 3 after rounding.
  const int out = static_cast<int>(std::floor(theta * c + 1e-9));
  if (out < 1)
    throw ConfigError("invalid 'compression': floor(" + FormatDouble(theta) +
                      " * " + std::to_string(c) + ") leaves no channels");
  return out;
}

std::int64_t BlockConnectionCount(int layers) {
  return static_cast<std::int64_t>(layers) * (layers + 1) / 2;
}

std::string_view StageKindName(StageKind kind) {
  switch (kind) {
    case StageKind::kInitialConv: return "conv";
    case StageKind::kDenseBlock: return "dense_block";
    case StageKind::kTransition: return "transition";
    case StageKind::kClassifier: return "classifier";
  }
  return "?";
}

std::int64_t ConvParameters(int in_channels, int out_channels, int kernel) {
  return static_cast<std::int64_t>(in_channels) * out_channels * kernel * kernel;
}

std::int64_t BatchNormParameters(int channels) { return 2LL * channels; }

std::int64_t DenseLayerParameters(int in_channels, int growth_rate,
                                  bool bottleneck) {
  if (!bottleneck)
    return BatchNormParameters(in_channels) +
           ConvParameters(in_channels, growth_rate, 3);
  const int width = 4 * growth_rate;
  return BatchNormParameters(in_channels) +
         ConvParameters(in_channels, width, 1) + BatchNormParameters(width) +
         ConvParameters(width, growth_rate, 3);
}

std::int64_t TransitionParameters(int in_channels, int out_channels) {
  return BatchNormParameters(in_channels) +
         ConvParameters(in_channels, out_channels, 1);
}

std::int64_t ClassifierParameters(int in_channels, int num_classes) {
  return BatchNormParameters(in_channels) +
         static_cast<std::int64_t>(in_channels) * num_classes + num_classes;
}

std::int64_t ArchitectureTable::total_parameters() const {
  std::int64_t total = 0;
  for (const auto& s : stages) total += s.parameters;
  return total;
}

ArchitectureTable PlanArchitecture(const DenseNetConfig& config) {
  config.Validate();
  ArchitectureTable table;
  table.config = config;
  const bool bottleneck = config.variant == Variant::kBC;
  const int layers = LayersPerBlock(config.depth, config.blocks);
  table.layers_per_block = layers;
  table.effective_depth = config.blocks * layers + config.blocks + 1;
  const int k = config.growth_rate;

  StageRecord conv;
  conv.kind = StageKind::kInitialConv;
  conv.name = "Convolution";
  conv.layers = {"3x3 conv, " + std::to_string(config.first_conv_channels)};
  conv.in_channels = config.input_channels;
  conv.in_h = config.input_height;
  conv.in_w = config.input_width;
  conv.out_channels = config.first_conv_channels;
  conv.out_h = config.input_height - 2;
  conv.out_w = config.input_width - 2;
  conv.parameters = ConvParameters(config.input_channels, config.first_conv_channels, 3);
  table.stages.push_back(conv);

  int channels = conv.out_channels, h = conv.out_h, w = conv.out_w;
  for (int b = 1; b <= config.blocks; ++b) {
    StageRecord block;
    block.kind = StageKind::kDenseBlock;
    block.name = "Dense block (" + std::to_string(b) + ")";
    if (bottleneck) {
      block.layers = {"1x1 conv, " + std::to_string(4 * k), "3x3 conv, " + std::to_string(k)};
      block.repeat = layers / 2;
    } else {
      block.layers = {"3x3 conv, " + std::to_string(k)};
      block.repeat = layers;
    }
    block.in_channels = channels;
    block.in_h = block.out_h = h;
    block.in_w = block.out_w = w;
    for (int n = 1; n <= block.repeat; ++n) {
      const int in = BlockInputChannels(channels, k, n);
      block.layer_input_channels.push_back(in);
      block.parameters += DenseLayerParameters(in, k, bottleneck);
    }
    channels += block.repeat * k;
    block.out_channels = channels;
    table.stages.push_back(block);

    if (b == config.blocks) break;
    StageRecord trans;
    trans.kind = StageKind::kTransition;
    trans.name = "Transition (" + std::to_string(b) + ")";
    const int out = TransitionOutputChannels(channels, config.compression);
    trans.layers = {"1x1 conv, " + std::to_string(out), "2x2 avg. pool"};
    trans.in_channels = channels;
    trans.in_h = trans.pre_pool_h = h;
    trans.in_w = trans.pre_pool_w = w;
    if (h < 2 || w < 2)
      throw ConfigError("invalid 'blocks': spatial size " + std::to_string(h) +
                        "x" + std::to_string(w) + " before transition " +
                        std::to_string(b) + " is too small to pool; " +
                        std::to_string(config.blocks) +
                        " dense blocks do not fit the input geometry");
    h /= 2;
    w /= 2;
    trans.out_channels = channels = out;
    trans.out_h = h;
    trans.out_w = w;
    trans.parameters = TransitionParameters(trans.in_channels, out);
    table.stages.push_back(trans);
  }

  StageRecord head;
  head.kind = StageKind::kClassifier;
  head.name = "Classification";
  head.layers = {std::to_string(h) + "x" + std::to_string(w) + " global avg. pool",
                 "fully-connected, softmax"};
  head.in_channels = channels;
  head.in_h = h;
  head.in_w = w;
  head.out_channels = config.num_classes;
  head.out_h = head.out_w = 1;
  head.parameters = ClassifierParameters(channels, config.num_classes);
  table.stages.push_back(head);
  return table;
}

}  // namespace densenet
