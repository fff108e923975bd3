// src/run_config.cc

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

#include "densenet/run_config.h"

#include <algorithm>

#include "binary_io.h"
#include "densenet/keyvalue.h"

namespace densenet {

const std::vector<std::string>& PathKeys() {
  static const std::vector<std::string> keys = {
      "manifest",      "archive",       "stats",      "train_archive",
      "valid_archive", "eval_archive",  "checkpoint", "metrics_log"};
  return keys;
}

const std::vector<std::string>& SyntheticKeys() {
  static const std::vector<std::string> keys = {"synth_frames", "synth_separation",
                                                "synth_segment_frames"};
  return keys;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  SetValue(key, value);
  given.insert(key);
}

void RunConfig::SetValue(const std::string& key, const std::string& value) {
  const auto& arch = DenseNetConfigKeys();
  if (std::find(arch.begin(), arch.end(), key) != arch.end()) {
    auto kv = model.ToKeyValues();
    kv[key] = value;
    model = DenseNetConfig::FromKeyValues(kv);
    return;
  }
  if (features.Set(key, value) || train.Set(key, value)) return;
  if (key == "synth_frames") synth.frames = ParseInt(key, value);
  else if (key == "synth_separation") synth.separation = ParseDouble(key, value);
  else if (key == "synth_segment_frames") synth.segment_frames = ParseInt(key, value);
  else if (std::find(PathKeys().begin(), PathKeys().end(), key) != PathKeys().end()) {
    if (value.empty()) throw ConfigError("invalid '" + key + "': empty path");
    paths[key] = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

void RunConfig::Apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) Set(k, v);
}

std::optional<std::string> RunConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  if (it == paths.end()) return std::nullopt;
  return it->second;
}

const std::string& RunConfig::RequirePath(const std::string& key) const {
  auto it = paths.find(key);
  if (it == paths.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

SyntheticSpec RunConfig::synthetic() const {
  SyntheticSpec s = synth;
  s.num_classes = model.num_classes;
  s.channels = model.input_channels;
  s.bins = model.input_width;
  s.seed = train.seed;
  return s;
}

std::string RunConfig::ToText() const {
  std::string out;
  const auto m = model.ToKeyValues();
  for (const auto& k : DenseNetConfigKeys()) out += k + "=" + m.at(k) + "\n";
  const auto f = features.ToKeyValues();
  for (const auto& k : FilterbankConfigKeys()) out += k + "=" + f.at(k) + "\n";
  const auto t = train.ToKeyValues();
  for (const auto& k : TrainConfigKeys()) out += k + "=" + t.at(k) + "\n";
  out += "synth_frames=" + std::to_string(synth.frames) + "\n";
  out += "synth_separation=" + FormatDouble(synth.separation) + "\n";
  out += "synth_segment_frames=" + std::to_string(synth.segment_frames) + "\n";
  for (const auto& k : PathKeys())
    if (auto p = path(k)) out += k + "=" + *p + "\n";
  return out;
}

RunConfig ParseRunConfig(std::string_view text) {
  RunConfig cfg;
  cfg.Apply(ParseKeyValueText(text));
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path) {
  return ParseRunConfig(binary::ReadFile(path));
}

}  // namespace densenet
