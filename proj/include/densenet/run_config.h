// include/densenet/run_config.h

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

#ifndef DENSENET_RUN_CONFIG_H_
#define DENSENET_RUN_CONFIG_H_

// Everything one CLI invocation needs, as key=value text. Architecture,
// filterbank and training keys keep the names of their owning configs; the
// remaining keys are file paths and synthetic-data knobs. Unknown keys are
// rejected.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "densenet/architecture.h"
#include "densenet/features.h"
#include "densenet/trainer.h"

namespace densenet {

struct RunConfig {
  DenseNetConfig model;
  FilterbankConfig features;
  TrainConfig train;
  SyntheticSpec synth;  // num_classes, channels, bins and seed follow the other sections
  std::map<std::string, std::string> paths;
  std::set<std::string> given;  // keys set explicitly, in any section

  /// Throws ConfigError for an unknown key or a value that does not parse.
  void Set(const std::string& key, const std::string& value);
  void Apply(const std::map<std::string, std::string>& kv);

  std::optional<std::string> path(const std::string& key) const;
  /// Throws ConfigError naming the key when it is not set.
  const std::string& RequirePath(const std::string& key) const;

  /// Synthetic spec with the shared fields filled in.
  SyntheticSpec synthetic() const;

  /// All keys in a fixed order; paths only when set.
  std::string ToText() const;

 private:
  void SetValue(const std::string& key, const std::string& value);
};

const std::vector<std::string>& PathKeys();
const std::vector<std::string>& SyntheticKeys();

RunConfig ParseRunConfig(std::string_view text);
RunConfig LoadRunConfig(const std::string& path);

}  // namespace densenet

#endif  // DENSENET_RUN_CONFIG_H_
