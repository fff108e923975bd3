// src/checkpoint.cc

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

#include "densenet/checkpoint.h"

#include <map>

#include "binary_io.h"
#include "densenet/keyvalue.h"

namespace densenet {

std::string EncodeCheckpoint(const Model<float>& model, std::uint64_t init_seed) {
  binary::Writer w;
  w.Bytes("DAMC");
  w.U32(kCheckpointVersion);
  const auto kv = model.config().ToKeyValues();
  std::string text;
  for (const auto& key : DenseNetConfigKeys()) text += key + "=" + kv.at(key) + "\n";
  text += "init_seed=" + std::to_string(init_seed) + "\n";
  w.String(text);

  std::uint32_t count = 0;
  model.ForEachParameter([&](const std::string&, int, const Tensor<float>&, bool) { ++count; });
  w.U32(count);
  model.ForEachParameter(
      [&](const std::string& name, int, const Tensor<float>& value, bool) {
        w.String(name);
        w.U32(static_cast<std::uint32_t>(value.rank()));
        for (int e : value.shape()) w.U32(static_cast<std::uint32_t>(e));
        w.F32s(value.data());
      });
  return w.buffer();
}

Checkpoint DecodeCheckpoint(std::string_view bytes) {
  binary::Reader r(bytes, "checkpoint");
  r.Magic("DAMC");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion)
    r.Fail("unsupported version " + std::to_string(version), version_at);
  r.set_context("config block");
  auto kv = ParseKeyValueText(r.String(1 << 20));
  Checkpoint ckpt;
  auto seed = kv.find("init_seed");
  if (seed != kv.end()) {
    ckpt.init_seed = ParseUint64("init_seed", seed->second);
    kv.erase(seed);
  }
  DenseNetConfig config;
  try {
    config = DenseNetConfig::FromKeyValues(kv);
    ckpt.model = BuildModel<float>(config, ckpt.init_seed);
  } catch (const ConfigError& e) {
    r.Fail(std::string("invalid stored config: ") + e.what());
  }

  std::map<std::string, Tensor<float>*> slots;
  ckpt.model.ForEachParameter(
      [&](const ParameterRef<float>& p) { slots[p.name] = p.value; });
  r.set_context("parameter table");
  const std::uint32_t count = r.U32();
  if (count != slots.size())
    r.Fail("stores " + std::to_string(count) + " tensors, config implies " +
           std::to_string(slots.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    r.set_context("parameter " + std::to_string(i));
    const std::string name = r.String(4096);
    auto slot = slots.find(name);
    if (slot == slots.end()) r.Fail("unknown parameter '" + name + "'");
    const std::uint32_t rank = r.U32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank && d < 8; ++d) shape.push_back(static_cast<int>(r.U32()));
    if (shape != slot->second->shape())
      r.Fail("parameter '" + name + "' has shape " + ShapeString(shape) +
             ", config implies " + ShapeString(slot->second->shape()));
    r.F32s(slot->second->data());
    slots.erase(slot);
  }
  r.set_context("");
  if (!r.at_end()) r.Fail("trailing bytes after parameter table");
  return ckpt;
}

void SaveCheckpoint(const Model<float>& model, std::uint64_t init_seed,
                    const std::string& path) {
  binary::WriteFile(path, EncodeCheckpoint(model, init_seed));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  return DecodeCheckpoint(binary::ReadFile(path));
}

}  // namespace densenet
