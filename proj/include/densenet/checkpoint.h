// include/densenet/checkpoint.h

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

#ifndef DENSENET_CHECKPOINT_H_
#define DENSENET_CHECKPOINT_H_

// Model checkpoint file:
//
//   "DAMC" | u32 version | u32 length + config text (key=value lines,
//   including init_seed) | u32 parameter count | per parameter:
//   u32 name length + name | u32 rank | rank x u32 extents |
//   float32 values, row-major
//
// All integers and floats little-endian. Running statistics are stored like
// any other named tensor. Save/load round-trips bit-exactly.

#include <cstdint>
#include <string>
#include <string_view>

#include "densenet/model.h"

namespace densenet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model<float> model;
  std::uint64_t init_seed = 0;
};

std::string EncodeCheckpoint(const Model<float>& model, std::uint64_t init_seed);
Checkpoint DecodeCheckpoint(std::string_view bytes);

void SaveCheckpoint(const Model<float>& model, std::uint64_t init_seed,
                    const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace densenet

#endif  // DENSENET_CHECKPOINT_H_
