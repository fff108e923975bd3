// include/densenet/archive.h

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

#ifndef DENSENET_ARCHIVE_H_
#define DENSENET_ARCHIVE_H_

// Feature archive:
//
//   "FBK1" | u32 version | u32 length + metadata text (key=value lines) |
//   u32 utterance count | per utterance:
//     u32 length + id | u32 T | u32 channels | u32 bins |
//     T*channels*bins float32 values, row-major |
//     optional "LBL1" + T x u32 labels
//
// Little-endian throughout. Ids are limited to 65535 bytes, so a record can
// never start with the bytes "LBL1" and the label block is detected by
// peeking.

#include <string>
#include <string_view>
#include <vector>

#include "densenet/features.h"

namespace densenet {

inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::uint32_t kMaxUtteranceIdLength = 65535;

struct FeatureArchive {
  std::string metadata;  // free-form key=value text, e.g. the filterbank config
  std::vector<UtteranceFeatures> utterances;
};

std::string EncodeArchive(const FeatureArchive& archive);
FeatureArchive DecodeArchive(std::string_view bytes);

void WriteArchive(const FeatureArchive& archive, const std::string& path);
FeatureArchive ReadArchive(const std::string& path);

}  // namespace densenet

#endif  // DENSENET_ARCHIVE_H_
