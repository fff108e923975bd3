// include/densenet/manifest.h

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

#ifndef DENSENET_MANIFEST_H_
#define DENSENET_MANIFEST_H_

// Manifest: one utterance per line, "id audio_path [label_path]". Blank lines
// and '#' comments are skipped. Relative paths resolve against the manifest's
// directory. A label file holds whitespace-separated frame class ids.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "densenet/archive.h"

namespace densenet {

struct ManifestEntry {
  int line = 0;  // 1-based line in the manifest
  std::string id;
  std::string audio_path;
  std::optional<std::string> label_path;
};

/// `base_dir` is prepended to relative paths.
std::vector<ManifestEntry> ParseManifest(std::string_view text, const std::string& base_dir);
std::vector<ManifestEntry> ReadManifest(const std::string& path);

std::vector<int> ReadLabelFile(const std::string& path);

/// Reads each WAV, extracts log-mel plus deltas (T x 3 x bins) and attaches
/// labels. Errors name the manifest line and utterance id.
FeatureArchive FeaturizeManifest(const std::vector<ManifestEntry>& entries,
                                 const FilterbankConfig& cfg);

}  // namespace densenet

#endif  // DENSENET_MANIFEST_H_
