// src/manifest.cc

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

#include "densenet/manifest.h"

#include <filesystem>
#include <set>
#include <sstream>

#include "binary_io.h"
#include "densenet/keyvalue.h"
#include "densenet/wav.h"

namespace densenet {

std::vector<ManifestEntry> ParseManifest(std::string_view text, const std::string& base_dir) {
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? p : (std::filesystem::path(base_dir) / path).string();
  };
  for (int n = 1; std::getline(in, line); ++n) {
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string s; fields >> s;) f.push_back(s);
    if (f.empty() || f[0][0] == '#') continue;
    if (f.size() < 2 || f.size() > 3)
      throw InputError("manifest line " + std::to_string(n) +
                       ": expected 'id path [label_path]', got " +
                       std::to_string(f.size()) + " fields");
    if (!seen.insert(f[0]).second)
      throw InputError("manifest line " + std::to_string(n) + ": duplicate id '" + f[0] + "'");
    ManifestEntry e{n, f[0], resolve(f[1]), std::nullopt};
    if (f.size() == 3) e.label_path = resolve(f[2]);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  const std::string text = binary::ReadFile(path);
  return ParseManifest(text, std::filesystem::path(path).parent_path().string());
}

std::vector<int> ReadLabelFile(const std::string& path) {
  std::istringstream in(binary::ReadFile(path));
  std::vector<int> labels;
  for (std::string tok; in >> tok;) {
    const int v = ParseInt("label", tok);
    if (v < 0) throw LabelError("label file '" + path + "' has negative label " + tok);
    labels.push_back(v);
  }
  return labels;
}

FeatureArchive FeaturizeManifest(const std::vector<ManifestEntry>& entries,
                                 const FilterbankConfig& cfg) {
  cfg.Validate();
  FeatureArchive archive;
  std::string meta;
  const auto kv = cfg.ToKeyValues();
  for (const auto& key : FilterbankConfigKeys()) meta += key + "=" + kv.at(key) + "\n";
  archive.metadata = meta;
  for (const auto& e : entries) {
    try {
      const WaveData wave = ReadWav(e.audio_path);
      if (wave.sample_rate != cfg.sample_rate)
        throw InputError("sample rate " + std::to_string(wave.sample_rate) +
                         " Hz, config expects " + std::to_string(cfg.sample_rate));
      UtteranceFeatures utt;
      utt.id = e.id;
      utt.frames = AppendDeltas(ComputeLogMel(wave.samples, cfg));
      if (e.label_path) utt.labels = ReadLabelFile(*e.label_path);
      utt.Validate();
      archive.utterances.push_back(std::move(utt));
    } catch (const Error& err) {
      const std::string where = "manifest line " + std::to_string(e.line) +
                                ", utterance '" + e.id + "': " + err.what();
      if (dynamic_cast<const FormatError*>(&err)) throw FormatError(where);
      if (dynamic_cast<const LabelError*>(&err)) throw LabelError(where);
      throw InputError(where);
    }
  }
  return archive;
}

}  // namespace densenet
