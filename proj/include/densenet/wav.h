// include/densenet/wav.h

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

#ifndef DENSENET_WAV_H_
#define DENSENET_WAV_H_

// Single-channel 16-bit PCM RIFF/WAVE files. Samples are returned at their
// integer scale (-32768..32767) as floats.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace densenet {

struct WaveData {
  int sample_rate = 0;
  std::vector<float> samples;
};

WaveData DecodeWav(std::string_view bytes);
WaveData ReadWav(const std::string& path);

/// Samples are rounded and clamped to 16 bits.
std::string EncodeWav(std::span<const float> samples, int sample_rate);
void WriteWav(const std::string& path, std::span<const float> samples, int sample_rate);

}  // namespace densenet

#endif  // DENSENET_WAV_H_
