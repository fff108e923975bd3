// include/densenet/features.h

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

#ifndef DENSENET_FEATURES_H_
#define DENSENET_FEATURES_H_

// Waveform -> 40-bin log-Mel filterbank -> {static, delta, delta-delta}
// -> global mean/variance normalization -> {left, 1, right} context splicing.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "densenet/tensor.h"

namespace densenet {

struct FilterbankConfig {
  int sample_rate = 16000;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int fft_size = 512;
  int num_filters = 40;
  double low_freq = 20.0;
  double high_freq = 8000.0;
  double pre_emphasis = 0.97;
  double log_floor = 1e-10;

  int frame_samples() const;
  int shift_samples() const;
  /// Number of frames for `num_samples` samples:
  /// 1 + floor((N - frame_samples) / shift_samples), or 0 if N is too short.
  int NumFrames(std::size_t num_samples) const;

  void Validate() const;
  std::map<std::string, std::string> ToKeyValues() const;
  /// Applies recognized keys; returns false for a key it does not own.
  bool Set(const std::string& key, const std::string& value);
};

const std::vector<std::string>& FilterbankConfigKeys();

double HzToMel(double hz);
double MelToHz(double mel);

/// Triangular filters with centers uniformly spaced on the mel scale
/// m(f) = 2595 log10(1 + f / 700) between low_freq and high_freq. Weights are
/// evaluated on the FFT bin frequencies in the mel domain.
struct MelFilterbank {
  std::vector<double> left_hz, center_hz, right_hz;
  int num_bins = 0;             // fft_size / 2 + 1
  std::vector<double> weights;  // num_filters x num_bins, row-major

  static MelFilterbank Build(const FilterbankConfig& cfg);
  int num_filters() const { return static_cast<int>(center_hz.size()); }
  double weight(int filter, int bin) const {
    return weights[static_cast<std::size_t>(filter) * num_bins + bin];
  }
};

/// T x num_filters log filterbank energies: pre-emphasis, Hamming-windowed
/// frames, FFT magnitude spectrum, mel filters, natural log floored at
/// log_floor. Throws InputError if the wave is shorter than one frame.
Tensor<float> ComputeLogMel(std::span<const float> wave,
                            const FilterbankConfig& cfg);

/// Regression deltas with window +-2 and edge replication:
///   d_t = sum_{n=1..2} n (x_{t+n} - x_{t-n}) / (2 sum n^2)
/// Input T x B; output T x 3 x B holding {static, delta, delta-delta}.
Tensor<float> AppendDeltas(const Tensor<float>& feats);

/// Applies the delta operator to one T x B matrix.
Tensor<float> Delta(const Tensor<float>& feats);

struct UtteranceFeatures {
  std::string id;
  Tensor<float> frames;                   // T x channels x bins
  std::optional<std::vector<int>> labels; // length T when present

  int num_frames() const { return frames.dim(0); }
  void Validate() const;
  friend bool operator==(const UtteranceFeatures&, const UtteranceFeatures&) = default;
};

/// Per-(channel, bin) mean and population variance over all frames of a
/// corpus; variance floored at 1e-8.
struct CmvnStats {
  int channels = 0;
  int bins = 0;
  std::uint64_t frames = 0;
  std::vector<double> mean;
  std::vector<double> var;
};

inline constexpr double kCmvnVarianceFloor = 1e-8;

CmvnStats ComputeCmvnStats(std::span<const UtteranceFeatures> corpus);

/// (x - mean) / sqrt(var) per coefficient. Not idempotent: a second
/// application renormalizes with the same (now stale) statistics.
UtteranceFeatures ApplyCmvn(const UtteranceFeatures& utt, const CmvnStats& stats);

/// "CMV1" | u32 version | u32 channels | u32 bins | u64 frames |
/// float64 means | float64 variances.
void WriteCmvnStats(const CmvnStats& stats, const std::string& path);
CmvnStats ReadCmvnStats(const std::string& path);

/// For every frame t, stacks frames t-left .. t+right along a new height
/// axis, replicating the first/last frame past the utterance edges.
/// T x C x B -> T x C x (left + 1 + right) x B.
Tensor<float> SpliceContext(const Tensor<float>& feats, int left, int right);

}  // namespace densenet

#endif  // DENSENET_FEATURES_H_
