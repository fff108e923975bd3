// src/features.cc

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

#include "densenet/features.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include <fftw3.h>

#include "binary_io.h"
#include "densenet/keyvalue.h"

namespace densenet {

int FilterbankConfig::frame_samples() const {
  return static_cast<int>(std::lround(sample_rate * frame_length_ms / 1000.0));
}

int FilterbankConfig::shift_samples() const {
  return static_cast<int>(std::lround(sample_rate * frame_shift_ms / 1000.0));
}

int FilterbankConfig::NumFrames(std::size_t num_samples) const {
  const auto frame = static_cast<std::size_t>(frame_samples());
  if (num_samples < frame) return 0;
  return 1 + static_cast<int>((num_samples - frame) / shift_samples());
}

void FilterbankConfig::Validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid '" + key + "': " + why);
  };
  if (sample_rate <= 0) fail("sample_rate", "must be positive");
  if (frame_samples() < 2) fail("frame_length_ms", "frame shorter than 2 samples");
  if (shift_samples() < 1) fail("frame_shift_ms", "shift shorter than 1 sample");
  if (fft_size < frame_samples() || (fft_size & (fft_size - 1)) != 0)
    fail("fft_size", "must be a power of two >= frame length in samples (" +
                         std::to_string(frame_samples()) + ")");
  if (num_filters < 1) fail("num_filters", "must be >= 1");
  if (!(low_freq >= 0 && low_freq < high_freq))
    fail("low_freq", "need 0 <= low_freq < high_freq");
  if (high_freq > sample_rate / 2.0) fail("high_freq", "exceeds the Nyquist frequency");
  if (!(pre_emphasis >= 0 && pre_emphasis < 1)) fail("pre_emphasis", "must lie in [0, 1)");
  if (!(log_floor > 0)) fail("log_floor", "must be positive");
}

const std::vector<std::string>& FilterbankConfigKeys() {
  static const std::vector<std::string> keys = {
      "sample_rate", "frame_length_ms", "frame_shift_ms", "fft_size", "num_filters",
      "low_freq",    "high_freq",       "pre_emphasis",   "log_floor"};
  return keys;
}

std::map<std::string, std::string> FilterbankConfig::ToKeyValues() const {
  return {{"sample_rate", std::to_string(sample_rate)},
          {"frame_length_ms", FormatDouble(frame_length_ms)},
          {"frame_shift_ms", FormatDouble(frame_shift_ms)},
          {"fft_size", std::to_string(fft_size)},
          {"num_filters", std::to_string(num_filters)},
          {"low_freq", FormatDouble(low_freq)},
          {"high_freq", FormatDouble(high_freq)},
          {"pre_emphasis", FormatDouble(pre_emphasis)},
          {"log_floor", FormatDouble(log_floor)}};
}

bool FilterbankConfig::Set(const std::string& key, const std::string& value) {
  if (key == "sample_rate") sample_rate = ParseInt(key, value);
  else if (key == "frame_length_ms") frame_length_ms = ParseDouble(key, value);
  else if (key == "frame_shift_ms") frame_shift_ms = ParseDouble(key, value);
  else if (key == "fft_size") fft_size = ParseInt(key, value);
  else if (key == "num_filters") num_filters = ParseInt(key, value);
  else if (key == "low_freq") low_freq = ParseDouble(key, value);
  else if (key == "high_freq") high_freq = ParseDouble(key, value);
  else if (key == "pre_emphasis") pre_emphasis = ParseDouble(key, value);
  else if (key == "log_floor") log_floor = ParseDouble(key, value);
  else return false;
  return true;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank MelFilterbank::Build(const FilterbankConfig& cfg) {
  cfg.Validate();
  MelFilterbank fb;
  fb.num_bins = cfg.fft_size / 2 + 1;
  const double lo = HzToMel(cfg.low_freq), hi = HzToMel(cfg.high_freq);
  const double step = (hi - lo) / (cfg.num_filters + 1);
  std::vector<double> edges_mel(cfg.num_filters + 2);
  for (int i = 0; i < cfg.num_filters + 2; ++i) edges_mel[i] = lo + step * i;
  fb.weights.assign(static_cast<std::size_t>(cfg.num_filters) * fb.num_bins, 0.0);
  for (int m = 0; m < cfg.num_filters; ++m) {
    const double l = edges_mel[m], c = edges_mel[m + 1], r = edges_mel[m + 2];
    fb.left_hz.push_back(MelToHz(l));
    fb.center_hz.push_back(MelToHz(c));
    fb.right_hz.push_back(MelToHz(r));
    for (int k = 0; k < fb.num_bins; ++k) {
      const double mel = HzToMel(static_cast<double>(k) * cfg.sample_rate / cfg.fft_size);
      double w = 0;
      if (mel > l && mel < c) w = (mel - l) / (c - l);
      else if (mel >= c && mel < r) w = (r - mel) / (r - c);
      fb.weights[static_cast<std::size_t>(m) * fb.num_bins + k] = w;
    }
  }
  return fb;
}

namespace {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

Tensor<float> ComputeLogMel(std::span<const float> wave,
                            const FilterbankConfig& cfg) {
  const MelFilterbank fb = MelFilterbank::Build(cfg);
  const int frame = cfg.frame_samples(), shift = cfg.shift_samples();
  const int frames = cfg.NumFrames(wave.size());
  if (frames == 0)
    throw InputError("wave of " + std::to_string(wave.size()) +
                     " samples is shorter than one " + std::to_string(frame) +
                     "-sample frame");
  const int n = cfg.fft_size;
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(
      fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE));

  std::vector<double> window(frame);
  for (int i = 0; i < frame; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2 * std::numbers::pi * i / (frame - 1));

  Tensor<float> result({frames, cfg.num_filters});
  std::vector<double> magnitude(fb.num_bins);
  const double log_floor = std::log(cfg.log_floor);
  for (int t = 0; t < frames; ++t) {
    const float* x = wave.data() + static_cast<std::size_t>(t) * shift;
    double* buf = in.get();
    for (int i = frame - 1; i > 0; --i)
      buf[i] = (x[i] - cfg.pre_emphasis * x[i - 1]) * window[i];
    buf[0] = (x[0] - cfg.pre_emphasis * x[0]) * window[0];
    std::fill(buf + frame, buf + n, 0.0);
    fftw_execute(plan.get());
    for (int k = 0; k < fb.num_bins; ++k)
      magnitude[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
    for (int m = 0; m < cfg.num_filters; ++m) {
      double energy = 0;
      for (int k = 0; k < fb.num_bins; ++k) energy += fb.weight(m, k) * magnitude[k];
      result[static_cast<std::size_t>(t) * cfg.num_filters + m] = static_cast<float>(
          energy > cfg.log_floor ? std::log(energy) : log_floor);
    }
  }
  return result;
}

Tensor<float> Delta(const Tensor<float>& feats) {
  if (feats.rank() != 2) throw ShapeError("delta expects a T x B matrix");
  const int T = feats.dim(0), B = feats.dim(1);
  Tensor<float> out(feats.shape());
  auto at = [&](int t, int b) {
    return static_cast<double>(feats[static_cast<std::size_t>(std::clamp(t, 0, T - 1)) * B + b]);
  };
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) {
      double num = 0;
      for (int n = 1; n <= 2; ++n) num += n * (at(t + n, b) - at(t - n, b));
      out[static_cast<std::size_t>(t) * B + b] = static_cast<float>(num / 10.0);
    }
  return out;
}

Tensor<float> AppendDeltas(const Tensor<float>& feats) {
  if (feats.rank() != 2) throw ShapeError("deltas expect a T x B matrix");
  const int T = feats.dim(0), B = feats.dim(1);
  const Tensor<float> d1 = Delta(feats);
  const Tensor<float> d2 = Delta(d1);
  Tensor<float> out({T, 3, B});
  const std::size_t row = B;
  for (int t = 0; t < T; ++t) {
    const std::size_t src = static_cast<std::size_t>(t) * row;
    float* dst = out.data().data() + static_cast<std::size_t>(t) * 3 * row;
    std::copy_n(feats.data().data() + src, row, dst);
    std::copy_n(d1.data().data() + src, row, dst + row);
    std::copy_n(d2.data().data() + src, row, dst + 2 * row);
  }
  return out;
}

void UtteranceFeatures::Validate() const {
  if (frames.rank() != 3)
    throw ShapeError("utterance '" + id + "' frames must be T x channels x bins");
  if (labels && labels->size() != static_cast<std::size_t>(frames.dim(0)))
    throw InputError("utterance '" + id + "' has " + std::to_string(labels->size()) +
                     " labels for " + std::to_string(frames.dim(0)) + " frames");
  RequireFinite(frames, "utterance '" + id + "'");
}

CmvnStats ComputeCmvnStats(std::span<const UtteranceFeatures> corpus) {
  if (corpus.empty()) throw InputError("cannot compute normalization stats of an empty corpus");
  CmvnStats stats;
  stats.channels = corpus[0].frames.dim(1);
  stats.bins = corpus[0].frames.dim(2);
  const std::size_t dim = static_cast<std::size_t>(stats.channels) * stats.bins;
  std::vector<double> sum(dim, 0.0);
  for (const auto& utt : corpus) {
    if (utt.frames.dim(1) != stats.channels || utt.frames.dim(2) != stats.bins)
      throw ShapeError("utterance '" + utt.id + "' has geometry " +
                       ShapeString(utt.frames.shape()) + ", corpus uses " +
                       std::to_string(stats.channels) + "x" + std::to_string(stats.bins));
    for (std::size_t i = 0; i < utt.frames.size(); ++i) sum[i % dim] += utt.frames[i];
    stats.frames += static_cast<std::uint64_t>(utt.frames.dim(0));
  }
  if (stats.frames < 2) throw InputError("normalization stats need at least 2 frames");
  stats.mean.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) stats.mean[i] = sum[i] / static_cast<double>(stats.frames);
  std::vector<double> sq(dim, 0.0);
  for (const auto& utt : corpus)
    for (std::size_t i = 0; i < utt.frames.size(); ++i) {
      const double d = utt.frames[i] - stats.mean[i % dim];
      sq[i % dim] += d * d;
    }
  stats.var.resize(dim);
  for (std::size_t i = 0; i < dim; ++i)
    stats.var[i] = std::max(sq[i] / static_cast<double>(stats.frames), kCmvnVarianceFloor);
  return stats;
}

UtteranceFeatures ApplyCmvn(const UtteranceFeatures& utt, const CmvnStats& stats) {
  if (utt.frames.rank() != 3 || utt.frames.dim(1) != stats.channels ||
      utt.frames.dim(2) != stats.bins)
    throw ShapeError("utterance '" + utt.id + "' geometry " +
                     ShapeString(utt.frames.shape()) + " does not match stats " +
                     std::to_string(stats.channels) + "x" + std::to_string(stats.bins));
  UtteranceFeatures out = utt;
  const std::size_t dim = stats.mean.size();
  for (std::size_t i = 0; i < out.frames.size(); ++i)
    out.frames[i] = static_cast<float>((utt.frames[i] - stats.mean[i % dim]) /
                                       std::sqrt(stats.var[i % dim]));
  return out;
}

void WriteCmvnStats(const CmvnStats& stats, const std::string& path) {
  binary::Writer w;
  w.Bytes("CMV1");
  w.U32(1);
  w.U32(static_cast<std::uint32_t>(stats.channels));
  w.U32(static_cast<std::uint32_t>(stats.bins));
  w.U64(stats.frames);
  for (double m : stats.mean) w.F64(m);
  for (double v : stats.var) w.F64(v);
  binary::WriteFile(path, w.buffer());
}

CmvnStats ReadCmvnStats(const std::string& path) {
  const std::string bytes = binary::ReadFile(path);
  binary::Reader r(bytes, "stats file '" + path + "'");
  r.Magic("CMV1");
  const std::size_t at = r.offset();
  if (const auto v = r.U32(); v != 1) r.Fail("unsupported version " + std::to_string(v), at);
  CmvnStats stats;
  stats.channels = static_cast<int>(r.U32());
  stats.bins = static_cast<int>(r.U32());
  stats.frames = r.U64();
  const std::size_t dim = static_cast<std::size_t>(stats.channels) * stats.bins;
  if (dim * 16 != r.remaining()) r.Fail("payload size does not match header");
  stats.mean.resize(dim);
  stats.var.resize(dim);
  for (auto& m : stats.mean) m = r.F64();
  for (auto& v : stats.var) v = r.F64();
  return stats;
}

Tensor<float> SpliceContext(const Tensor<float>& feats, int left, int right) {
  if (feats.rank() != 3) throw ShapeError("splice expects T x channels x bins");
  if (left < 0 || right < 0) throw ConfigError("context widths must be non-negative");
  const int T = feats.dim(0), C = feats.dim(1), B = feats.dim(2);
  const int H = left + 1 + right;
  Tensor<float> out({T, C, H, B});
  float* dst = out.data().data();
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h) {
        const int src_t = std::clamp(t - left + h, 0, T - 1);
        const float* src = feats.data().data() + (static_cast<std::size_t>(src_t) * C + c) * B;
        dst = std::copy_n(src, B, dst);
      }
  return out;
}

}  // namespace densenet
