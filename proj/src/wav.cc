// src/wav.cc

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

#include "densenet/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "binary_io.h"

namespace densenet {

namespace {

std::uint16_t U16(binary::Reader& r) {
  auto b = r.Bytes(2);
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                    (static_cast<unsigned char>(b[1]) << 8));
}

}  // namespace

WaveData DecodeWav(std::string_view bytes) {
  binary::Reader r(bytes, "wav");
  r.Magic("RIFF");
  r.U32();  // riff size; some writers get it wrong, so it is not checked
  r.Magic("WAVE");
  WaveData wave;
  bool have_format = false;
  while (!r.at_end()) {
    const std::size_t chunk_at = r.offset();
    const std::string id(r.Bytes(4));
    const std::uint32_t size = r.U32();
    r.set_context("chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) r.Fail("format chunk too short", chunk_at);
      const std::size_t body = r.offset();
      const std::uint16_t format = U16(r);
      const std::uint16_t channels = U16(r);
      const std::uint32_t rate = r.U32();
      r.U32();  // byte rate
      U16(r);   // block align
      const std::uint16_t bits = U16(r);
      if (format != 1 && format != 0xfffe) r.Fail("not PCM (format tag " + std::to_string(format) + ")", body);
      if (channels != 1) r.Fail(std::to_string(channels) + " channels, expected mono", body);
      if (bits != 16) r.Fail(std::to_string(bits) + "-bit samples, expected 16", body);
      if (rate == 0 || rate > 1000000) r.Fail("implausible sample rate " + std::to_string(rate), body);
      wave.sample_rate = static_cast<int>(rate);
      r.Bytes(size - 16);
      have_format = true;
    } else if (id == "data") {
      if (!have_format) r.Fail("data chunk before format chunk", chunk_at);
      if (size % 2 != 0) r.Fail("odd data size " + std::to_string(size), chunk_at);
      auto data = r.Bytes(size);
      wave.samples.resize(size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto lo = static_cast<unsigned char>(data[2 * i]);
        const auto hi = static_cast<unsigned char>(data[2 * i + 1]);
        wave.samples[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      }
      return wave;
    } else {
      r.Bytes(size);
    }
    if (size % 2 == 1 && !r.at_end()) r.Bytes(1);
  }
  r.set_context("");
  r.Fail(have_format ? "no data chunk" : "no format chunk");
}

WaveData ReadWav(const std::string& path) { return DecodeWav(binary::ReadFile(path)); }

std::string EncodeWav(std::span<const float> samples, int sample_rate) {
  binary::Writer w;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  w.Bytes("RIFF");
  w.U32(36 + data_bytes);
  w.Bytes("WAVEfmt ");
  w.U32(16);
  w.Bytes(std::string_view("\x01\x00\x01\x00", 4));  // PCM, mono
  w.U32(static_cast<std::uint32_t>(sample_rate));
  w.U32(static_cast<std::uint32_t>(sample_rate) * 2);
  w.Bytes(std::string_view("\x02\x00\x10\x00", 4));  // block align 2, 16 bits
  w.Bytes("data");
  w.U32(data_bytes);
  std::string pcm(samples.size() * 2, '\0');
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = static_cast<std::int16_t>(
        std::clamp(std::lround(samples[i]), -32768L, 32767L));
    const auto u = static_cast<std::uint16_t>(v);
    pcm[2 * i] = static_cast<char>(u & 0xff);
    pcm[2 * i + 1] = static_cast<char>(u >> 8);
  }
  w.Bytes(pcm);
  return w.buffer();
}

void WriteWav(const std::string& path, std::span<const float> samples, int sample_rate) {
  binary::WriteFile(path, EncodeWav(samples, sample_rate));
}

}  // namespace densenet
