// src/archive.cc

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

#include "densenet/archive.h"

#include "binary_io.h"

namespace densenet {

std::string EncodeArchive(const FeatureArchive& archive) {
  binary::Writer w;
  w.Bytes("FBK1");
  w.U32(kArchiveVersion);
  w.String(archive.metadata);
  w.U32(static_cast<std::uint32_t>(archive.utterances.size()));
  for (const auto& utt : archive.utterances) {
    utt.Validate();
    if (utt.id.size() > kMaxUtteranceIdLength)
      throw InputError("utterance id of " + std::to_string(utt.id.size()) +
                       " bytes is too long for an archive");
    w.String(utt.id);
    for (int d = 0; d < 3; ++d) w.U32(static_cast<std::uint32_t>(utt.frames.dim(d)));
    w.F32s(utt.frames.data());
    if (utt.labels) {
      w.Bytes("LBL1");
      for (int label : *utt.labels) {
        if (label < 0) throw LabelError("utterance '" + utt.id + "' has a negative label");
        w.U32(static_cast<std::uint32_t>(label));
      }
    }
  }
  return w.buffer();
}

FeatureArchive DecodeArchive(std::string_view bytes) {
  binary::Reader r(bytes, "feature archive");
  r.Magic("FBK1");
  const std::size_t version_at = r.offset();
  if (const auto v = r.U32(); v != kArchiveVersion)
    r.Fail("unsupported version " + std::to_string(v), version_at);
  FeatureArchive archive;
  r.set_context("metadata");
  archive.metadata = r.String(1 << 20);
  r.set_context("header");
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    r.set_context("record " + std::to_string(i));
    UtteranceFeatures utt;
    utt.id = r.String(kMaxUtteranceIdLength);
    r.set_context("record " + std::to_string(i) + " '" + utt.id + "'");
    const std::size_t dims_at = r.offset();
    Shape shape(3);
    for (auto& d : shape) d = static_cast<int>(r.U32());
    for (int d : shape)
      if (d <= 0) r.Fail("non-positive extent in " + ShapeString(shape), dims_at);
    const std::size_t values = ShapeSize(shape);
    if (values > r.remaining() / sizeof(float))
      r.Fail("truncated: " + std::to_string(values) + " values declared, " +
             std::to_string(r.remaining()) + " bytes left");
    utt.frames = Tensor<float>(shape);
    r.F32s(utt.frames.data());
    if (r.Peek(4) == "LBL1") {
      r.Bytes(4);
      std::vector<int> labels(shape[0]);
      for (int& label : labels) {
        const std::size_t at = r.offset();
        const std::uint32_t v = r.U32();
        if (v > 0x7fffffffu) r.Fail("label " + std::to_string(v) + " out of range", at);
        label = static_cast<int>(v);
      }
      utt.labels = std::move(labels);
    }
    archive.utterances.push_back(std::move(utt));
  }
  r.set_context("");
  if (!r.at_end()) r.Fail("trailing bytes after " + std::to_string(count) + " records");
  return archive;
}

void WriteArchive(const FeatureArchive& archive, const std::string& path) {
  binary::WriteFile(path, EncodeArchive(archive));
}

FeatureArchive ReadArchive(const std::string& path) {
  return DecodeArchive(binary::ReadFile(path));
}

}  // namespace densenet
