// src/binary_io.h

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

#ifndef DENSENET_SRC_BINARY_IO_H_
#define DENSENET_SRC_BINARY_IO_H_

// Little-endian encoding helpers shared by the archive, statistics and
// checkpoint formats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "densenet/errors.h"

namespace densenet::binary {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

class Writer {
 public:
  void Bytes(std::string_view bytes) { out_.append(bytes); }
  void U32(std::uint32_t v) { Raw(&v, sizeof v); }
  void U64(std::uint64_t v) { Raw(&v, sizeof v); }
  void F32(float v) { Raw(&v, sizeof v); }
  void F64(double v) { Raw(&v, sizeof v); }
  void F32s(std::span<const float> v) { Raw(v.data(), v.size_bytes()); }
  void String(std::string_view s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Bytes(s);
  }
  const std::string& buffer() const { return out_; }

 private:
  void Raw(const void* p, std::size_t n) {
    out_.append(static_cast<const char*>(p), n);
  }
  std::string out_;
};

/// Reads from an in-memory file image. Every failure is a FormatError that
/// names `what` (the file kind), the byte offset and the current context.
class Reader {
 public:
  Reader(std::string_view data, std::string what)
      : data_(data), what_(std::move(what)) {}

  void set_context(std::string context) { context_ = std::move(context); }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  std::string_view Bytes(std::size_t n) {
    Need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string_view Peek(std::size_t n) const {
    return data_.substr(pos_, std::min(n, remaining()));
  }
  void Magic(std::string_view magic) {
    const std::size_t at = pos_;
    if (Bytes(magic.size()) != magic) Fail("bad magic, expected '" + std::string(magic) + "'", at);
  }
  std::uint32_t U32() { return Scalar<std::uint32_t>(); }
  std::uint64_t U64() { return Scalar<std::uint64_t>(); }
  float F32() { return Scalar<float>(); }
  double F64() { return Scalar<double>(); }
  void F32s(std::span<float> out) {
    auto bytes = Bytes(out.size_bytes());
    std::memcpy(out.data(), bytes.data(), bytes.size());
  }
  std::string String(std::uint32_t max_len) {
    const std::size_t at = pos_;
    const std::uint32_t n = U32();
    if (n > max_len) Fail("string length " + std::to_string(n) + " exceeds " + std::to_string(max_len), at);
    return std::string(Bytes(n));
  }

  [[noreturn]] void Fail(const std::string& why) const { Fail(why, pos_); }
  [[noreturn]] void Fail(const std::string& why, std::size_t at) const {
    std::string msg = what_ + ": " + why + " at byte offset " + std::to_string(at);
    if (!context_.empty()) msg += " (" + context_ + ")";
    throw FormatError(msg);
  }

 private:
  template <typename V>
  V Scalar() {
    V v;
    auto bytes = Bytes(sizeof v);
    std::memcpy(&v, bytes.data(), sizeof v);
    return v;
  }
  void Need(std::size_t n) const {
    if (remaining() < n)
      Fail("truncated: need " + std::to_string(n) + " bytes, " +
           std::to_string(remaining()) + " left");
  }

  std::string_view data_;
  std::string what_;
  std::string context_;
  std::size_t pos_ = 0;
};

/// Whole-file helpers; failures are InputError naming the path.
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view bytes);

}  // namespace densenet::binary

#endif  // DENSENET_SRC_BINARY_IO_H_
