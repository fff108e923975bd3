// src/keyvalue.cc

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

#include "densenet/keyvalue.h"

#include <charconv>
#include <cmath>

#include "densenet/errors.h"

namespace densenet {

namespace {

[[noreturn]] void Bad(std::string_view key, std::string_view value,
                      std::string_view want) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" +
                    std::string(key) + "': expected " + std::string(want));
}

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int ParseInteger(std::string_view key, std::string_view value) {
  Int out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    Bad(key, value, "an integer");
  return out;
}

}  // namespace

int ParseInt(std::string_view key, std::string_view value) {
  return ParseInteger<int>(key, value);
}

std::uint64_t ParseUint64(std::string_view key, std::string_view value) {
  return ParseInteger<std::uint64_t>(key, value);
}

double ParseDouble(std::string_view key, std::string_view value) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty() ||
      !std::isfinite(out))
    Bad(key, value, "a finite real number");
  return out;
}

bool ParseBool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  Bad(key, value, "a boolean (true/false)");
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::map<std::string, std::string> ParseKeyValueText(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = Trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value, got '" + std::string(line) + "'");
    kv[std::string(Trim(line.substr(0, eq)))] = std::string(Trim(line.substr(eq + 1)));
  }
  return kv;
}

}  // namespace densenet
