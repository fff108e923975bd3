// include/densenet/keyvalue.h

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

#ifndef DENSENET_KEYVALUE_H_
#define DENSENET_KEYVALUE_H_

// Strict scalar parsing for key=value configuration text. Each parser throws
// ConfigError naming the key when the whole value does not parse.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace densenet {

int ParseInt(std::string_view key, std::string_view value);
std::uint64_t ParseUint64(std::string_view key, std::string_view value);
double ParseDouble(std::string_view key, std::string_view value);
bool ParseBool(std::string_view key, std::string_view value);

/// Shortest text that parses back to exactly `v`.
std::string FormatDouble(double v);

/// Parses "key=value" lines. Blank lines and lines starting with '#' are
/// skipped; whitespace around keys and values is trimmed. Duplicate keys keep
/// the last value. Throws ConfigError on a line without '='.
std::map<std::string, std::string> ParseKeyValueText(std::string_view text);

}  // namespace densenet

#endif  // DENSENET_KEYVALUE_H_
