// include/densenet/errors.h

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

#ifndef DENSENET_ERRORS_H_
#define DENSENET_ERRORS_H_

#include <stdexcept>
#include <string>

namespace densenet {

/// Base of every error raised by the library. The CLI maps each subclass to
/// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or parameter shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid architecture, training or feature configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file (archive, checkpoint, stats, WAV).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, or training diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: missing file, empty corpus, missing labels.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Class id outside [0, num_classes).
class LabelError : public Error {
 public:
  using Error::Error;
};

}  // namespace densenet

#endif  // DENSENET_ERRORS_H_
