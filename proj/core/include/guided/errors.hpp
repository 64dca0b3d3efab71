// Copyright 2026 The Guided Grounding Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GUIDED_ERRORS_HPP_
#define GUIDED_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace guided {

// Error categories. Each maps onto one CLI exit status.
enum class ErrorKind {
  kConfig,     // invalid configuration or arguments
  kDimension,  // shape mismatch between operands
  kUsage,      // API precondition violated by the caller
  kFormat,     // malformed file contents
  kData,       // missing or inconsistent dataset contents
  kIo,         // filesystem failure
  kNumeric,    // non-finite values during computation
};

std::string_view error_kind_name(ErrorKind kind);

// Process exit status for an error kind: config and usage errors exit 2,
// data-side errors (dimension, format, data, io) exit 3, numeric errors 4.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfig, m) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m)
      : Error(ErrorKind::kDimension, m) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& m) : Error(ErrorKind::kUsage, m) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error(ErrorKind::kFormat, m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error(ErrorKind::kData, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m)
      : Error(ErrorKind::kNumeric, m) {}
};

}  // namespace guided

#endif  // GUIDED_ERRORS_HPP_
