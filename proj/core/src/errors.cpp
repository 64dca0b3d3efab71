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

#include "guided/errors.hpp"

namespace guided {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kDimension:
      return "dimension";
    case ErrorKind::kUsage:
      return "usage";
    case ErrorKind::kFormat:
      return "format";
    case ErrorKind::kData:
      return "data";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kNumeric:
      return "numeric";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kUsage:
      return 2;
    case ErrorKind::kDimension:
    case ErrorKind::kFormat:
    case ErrorKind::kData:
    case ErrorKind::kIo:
      return 3;
    case ErrorKind::kNumeric:
      return 4;
  }
  return 1;
}

}  // namespace guided
