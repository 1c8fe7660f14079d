// Copyright 2026 The Synthfab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <stdexcept>
#include <string>

namespace synthfab {

enum class Errc {
  kInvalidArgument,
  kInvalidLabel,
  kUnknownTemplate,
  kGatewayUnavailable,
  kBadResponse,
  kEmptyBatch,
  kNoForeground,
  kBackgroundNotUniform,
  kOversizedForeground,
  kEmptyMask,
  kDegenerateTransform,
  kOutOfBounds,
  kNoBackground,
  kEmptyPool,
  kIoFailure,
  kSchemaInvariantViolation,
  kCategoryMismatch,
  kConfigError,
  kPipelineFailure,
};

const char* errc_name(Errc code);

// Every failure the library reports carries one of the codes above; callers
// dispatch on code(), the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace synthfab
