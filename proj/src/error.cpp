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
#include "synthfab/error.hpp"

namespace synthfab {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kInvalidLabel: return "InvalidLabel";
    case Errc::kUnknownTemplate: return "UnknownTemplate";
    case Errc::kGatewayUnavailable: return "GatewayUnavailable";
    case Errc::kBadResponse: return "BadResponse";
    case Errc::kEmptyBatch: return "EmptyBatch";
    case Errc::kNoForeground: return "NoForeground";
    case Errc::kBackgroundNotUniform: return "BackgroundNotUniform";
    case Errc::kOversizedForeground: return "OversizedForeground";
    case Errc::kEmptyMask: return "EmptyMask";
    case Errc::kDegenerateTransform: return "DegenerateTransform";
    case Errc::kOutOfBounds: return "OutOfBounds";
    case Errc::kNoBackground: return "NoBackground";
    case Errc::kEmptyPool: return "EmptyPool";
    case Errc::kIoFailure: return "IoFailure";
    case Errc::kSchemaInvariantViolation: return "SchemaInvariantViolation";
    case Errc::kCategoryMismatch: return "CategoryMismatch";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kPipelineFailure: return "PipelineFailure";
  }
  return "Unknown";
}

}  // namespace synthfab
