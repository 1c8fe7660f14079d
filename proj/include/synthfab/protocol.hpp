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

#include <string>
#include <string_view>
#include <vector>

#include "synthfab/gateway.hpp"
#include "synthfab/image.hpp"

// JSON-over-HTTP wire format shared with model sidecars. Images travel as
// base64-encoded PNG, so textual metadata chunks survive the trip.
//
//   POST /v1/generate  {"prompt", "n", "seed", "width", "height"} -> {"images": [b64]}
//   POST /v1/score     {"image": b64, "texts": [str]}            -> {"scores": [float]}
//   POST /v1/caption   {"image": b64, "n": int}                  -> {"captions": [str]}
namespace synthfab::protocol {

inline constexpr const char* kGeneratePath = "/v1/generate";
inline constexpr const char* kScorePath = "/v1/score";
inline constexpr const char* kCaptionPath = "/v1/caption";

using GenerateRequest = gateway::GenerationRequest;

struct GenerateResponse {
  std::vector<Image> images;
  bool operator==(const GenerateResponse&) const = default;
};

struct ScoreRequest {
  Image image;
  std::vector<std::string> texts;
  bool operator==(const ScoreRequest&) const = default;
};

struct ScoreResponse {
  std::vector<double> scores;
  bool operator==(const ScoreResponse&) const = default;
};

struct CaptionRequest {
  Image image;
  int n = 1;
  bool operator==(const CaptionRequest&) const = default;
};

struct CaptionResponse {
  std::vector<std::string> captions;
  bool operator==(const CaptionResponse&) const = default;
};

std::string encode(const GenerateRequest& m);
std::string encode(const GenerateResponse& m);
std::string encode(const ScoreRequest& m);
std::string encode(const ScoreResponse& m);
std::string encode(const CaptionRequest& m);
std::string encode(const CaptionResponse& m);

// Decoders validate the schema strictly (required keys, JSON types, value
// ranges) and throw Error(kBadResponse) on any violation.
GenerateRequest decode_generate_request(std::string_view body);
GenerateResponse decode_generate_response(std::string_view body);
ScoreRequest decode_score_request(std::string_view body);
ScoreResponse decode_score_response(std::string_view body);
CaptionRequest decode_caption_request(std::string_view body);
CaptionResponse decode_caption_response(std::string_view body);

}  // namespace synthfab::protocol
