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
#include "synthfab/protocol.hpp"

#include <cmath>

#include <json.hpp>

#include "synthfab/error.hpp"
#include "synthfab/image_io.hpp"

namespace synthfab::protocol {
namespace {

using nlohmann::json;

json parse_object(std::string_view body) {
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  require(!j.is_discarded(), Errc::kBadResponse, "body is not valid JSON");
  require(j.is_object(), Errc::kBadResponse, "body is not a JSON object");
  return j;
}

const json& field(const json& j, const char* key) {
  const auto it = j.find(key);
  require(it != j.end(), Errc::kBadResponse, std::string("missing field '") + key + "'");
  return *it;
}

std::int64_t int_field(const json& j, const char* key) {
  const json& v = field(j, key);
  require(v.is_number_integer(), Errc::kBadResponse, std::string("'") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  require(v.is_string(), Errc::kBadResponse, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

const json& array_field(const json& j, const char* key) {
  const json& v = field(j, key);
  require(v.is_array(), Errc::kBadResponse, std::string("'") + key + "' must be an array");
  return v;
}

std::string image_to_wire(const Image& image) { return base64_encode(encode_png(image)); }

Image image_from_wire(const json& v) {
  require(v.is_string(), Errc::kBadResponse, "image must be a base64 string");
  return decode_png(base64_decode(v.get<std::string>()));
}

std::vector<std::string> string_array(const json& arr, const char* what) {
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const json& v : arr) {
    require(v.is_string(), Errc::kBadResponse, std::string(what) + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::string encode(const GenerateRequest& m) {
  return json{{"prompt", m.prompt}, {"n", m.n}, {"seed", m.seed}, {"width", m.width},
              {"height", m.height}}
      .dump();
}

std::string encode(const GenerateResponse& m) {
  json images = json::array();
  for (const Image& image : m.images) images.push_back(image_to_wire(image));
  return json{{"images", images}}.dump();
}

std::string encode(const ScoreRequest& m) {
  return json{{"image", image_to_wire(m.image)}, {"texts", m.texts}}.dump();
}

std::string encode(const ScoreResponse& m) { return json{{"scores", m.scores}}.dump(); }

std::string encode(const CaptionRequest& m) {
  return json{{"image", image_to_wire(m.image)}, {"n", m.n}}.dump();
}

std::string encode(const CaptionResponse& m) { return json{{"captions", m.captions}}.dump(); }

GenerateRequest decode_generate_request(std::string_view body) {
  const json j = parse_object(body);
  GenerateRequest m;
  m.prompt = string_field(j, "prompt");
  m.n = static_cast<int>(int_field(j, "n"));
  const json& seed = field(j, "seed");
  require(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0),
          Errc::kBadResponse, "'seed' must be a non-negative integer");
  m.seed = seed.get<std::uint64_t>();
  m.width = static_cast<int>(int_field(j, "width"));
  m.height = static_cast<int>(int_field(j, "height"));
  try {
    m.validate();
  } catch (const Error& e) {
    fail(Errc::kBadResponse, e.what());
  }
  return m;
}

GenerateResponse decode_generate_response(std::string_view body) {
  const json j = parse_object(body);
  GenerateResponse m;
  for (const json& v : array_field(j, "images")) m.images.push_back(image_from_wire(v));
  return m;
}

ScoreRequest decode_score_request(std::string_view body) {
  const json j = parse_object(body);
  ScoreRequest m;
  m.image = image_from_wire(field(j, "image"));
  m.texts = string_array(array_field(j, "texts"), "texts");
  require(!m.texts.empty(), Errc::kBadResponse, "'texts' must be non-empty");
  return m;
}

ScoreResponse decode_score_response(std::string_view body) {
  const json j = parse_object(body);
  ScoreResponse m;
  for (const json& v : array_field(j, "scores")) {
    require(v.is_number(), Errc::kBadResponse, "scores must be numbers");
    const double s = v.get<double>();
    require(std::isfinite(s) && s >= -1.0 && s <= 1.0, Errc::kBadResponse,
            "score outside [-1, 1]");
    m.scores.push_back(s);
  }
  return m;
}

CaptionRequest decode_caption_request(std::string_view body) {
  const json j = parse_object(body);
  CaptionRequest m;
  m.image = image_from_wire(field(j, "image"));
  m.n = static_cast<int>(int_field(j, "n"));
  require(m.n >= 1, Errc::kBadResponse, "'n' must be >= 1");
  return m;
}

CaptionResponse decode_caption_response(std::string_view body) {
  const json j = parse_object(body);
  CaptionResponse m;
  m.captions = string_array(array_field(j, "captions"), "captions");
  return m;
}

}  // namespace synthfab::protocol
