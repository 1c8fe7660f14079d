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

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "synthfab/image.hpp"

namespace synthfab::prompting {
class TemplateSet;
}

namespace synthfab::gateway {

struct GenerationRequest {
  std::string prompt;
  int n = 1;
  std::uint64_t seed = 0;
  int width = 512;
  int height = 512;

  // n in [1, 64]; width/height in [64, 2048] and multiples of 8.
  void validate() const;
  bool operator==(const GenerationRequest&) const = default;
};

inline constexpr int kMaxImagesPerCall = 64;

// A candidate image with its similarity scores and where it came from.
struct ScoredImage {
  Image image;
  double faithfulness = 0.0;
  std::map<std::string, double> class_similarities;
  std::uint64_t seed = 0;
  int index = 0;
  std::string id;
  // Interest class the candidate was generated for; excluded from the class
  // penalty. Empty for backgrounds.
  std::string own_label;
};

// The three model capabilities the pipeline consumes. Implementations must be
// safe to call from several threads at once.
class Gateway {
 public:
  virtual ~Gateway() = default;

  virtual std::vector<Image> generate_images(const GenerationRequest& request) = 0;
  // One score in [-1, 1] per text, order-aligned.
  virtual std::vector<double> score_image_text(const Image& image,
                                               std::span<const std::string> texts) = 0;
  virtual std::vector<std::string> caption_image(const Image& image, int n) = 0;
};

enum class Backend { kMock, kRemote };

struct GatewayConfig {
  Backend backend = Backend::kMock;
  std::string endpoint = "http://127.0.0.1:8765";
  double timeout_seconds = 120.0;
  int max_retries = 3;
  double backoff_initial_seconds = 0.5;
  double backoff_max_seconds = 8.0;
  int max_in_flight = 4;
};

std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config,
                                      const prompting::TemplateSet& templates);

// A generated image plus the (seed, index) pair that reproduces it.
struct Candidate {
  Image image;
  std::uint64_t seed = 0;
  int index = 0;
};

// Generates `count` images for `prompt`, split into calls of at most
// kMaxImagesPerCall. Call c uses seed derive_seed(batch_seed, {c}).
std::vector<Candidate> generate_candidates(Gateway& gateway, const std::string& prompt,
                                           int count, std::uint64_t batch_seed, int width,
                                           int height);

}  // namespace synthfab::gateway
