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
#include "synthfab/gateway.hpp"

#include "synthfab/error.hpp"
#include "synthfab/mock_backend.hpp"
#include "synthfab/remote_gateway.hpp"
#include "synthfab/rng.hpp"

namespace synthfab::gateway {

void GenerationRequest::validate() const {
  require(n >= 1, Errc::kInvalidArgument, "generation batch must request n >= 1 images");
  require(n <= kMaxImagesPerCall, Errc::kInvalidArgument,
          "generation batch n=" + std::to_string(n) + " exceeds " +
              std::to_string(kMaxImagesPerCall));
  auto valid_side = [](int v) { return v >= 64 && v <= 2048 && v % 8 == 0; };
  require(valid_side(width) && valid_side(height), Errc::kInvalidArgument,
          "image size " + std::to_string(width) + "x" + std::to_string(height) +
              " must be in [64, 2048] and a multiple of 8");
  require(!prompt.empty(), Errc::kInvalidArgument, "generation prompt is empty");
}

std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config,
                                      const prompting::TemplateSet& templates) {
  if (config.backend == Backend::kMock) return std::make_unique<MockGateway>(templates);
  return std::make_unique<RemoteGateway>(config);
}

std::vector<Candidate> generate_candidates(Gateway& gateway, const std::string& prompt,
                                           int count, std::uint64_t batch_seed, int width,
                                           int height) {
  require(count >= 1, Errc::kInvalidArgument, "candidate count must be >= 1");
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int call = 0; static_cast<int>(out.size()) < count; ++call) {
    GenerationRequest request;
    request.prompt = prompt;
    request.n = std::min(kMaxImagesPerCall, count - static_cast<int>(out.size()));
    request.seed = derive_seed(batch_seed, {static_cast<std::uint64_t>(call)});
    request.width = width;
    request.height = height;
    std::vector<Image> images = gateway.generate_images(request);
    require(static_cast<int>(images.size()) == request.n, Errc::kBadResponse,
            "generator returned " + std::to_string(images.size()) + " images, expected " +
                std::to_string(request.n));
    for (int i = 0; i < request.n; ++i) {
      require(images[i].width == width && images[i].height == height, Errc::kBadResponse,
              "generator returned an image of the wrong size");
      out.push_back(Candidate{std::move(images[i]), request.seed, i});
    }
  }
  return out;
}

}  // namespace synthfab::gateway
