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

#include <atomic>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>

#include "synthfab/gateway.hpp"

namespace synthfab::gateway {

// Delay before retry number `retry` (0-based): initial * 2^retry, capped.
double backoff_delay(const GatewayConfig& config, int retry);

// Client for a model sidecar speaking the protocol in protocol.hpp.
//
// Connection failures, timeouts, 429 and 5xx responses raise
// kGatewayUnavailable after being retried with exponential backoff; at most
// 1 + max_retries attempts are made per call. Any other status, or a body
// that fails schema validation, raises kBadResponse immediately.
class RemoteGateway final : public Gateway {
 public:
  explicit RemoteGateway(GatewayConfig config);
  ~RemoteGateway() override;

  std::vector<Image> generate_images(const GenerationRequest& request) override;
  std::vector<double> score_image_text(const Image& image,
                                       std::span<const std::string> texts) override;
  std::vector<std::string> caption_image(const Image& image, int n) override;

  // HTTP attempts issued so far, across all calls.
  std::uint64_t attempts() const { return attempts_.load(); }

 private:
  std::string post(const std::string& path, const std::string& body);

  GatewayConfig config_;
  std::string host_;
  std::string base_path_;
  std::unique_ptr<std::counting_semaphore<1024>> in_flight_;
  std::atomic<std::uint64_t> attempts_{0};
};

}  // namespace synthfab::gateway
