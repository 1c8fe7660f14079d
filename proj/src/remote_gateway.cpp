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
#include "synthfab/remote_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "synthfab/error.hpp"
#include "synthfab/protocol.hpp"

namespace synthfab::gateway {
namespace {

bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SemaphoreGuard() { sem_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

double backoff_delay(const GatewayConfig& config, int retry) {
  return std::min(config.backoff_max_seconds,
                  config.backoff_initial_seconds * std::pow(2.0, retry));
}

RemoteGateway::RemoteGateway(GatewayConfig config) : config_(std::move(config)) {
  require(config_.max_retries >= 0, Errc::kConfigError, "max_retries must be >= 0");
  require(config_.max_in_flight >= 1 && config_.max_in_flight <= 1024, Errc::kConfigError,
          "max_in_flight must be in [1, 1024]");
  require(config_.timeout_seconds > 0, Errc::kConfigError, "timeout must be positive");
  const std::string& url = config_.endpoint;
  const std::size_t scheme = url.find("://");
  require(scheme != std::string::npos && url.substr(0, scheme) == "http", Errc::kConfigError,
          "endpoint must be an http:// URL, got '" + url + "'");
  const std::size_t path_start = url.find('/', scheme + 3);
  host_ = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    base_path_ = url.substr(path_start);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  }
  in_flight_ = std::make_unique<std::counting_semaphore<1024>>(config_.max_in_flight);
}

RemoteGateway::~RemoteGateway() = default;

std::string RemoteGateway::post(const std::string& path, const std::string& body) {
  SemaphoreGuard guard(*in_flight_);
  const auto timeout_sec = static_cast<time_t>(config_.timeout_seconds);
  const auto timeout_usec = static_cast<time_t>(
      (config_.timeout_seconds - static_cast<double>(timeout_sec)) * 1e6);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::duration<double>(backoff_delay(config_, attempt - 1)));
    }
    ++attempts_;
    httplib::Client client(host_);
    client.set_connection_timeout(timeout_sec, timeout_usec);
    client.set_read_timeout(timeout_sec, timeout_usec);
    client.set_write_timeout(timeout_sec, timeout_usec);
    const httplib::Result result = client.Post(base_path_ + path, body, "application/json");
    if (!result) {
      last_error = "request to " + host_ + base_path_ + path + " failed: " +
                   httplib::to_string(result.error());
      continue;
    }
    if (result->status == 200) return result->body;
    if (retryable_status(result->status)) {
      last_error = "HTTP " + std::to_string(result->status) + " from " + path;
      continue;
    }
    fail(Errc::kBadResponse, "HTTP " + std::to_string(result->status) + " from " + path + ": " +
                                 result->body.substr(0, 200));
  }
  fail(Errc::kGatewayUnavailable, last_error + " (after " +
                                      std::to_string(config_.max_retries + 1) + " attempts)");
}

std::vector<Image> RemoteGateway::generate_images(const GenerationRequest& request) {
  request.validate();
  protocol::GenerateResponse response =
      protocol::decode_generate_response(post(protocol::kGeneratePath, protocol::encode(request)));
  require(static_cast<int>(response.images.size()) == request.n, Errc::kBadResponse,
          "generate returned " + std::to_string(response.images.size()) + " images, expected " +
              std::to_string(request.n));
  for (const Image& image : response.images) {
    require(image.width == request.width && image.height == request.height, Errc::kBadResponse,
            "generate returned an image of the wrong size");
  }
  return std::move(response.images);
}

std::vector<double> RemoteGateway::score_image_text(const Image& image,
                                                    std::span<const std::string> texts) {
  require(!texts.empty(), Errc::kInvalidArgument, "score_image_text needs at least one text");
  protocol::ScoreRequest request{image, std::vector<std::string>(texts.begin(), texts.end())};
  protocol::ScoreResponse response =
      protocol::decode_score_response(post(protocol::kScorePath, protocol::encode(request)));
  require(response.scores.size() == texts.size(), Errc::kBadResponse,
          "score returned " + std::to_string(response.scores.size()) + " values for " +
              std::to_string(texts.size()) + " texts");
  return std::move(response.scores);
}

std::vector<std::string> RemoteGateway::caption_image(const Image& image, int n) {
  require(n >= 1, Errc::kInvalidArgument, "caption count must be >= 1");
  protocol::CaptionRequest request{image, n};
  protocol::CaptionResponse response =
      protocol::decode_caption_response(post(protocol::kCaptionPath, protocol::encode(request)));
  require(static_cast<int>(response.captions.size()) == n, Errc::kBadResponse,
          "caption returned " + std::to_string(response.captions.size()) + " captions, expected " +
              std::to_string(n));
  return std::move(response.captions);
}

}  // namespace synthfab::gateway
