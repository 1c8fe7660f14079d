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
#include "synthfab/protocol_server.hpp"

#include <cmath>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "synthfab/error.hpp"
#include "synthfab/protocol.hpp"

namespace synthfab::protocol {

struct ProtocolServer::Impl {
  explicit Impl(gateway::Gateway& b) : backend(b) {}

  template <typename Handler>
  void route(const char* path, Handler handler) {
    server.Post(path, [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(handler(req.body), "application/json");
        res.status = 200;
      } catch (const Error& e) {
        const bool client_fault =
            e.code() == Errc::kBadResponse || e.code() == Errc::kInvalidArgument;
        res.status = client_fault ? 400 : 500;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  }

  gateway::Gateway& backend;
  httplib::Server server;
  std::thread thread;
};

ProtocolServer::ProtocolServer(gateway::Gateway& backend) : impl_(std::make_unique<Impl>(backend)) {
  auto& backend_ref = impl_->backend;
  impl_->route(kGeneratePath, [&backend_ref](const std::string& body) {
    const GenerateRequest request = decode_generate_request(body);
    return encode(GenerateResponse{backend_ref.generate_images(request)});
  });
  impl_->route(kScorePath, [&backend_ref](const std::string& body) {
    const ScoreRequest request = decode_score_request(body);
    return encode(ScoreResponse{backend_ref.score_image_text(request.image, request.texts)});
  });
  impl_->route(kCaptionPath, [&backend_ref](const std::string& body) {
    const CaptionRequest request = decode_caption_request(body);
    return encode(CaptionResponse{backend_ref.caption_image(request.image, request.n)});
  });
}

ProtocolServer::~ProtocolServer() { stop(); }

int ProtocolServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else {
    require(impl_->server.bind_to_port(host, port), Errc::kIoFailure,
            "cannot bind " + host + ":" + std::to_string(port));
  }
  require(bound > 0, Errc::kIoFailure, "cannot bind " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool ProtocolServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

void ProtocolServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::vector<ConformanceCheck> check_conformance(gateway::Gateway& client) {
  std::vector<ConformanceCheck> checks;
  auto run = [&checks](const std::string& name, auto&& body) {
    try {
      std::string detail = body();
      checks.push_back({name, detail.empty(), detail.empty() ? "ok" : detail});
    } catch (const std::exception& e) {
      checks.push_back({name, false, e.what()});
    }
  };

  std::vector<Image> images;
  run("generate", [&]() -> std::string {
    gateway::GenerationRequest request{"A photo of dog in pure background", 2, 7, 64, 64};
    images = client.generate_images(request);
    if (images.size() != 2) return "expected 2 images, got " + std::to_string(images.size());
    for (const Image& image : images) {
      if (image.width != 64 || image.height != 64) return "wrong image size";
    }
    return {};
  });
  const Image probe = images.empty() ? Image(64, 64, 3, 128) : images.front();
  run("score", [&]() -> std::string {
    const std::vector<std::string> texts = {"a photo of dog", "blue sky", "an empty street"};
    const std::vector<double> scores = client.score_image_text(probe, texts);
    if (scores.size() != texts.size()) return "score count mismatch";
    for (double s : scores) {
      if (!std::isfinite(s) || s < -1.0 || s > 1.0) return "score out of [-1, 1]";
    }
    return {};
  });
  run("caption", [&]() -> std::string {
    const std::vector<std::string> captions = client.caption_image(probe, 2);
    if (captions.size() != 2) return "expected 2 captions";
    for (const std::string& c : captions) {
      if (c.empty()) return "empty caption";
    }
    return {};
  });
  return checks;
}

}  // namespace synthfab::protocol
