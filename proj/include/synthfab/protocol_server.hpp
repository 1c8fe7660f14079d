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

#include <memory>
#include <string>
#include <vector>

#include "synthfab/gateway.hpp"

namespace synthfab::protocol {

// Serves the wire protocol on top of any Gateway. Used to expose the mock
// backend over HTTP and as the reference peer for client tests.
// Schema violations are answered with 400, backend failures with 500.
class ProtocolServer {
 public:
  explicit ProtocolServer(gateway::Gateway& backend);
  ~ProtocolServer();
  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  // Binds (port 0 picks a free port), serves on a background thread and
  // returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop() is called from elsewhere.
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Exercises every endpoint through `client` and checks the response
// contracts: counts, sizes, score bounds, non-empty captions.
std::vector<ConformanceCheck> check_conformance(gateway::Gateway& client);

}  // namespace synthfab::protocol
