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
#include <atomic>
#include <csignal>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "synthfab/dataset_io.hpp"
#include "synthfab/error.hpp"
#include "synthfab/gateway.hpp"
#include "synthfab/image_io.hpp"
#include "synthfab/mock_backend.hpp"
#include "synthfab/pipeline.hpp"
#include "synthfab/pipeline_config.hpp"
#include "synthfab/protocol_server.hpp"

namespace fs = std::filesystem;
using namespace synthfab;
using namespace synthfab::pipeline;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string endpoint;
  std::optional<int> workers;
  std::string out = "workspace";
};

void add_common(CLI::App* cmd, Flags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "pipeline config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", f.seed, "master seed, overrides the config");
  cmd->add_option("--backend", f.backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--endpoint", f.endpoint, "sidecar base URL");
  cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::Range(1, 1024));
  cmd->add_option("--out", f.out, "workspace directory");
}

PipelineConfig resolve(const Flags& f) {
  PipelineConfig config = load_config(f.config);
  if (f.seed) config.master_seed = *f.seed;
  if (f.backend == "mock") config.gateway.backend = gateway::Backend::kMock;
  if (f.backend == "remote") config.gateway.backend = gateway::Backend::kRemote;
  if (!f.endpoint.empty()) config.gateway.endpoint = f.endpoint;
  if (f.workers) config.workers = *f.workers;
  config.validate();
  return config;
}

fs::path annotations_in(const fs::path& p) {
  if (fs::is_directory(p)) {
    if (fs::exists(p / "annotations.json")) return p / "annotations.json";
    // a workspace
    if (fs::exists(p / "mixed" / "annotations.json")) return p / "mixed" / "annotations.json";
    return p / "dataset" / "annotations.json";
  }
  return p;
}

int run_pipeline(const Flags& f, std::optional<Stage> stage) {
  const PipelineConfig config = resolve(f);
  const prompting::TemplateSet templates = config.load_templates();
  auto gw = gateway::make_gateway(config.gateway, templates);
  Logger logger(&std::cerr);
  fs::create_directories(f.out);
  Pipeline pipeline(config, f.out, *gw, logger);
  if (stage) {
    pipeline.run_stage(*stage);
    if (*stage == Stage::kStats) {
      std::cout << dataset::stats_table(dataset::dataset_stats(
          dataset::load_coco(pipeline.final_dataset_dir() / "annotations.json")));
    }
    return kExitOk;
  }
  pipeline.run();
  const std::vector<std::uint8_t> bytes = read_file(pipeline.final_dataset_dir() / "manifest.json");
  const auto manifest = dataset::manifest_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  std::cout << dataset::to_json(manifest).dump(2) << "\n";
  return kExitOk;
}

int validate(const std::string& target) {
  const fs::path path = annotations_in(target);
  const ValidationResult r = validate_dataset(path);
  for (const std::string& p : r.integrity.problems) std::cout << "problem: " << p << "\n";
  if (r.missing_files > 0) std::cout << "missing image files: " << r.missing_files << "\n";
  std::cout << (r.ok() ? "PASS " : "FAIL ") << path.string() << " images=" << r.integrity.images
            << " annotations=" << r.integrity.annotations << "\n";
  return r.ok() ? kExitOk : kExitInvariant;
}

int plan(const Flags& f, std::size_t cdi_count, std::size_t mix_images) {
  const PipelineConfig config = resolve(f);
  RecipeInputs inputs;
  inputs.cdi_count = cdi_count;
  if (config.cdi_dir && cdi_count == 0 && fs::is_directory(*config.cdi_dir)) {
    for (const auto& e : fs::directory_iterator(*config.cdi_dir)) {
      const std::string ext = e.path().extension().string();
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") ++inputs.cdi_count;
    }
  }
  if (config.real_dataset && fs::exists(*config.real_dataset)) {
    const auto real = dataset::load_coco(*config.real_dataset);
    inputs.real_images = real.images.size();
    for (const auto& a : real.annotations) inputs.real_foregrounds += a.iscrowd ? 0 : 1;
  }
  inputs.mix_images = mix_images;
  if (config.mix.real_manifest && mix_images == 0 && fs::exists(*config.mix.real_manifest)) {
    inputs.mix_images = dataset::load_coco(*config.mix.real_manifest).images.size();
  }
  std::cout << to_json(plan_recipe(config, config.load_templates(), inputs)).dump(2) << "\n";
  return kExitOk;
}

std::atomic<protocol::ProtocolServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int serve_mock(const std::string& host, int port) {
  gateway::MockGateway backend(prompting::TemplateSet::bundled());
  protocol::ProtocolServer server(backend);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving mock backend on " << host << ":" << port << "\n";
  const bool ok = server.listen(host, port);
  g_server = nullptr;
  return ok ? kExitOk : kExitGateway;
}

int check_endpoint(const std::string& endpoint) {
  gateway::GatewayConfig cfg;
  cfg.backend = gateway::Backend::kRemote;
  cfg.endpoint = endpoint;
  cfg.max_retries = 1;
  auto client = gateway::make_gateway(cfg, prompting::TemplateSet::bundled());
  bool ok = true;
  for (const auto& c : protocol::check_conformance(*client)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
    ok = ok && c.passed;
  }
  return ok ? kExitOk : kExitGateway;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthfab: synthetic detection datasets from generated foregrounds and backgrounds"};
  app.require_subcommand(1);

  Flags flags;
  auto* run = app.add_subcommand("run", "run every stage the config calls for");
  add_common(run, flags, true);

  std::optional<Stage> stage;
  std::string stats_path;
  for (const char* name : {"gen-foregrounds", "mine-cdi", "gen-backgrounds", "filter", "compose",
                           "mix", "stats"}) {
    auto* cmd = app.add_subcommand(name, std::string("run the ") + name + " stage (and stale prerequisites)");
    add_common(cmd, flags, true);
    cmd->callback([&stage, name] { stage = parse_stage(name); });
  }

  std::string target;
  auto* val = app.add_subcommand("validate", "check a COCO dataset's referential integrity");
  val->add_option("path", target, "annotations.json, dataset directory or workspace")->required();

  std::size_t cdi_count = 0, mix_images = 0;
  auto* pl = app.add_subcommand("plan", "print recipe bookkeeping without generating anything");
  add_common(pl, flags, true);
  pl->add_option("--cdi-count", cdi_count, "number of CDIs (default: count cdi_dir)");
  pl->add_option("--mix-images", mix_images, "size of the appended real set");

  std::string host = "127.0.0.1";
  int port = 8765;
  auto* serve = app.add_subcommand("serve-mock", "serve the mock backend over the wire protocol");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(1, 65535));

  std::string endpoint = "http://127.0.0.1:8765";
  auto* check = app.add_subcommand("check-endpoint", "run protocol conformance checks against a sidecar");
  check->add_option("--endpoint", endpoint);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return run_pipeline(flags, std::nullopt);
    if (stage) return run_pipeline(flags, stage);
    if (*val) return validate(target);
    if (*pl) return plan(flags, cdi_count, mix_images);
    if (*serve) return serve_mock(host, port);
    if (*check) return check_endpoint(endpoint);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kExitUnexpected;
  }
  return kExitUnexpected;
}
