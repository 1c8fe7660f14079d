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

#include <filesystem>
#include <initializer_list>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synthfab/dataset_io.hpp"
#include "synthfab/error.hpp"
#include "synthfab/gateway.hpp"
#include "synthfab/pipeline_config.hpp"

namespace synthfab::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitGateway = 3;
inline constexpr int kExitInvariant = 4;

int exit_code_for(Errc code);

// logfmt lines: stage=<s> event=<e> key=value ...
class Logger {
 public:
  explicit Logger(std::ostream* out = nullptr) : out_(out) {}

  using Fields = std::initializer_list<std::pair<std::string_view, std::string>>;
  void log(std::string_view stage, std::string_view event, Fields fields = {});

 private:
  std::ostream* out_;
  std::mutex mutex_;
};

enum class Stage { kGenForegrounds, kMineCdi, kGenBackgrounds, kFilter, kCompose, kMix, kStats };

const char* stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

struct StageOutcome {
  Stage stage = Stage::kGenForegrounds;
  bool skipped = false;  // outputs were already present and verified
  std::string digest;
};

// Staged, checkpointed execution inside one workspace directory:
//
//   candidates/fg, candidates/bg   raw generations (gen-foregrounds, gen-backgrounds)
//   mining/prompts.json            mined context prompts (mine-cdi)
//   assets/fg, assets/bg           selected and extracted assets (filter)
//   reports/                       selection CSVs and extraction failures (filter)
//   dataset/                       composed COCO dataset (compose)
//   mixed/                         synthetic + real (mix)
//   stats/                         stats.json and stats.txt (stats)
//   stages/<stage>.json            completion markers
//
// A marker records a digest of the stage's configuration and of its
// upstream markers, plus a checksum per output file. A stage whose marker
// matches and whose files verify is skipped.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::filesystem::path workspace, gateway::Gateway& gateway,
           Logger& logger);

  // Runs `stage` after bringing its prerequisites up to date.
  StageOutcome run_stage(Stage stage);
  // Every stage the configuration calls for, in order.
  std::vector<StageOutcome> run();

  // Stages that apply to this configuration, in execution order.
  std::vector<Stage> planned_stages() const;

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& workspace() const { return workspace_; }
  // dataset/ or mixed/ when a mix is configured.
  std::filesystem::path final_dataset_dir() const;

 private:
  std::vector<Stage> prerequisites(Stage stage) const;
  std::string compute_digest(Stage stage) const;
  bool verify_marker(Stage stage, const std::string& digest) const;
  void write_marker(Stage stage, const std::string& digest) const;
  std::vector<std::filesystem::path> output_dirs(Stage stage) const;

  void gen_foregrounds();
  void mine_cdi();
  void gen_backgrounds();
  void filter();
  void compose();
  void mix();
  void stats();

  PipelineConfig config_;
  std::filesystem::path workspace_;
  gateway::Gateway& gateway_;
  Logger& log_;
  prompting::TemplateSet templates_;
  std::map<Stage, StageOutcome> done_;
};

struct ValidationResult {
  dataset::IntegrityReport integrity;
  std::size_t missing_files = 0;

  bool ok() const { return integrity.ok() && missing_files == 0; }
};

// Referential integrity of <dir>/annotations.json plus a check that every
// image file exists.
ValidationResult validate_dataset(const std::filesystem::path& annotations_path);

}  // namespace synthfab::pipeline
