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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthfab/compositor.hpp"
#include "synthfab/foreground_lab.hpp"
#include "synthfab/gateway.hpp"
#include "synthfab/prompting.hpp"
#include "synthfab/selection.hpp"

namespace synthfab::pipeline {

enum class Recipe { kPureSyn, kSynFg, kSynPlusReal };

const char* recipe_name(Recipe recipe);
Recipe parse_recipe(std::string_view text);

// Stage sizes. Each keep rule is either a count or a fraction; the config
// document may set one of the two spellings per stage, never both.
struct Counts {
  int fg_per_template = 500;
  std::optional<int> fg_keep = 200;
  std::optional<double> fg_keep_fraction;
  int bg_per_template = 600;
  std::optional<int> bg_keep;
  std::optional<double> bg_keep_fraction = 0.95;
  int bg_per_caption = 80;
  std::optional<int> bg_keep_per_caption = 30;
  std::optional<double> bg_keep_fraction_per_caption;
  int captions_per_cdi = 2;
  int target_size = 60000;
};

struct MiningConfig {
  int per_phrase = 1;
  std::vector<prompting::EditRule> caption_edits;
  std::vector<prompting::EditRule> prompt_edits;
  std::optional<std::filesystem::path> noun_lexicon;
};

struct TemplatesConfig {
  std::optional<std::filesystem::path> file;
  std::vector<std::filesystem::path> overrides;
};

struct ImageConfig {
  int width = 512;
  int height = 512;
  int png_level = 6;            // emitted dataset images
  int candidate_png_level = 1;  // intermediate candidates
};

struct MixConfig {
  // Optional COCO annotations.json whose images are appended after the
  // synthetic ones.
  std::optional<std::filesystem::path> real_manifest;
  double real_fraction = 1.0;
  // syn_plus_real only: also paste cutouts of the real dataset's objects.
  bool include_real_foreground_pastes = true;
};

struct PipelineConfig {
  std::vector<prompting::ClassLabel> labels;
  Recipe recipe = Recipe::kPureSyn;
  std::optional<std::filesystem::path> cdi_dir;
  // Few-shot real COCO set: real backgrounds for syn_fg and syn_plus_real,
  // real foregrounds for syn_plus_real.
  std::optional<std::filesystem::path> real_dataset;
  Counts counts;
  compositor::AugmentParams augment;
  foreground::ExtractionParams extraction;
  double class_penalty_weight = 1.0;
  std::string class_prompt_pattern = "a photo of <object>";
  MiningConfig mining;
  TemplatesConfig templates;
  ImageConfig image;
  MixConfig mix;
  gateway::GatewayConfig gateway;
  std::uint64_t master_seed = 0;
  int workers = 1;

  selection::SelectionPolicy foreground_policy() const;
  selection::SelectionPolicy background_policy() const;
  selection::SelectionPolicy context_policy() const;

  prompting::TemplateSet load_templates() const;

  // Throws kConfigError describing the first problem found.
  void validate() const;
};

// Relative paths in the document are resolved against base_dir. Unknown keys
// are rejected. Throws kConfigError.
PipelineConfig config_from_json(const nlohmann::json& doc,
                                const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const PipelineConfig& config);

// Bookkeeping for a recipe without generating anything.
struct RecipeInputs {
  std::size_t cdi_count = 0;
  std::size_t real_images = 0;       // few-shot real set
  std::size_t real_foregrounds = 0;  // non-crowd objects in it
  std::size_t mix_images = 0;        // set appended by mix
};

struct RecipePlan {
  std::size_t real_images = 0;
  std::size_t synthetic_foregrounds = 0;  // upper bound: extraction may drop some
  std::size_t real_foregrounds = 0;
  std::size_t template_backgrounds = 0;
  std::size_t context_backgrounds = 0;
  std::size_t real_backgrounds = 0;
  std::size_t synthetic_images = 0;
  std::size_t mixed_real_images = 0;

  std::size_t foregrounds() const { return synthetic_foregrounds + real_foregrounds; }
  std::size_t backgrounds() const {
    return template_backgrounds + context_backgrounds + real_backgrounds;
  }
  std::size_t training_set_size() const { return synthetic_images + mixed_real_images; }
};

RecipePlan plan_recipe(const PipelineConfig& config, const prompting::TemplateSet& templates,
                       const RecipeInputs& inputs);
nlohmann::ordered_json to_json(const RecipePlan& plan);

}  // namespace synthfab::pipeline
