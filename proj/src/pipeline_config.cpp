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
#include "synthfab/pipeline_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "synthfab/error.hpp"

namespace synthfab::pipeline {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Reads keys out of one JSON object and remembers which ones were consumed,
// so leftovers can be reported as typos.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    require(node_.is_object(), Errc::kConfigError, where() + " must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return node_.contains(key) && !node_.at(key).is_null();
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(Errc::kConfigError, where(key) + ": " + e.what());
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    if (!has(key)) return;
    T value{};
    get(key, value);
    out = value;
  }

  void get_path(const char* key, std::optional<std::filesystem::path>& out,
                const std::filesystem::path& base) {
    std::string text;
    if (!has(key)) return;
    get(key, text);
    out = resolve(text, base);
  }

  const json& at(const char* key) {
    seen_.insert(key);
    return node_.at(key);
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      require(seen_.contains(key), Errc::kConfigError, "unknown config key " + where(key));
    }
  }

  static std::filesystem::path resolve(const std::string& text, const std::filesystem::path& base) {
    std::filesystem::path p(text);
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal();
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

// Reads a keep rule that may be spelled as a count or a fraction.
template <typename A, typename B>
void read_keep(Section& s, const char* count_key, const char* fraction_key,
               std::optional<A>& count, std::optional<B>& fraction) {
  const bool has_count = s.has(count_key);
  const bool has_fraction = s.has(fraction_key);
  require(!(has_count && has_fraction), Errc::kConfigError,
          "set only one of " + s.where(count_key) + " and " + s.where(fraction_key));
  if (has_count) {
    fraction.reset();
    s.get(count_key, count);
  } else if (has_fraction) {
    count.reset();
    s.get(fraction_key, fraction);
  }
}

std::vector<prompting::EditRule> read_edits(const json& node, const std::string& where) {
  require(node.is_array(), Errc::kConfigError, where + " must be a list");
  std::vector<prompting::EditRule> rules;
  for (const auto& r : node) {
    try {
      rules.push_back(prompting::edit_rule_from_json(r));
    } catch (const Error& e) {
      fail(Errc::kConfigError, where + ": " + e.what());
    }
  }
  return rules;
}

gateway::Backend parse_backend(const std::string& text) {
  if (text == "mock") return gateway::Backend::kMock;
  require(text == "remote", Errc::kConfigError, "gateway.backend must be mock or remote");
  return gateway::Backend::kRemote;
}

// Runs a validator and reports its failure as a config error.
template <typename F>
void as_config(const std::string& what, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    if (e.code() == Errc::kConfigError) throw;
    fail(Errc::kConfigError, what + ": " + e.what());
  }
}

selection::SelectionPolicy make_policy(std::optional<int> k, std::optional<double> f,
                                       const PipelineConfig& c) {
  selection::SelectionPolicy p;
  p.keep_k = k;
  p.keep_fraction = f;
  p.class_penalty_weight = c.class_penalty_weight;
  p.class_prompt_pattern = c.class_prompt_pattern;
  return p;
}

ojson path_or_null(const std::optional<std::filesystem::path>& p) {
  return p ? ojson(p->generic_string()) : ojson(nullptr);
}

template <typename T>
ojson opt_or_null(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

}  // namespace

const char* recipe_name(Recipe recipe) {
  switch (recipe) {
    case Recipe::kPureSyn: return "pure_syn";
    case Recipe::kSynFg: return "syn_fg";
    case Recipe::kSynPlusReal: return "syn_plus_real";
  }
  return "pure_syn";
}

Recipe parse_recipe(std::string_view text) {
  if (text == "pure_syn") return Recipe::kPureSyn;
  if (text == "syn_fg") return Recipe::kSynFg;
  if (text == "syn_plus_real") return Recipe::kSynPlusReal;
  fail(Errc::kConfigError, "recipe must be pure_syn, syn_fg or syn_plus_real, not '" +
                               std::string(text) + "'");
}

selection::SelectionPolicy PipelineConfig::foreground_policy() const {
  return make_policy(counts.fg_keep, counts.fg_keep_fraction, *this);
}

selection::SelectionPolicy PipelineConfig::background_policy() const {
  return make_policy(counts.bg_keep, counts.bg_keep_fraction, *this);
}

selection::SelectionPolicy PipelineConfig::context_policy() const {
  return make_policy(counts.bg_keep_per_caption, counts.bg_keep_fraction_per_caption, *this);
}

prompting::TemplateSet PipelineConfig::load_templates() const {
  prompting::TemplateSet set = templates.file ? prompting::TemplateSet::from_file(*templates.file)
                                              : prompting::TemplateSet::bundled();
  for (const auto& path : templates.overrides) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::kConfigError, "cannot open template override " + path.string());
    try {
      set = set.with_overrides(json::parse(in));
    } catch (const json::exception& e) {
      fail(Errc::kConfigError, path.string() + ": " + e.what());
    }
  }
  return set;
}

void PipelineConfig::validate() const {
  require(!labels.empty(), Errc::kConfigError, "labels must not be empty");
  as_config("labels", [&] { prompting::validate_labels(labels); });

  require(counts.fg_per_template >= 1, Errc::kConfigError, "counts.fg_per_template must be >= 1");
  require(counts.bg_per_template >= 1, Errc::kConfigError, "counts.bg_per_template must be >= 1");
  require(counts.bg_per_caption >= 1, Errc::kConfigError, "counts.bg_per_caption must be >= 1");
  require(counts.captions_per_cdi >= 1, Errc::kConfigError, "counts.captions_per_cdi must be >= 1");
  require(counts.target_size >= 1, Errc::kConfigError, "counts.target_size must be >= 1");
  as_config("foreground selection", [&] { foreground_policy().validate(); });
  as_config("background selection", [&] { background_policy().validate(); });
  as_config("context selection", [&] { context_policy().validate(); });

  as_config("augment", [&] { augment.validate(); });
  as_config("extraction", [&] { extraction.validate(); });
  require(mining.per_phrase >= 1, Errc::kConfigError, "mining.per_phrase must be >= 1");

  as_config("image", [&] {
    gateway::GenerationRequest probe{"probe", 1, 0, image.width, image.height};
    probe.validate();
  });
  require(image.png_level >= 0 && image.png_level <= 9 && image.candidate_png_level >= 0 &&
              image.candidate_png_level <= 9,
          Errc::kConfigError, "png levels must be in [0, 9]");

  if (recipe != Recipe::kPureSyn) {
    require(real_dataset.has_value(), Errc::kConfigError,
            std::string("recipe ") + recipe_name(recipe) + " needs real_dataset");
  }
  require(mix.real_fraction >= 0.0 && mix.real_fraction <= 1.0, Errc::kConfigError,
          "mix.real_fraction must be in [0, 1]");
  require(gateway.max_retries >= 0 && gateway.timeout_seconds > 0.0 && gateway.max_in_flight >= 1,
          Errc::kConfigError, "gateway limits must be positive");
  require(workers >= 1, Errc::kConfigError, "workers must be >= 1");
}

PipelineConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  Section root(doc, "");

  require(root.has("labels"), Errc::kConfigError, "labels is required");
  const json& labels = root.at("labels");
  require(labels.is_array(), Errc::kConfigError, "labels must be a list");
  int next_id = 1;
  for (const auto& l : labels) {
    as_config("labels", [&] {
      if (l.is_string()) {
        c.labels.push_back(prompting::make_label(l.get<std::string>(), next_id++));
      } else {
        Section s(l, "labels[]");
        std::string name;
        int id = next_id;
        s.get("name", name);
        s.get("id", id);
        s.finish();
        c.labels.push_back(prompting::make_label(name, id));
        next_id = id + 1;
      }
    });
  }

  std::string recipe;
  root.get("recipe", recipe);
  if (!recipe.empty()) c.recipe = parse_recipe(recipe);
  root.get_path("cdi_dir", c.cdi_dir, base_dir);
  root.get_path("real_dataset", c.real_dataset, base_dir);
  root.get("master_seed", c.master_seed);
  root.get("workers", c.workers);

  if (root.has("counts")) {
    Section s(root.at("counts"), "counts");
    s.get("fg_per_template", c.counts.fg_per_template);
    read_keep(s, "fg_keep", "fg_keep_fraction", c.counts.fg_keep, c.counts.fg_keep_fraction);
    s.get("bg_per_template", c.counts.bg_per_template);
    read_keep(s, "bg_keep", "bg_keep_fraction", c.counts.bg_keep, c.counts.bg_keep_fraction);
    s.get("bg_per_caption", c.counts.bg_per_caption);
    read_keep(s, "bg_keep_per_caption", "bg_keep_fraction_per_caption",
              c.counts.bg_keep_per_caption, c.counts.bg_keep_fraction_per_caption);
    s.get("captions_per_cdi", c.counts.captions_per_cdi);
    s.get("target_size", c.counts.target_size);
    s.finish();
  }
  if (root.has("augment")) {
    Section s(root.at("augment"), "augment");
    compositor::AugmentParams& a = c.augment;
    s.get("rotation_range", a.rotation_range);
    if (s.has("scale_range")) {
      std::vector<double> range;
      s.get("scale_range", range);
      require(range.size() == 2, Errc::kConfigError, "augment.scale_range needs [min, max]");
      a.scale_min = range[0];
      a.scale_max = range[1];
    }
    s.get("flip_prob", a.flip_prob);
    s.get("blur_sigma", a.blur_sigma);
    s.get("pastes_per_bg", a.pastes_per_bg);
    s.get("min_visible_fraction", a.min_visible_fraction);
    s.get("max_place_attempts", a.max_place_attempts);
    s.finish();
  }
  if (root.has("extraction")) {
    Section s(root.at("extraction"), "extraction");
    foreground::ExtractionParams& e = c.extraction;
    s.get("chroma_threshold", e.chroma_threshold);
    s.get("morph_radius", e.morph_radius);
    s.get("min_area", e.min_area);
    s.get("max_area", e.max_area);
    s.get("border_ring", e.border_ring);
    s.get("max_border_touch", e.max_border_touch);
    s.finish();
  }
  if (root.has("selection")) {
    Section s(root.at("selection"), "selection");
    s.get("class_penalty_weight", c.class_penalty_weight);
    s.get("class_prompt_pattern", c.class_prompt_pattern);
    s.finish();
  }
  if (root.has("mining")) {
    Section s(root.at("mining"), "mining");
    s.get("per_phrase", c.mining.per_phrase);
    if (s.has("caption_edits")) c.mining.caption_edits = read_edits(s.at("caption_edits"), "mining.caption_edits");
    if (s.has("prompt_edits")) c.mining.prompt_edits = read_edits(s.at("prompt_edits"), "mining.prompt_edits");
    s.get_path("noun_lexicon", c.mining.noun_lexicon, base_dir);
    s.finish();
  }
  if (root.has("templates")) {
    Section s(root.at("templates"), "templates");
    s.get_path("file", c.templates.file, base_dir);
    std::vector<std::string> overrides;
    s.get("overrides", overrides);
    for (const auto& o : overrides) c.templates.overrides.push_back(Section::resolve(o, base_dir));
    s.finish();
  }
  if (root.has("image")) {
    Section s(root.at("image"), "image");
    s.get("width", c.image.width);
    s.get("height", c.image.height);
    s.get("png_level", c.image.png_level);
    s.get("candidate_png_level", c.image.candidate_png_level);
    s.finish();
  }
  if (root.has("mix")) {
    Section s(root.at("mix"), "mix");
    s.get_path("real_manifest", c.mix.real_manifest, base_dir);
    s.get("real_fraction", c.mix.real_fraction);
    s.get("include_real_foreground_pastes", c.mix.include_real_foreground_pastes);
    s.finish();
  }
  if (root.has("gateway")) {
    Section s(root.at("gateway"), "gateway");
    std::string backend;
    s.get("backend", backend);
    if (!backend.empty()) c.gateway.backend = parse_backend(backend);
    s.get("endpoint", c.gateway.endpoint);
    s.get("timeout_seconds", c.gateway.timeout_seconds);
    s.get("max_retries", c.gateway.max_retries);
    s.get("backoff_initial_seconds", c.gateway.backoff_initial_seconds);
    s.get("backoff_max_seconds", c.gateway.backoff_max_seconds);
    s.get("max_in_flight", c.gateway.max_in_flight);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::kConfigError, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::kConfigError, path.string() + ": " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

ojson to_json(const PipelineConfig& c) {
  ojson labels = ojson::array();
  for (const auto& l : c.labels) labels.push_back({{"name", l.name}, {"id", l.id}});
  ojson counts = {{"fg_per_template", c.counts.fg_per_template}};
  if (c.counts.fg_keep) counts["fg_keep"] = *c.counts.fg_keep;
  if (c.counts.fg_keep_fraction) counts["fg_keep_fraction"] = *c.counts.fg_keep_fraction;
  counts["bg_per_template"] = c.counts.bg_per_template;
  if (c.counts.bg_keep) counts["bg_keep"] = *c.counts.bg_keep;
  if (c.counts.bg_keep_fraction) counts["bg_keep_fraction"] = *c.counts.bg_keep_fraction;
  counts["bg_per_caption"] = c.counts.bg_per_caption;
  if (c.counts.bg_keep_per_caption) counts["bg_keep_per_caption"] = *c.counts.bg_keep_per_caption;
  if (c.counts.bg_keep_fraction_per_caption) {
    counts["bg_keep_fraction_per_caption"] = *c.counts.bg_keep_fraction_per_caption;
  }
  counts["captions_per_cdi"] = c.counts.captions_per_cdi;
  counts["target_size"] = c.counts.target_size;

  ojson caption_edits = ojson::array();
  for (const auto& r : c.mining.caption_edits) caption_edits.push_back(ojson::parse(prompting::to_json(r).dump()));
  ojson prompt_edits = ojson::array();
  for (const auto& r : c.mining.prompt_edits) prompt_edits.push_back(ojson::parse(prompting::to_json(r).dump()));
  ojson overrides = ojson::array();
  for (const auto& o : c.templates.overrides) overrides.push_back(o.generic_string());

  const compositor::AugmentParams& a = c.augment;
  const foreground::ExtractionParams& e = c.extraction;
  return {
      {"labels", labels},
      {"recipe", recipe_name(c.recipe)},
      {"cdi_dir", path_or_null(c.cdi_dir)},
      {"real_dataset", path_or_null(c.real_dataset)},
      {"master_seed", c.master_seed},
      {"workers", c.workers},
      {"counts", counts},
      {"augment",
       {{"rotation_range", a.rotation_range},
        {"scale_range", {a.scale_min, a.scale_max}},
        {"flip_prob", a.flip_prob},
        {"blur_sigma", a.blur_sigma},
        {"pastes_per_bg", a.pastes_per_bg},
        {"min_visible_fraction", a.min_visible_fraction},
        {"max_place_attempts", a.max_place_attempts}}},
      {"extraction",
       {{"chroma_threshold", e.chroma_threshold},
        {"morph_radius", e.morph_radius},
        {"min_area", e.min_area},
        {"max_area", e.max_area},
        {"border_ring", e.border_ring},
        {"max_border_touch", e.max_border_touch}}},
      {"selection",
       {{"class_penalty_weight", c.class_penalty_weight},
        {"class_prompt_pattern", c.class_prompt_pattern}}},
      {"mining",
       {{"per_phrase", c.mining.per_phrase},
        {"caption_edits", caption_edits},
        {"prompt_edits", prompt_edits},
        {"noun_lexicon", path_or_null(c.mining.noun_lexicon)}}},
      {"templates", {{"file", path_or_null(c.templates.file)}, {"overrides", overrides}}},
      {"image",
       {{"width", c.image.width},
        {"height", c.image.height},
        {"png_level", c.image.png_level},
        {"candidate_png_level", c.image.candidate_png_level}}},
      {"mix",
       {{"real_manifest", path_or_null(c.mix.real_manifest)},
        {"real_fraction", c.mix.real_fraction},
        {"include_real_foreground_pastes", c.mix.include_real_foreground_pastes}}},
      {"gateway",
       {{"backend", c.gateway.backend == gateway::Backend::kMock ? "mock" : "remote"},
        {"endpoint", c.gateway.endpoint},
        {"timeout_seconds", c.gateway.timeout_seconds},
        {"max_retries", c.gateway.max_retries},
        {"backoff_initial_seconds", c.gateway.backoff_initial_seconds},
        {"backoff_max_seconds", c.gateway.backoff_max_seconds},
        {"max_in_flight", c.gateway.max_in_flight}}},
  };
}

RecipePlan plan_recipe(const PipelineConfig& config, const prompting::TemplateSet& templates,
                       const RecipeInputs& inputs) {
  RecipePlan plan;
  const std::size_t fg_templates = templates.foreground().size();
  const std::size_t bg_templates = templates.background().size();
  plan.synthetic_foregrounds =
      config.labels.size() * fg_templates *
      config.foreground_policy().keep_count(static_cast<std::size_t>(config.counts.fg_per_template));
  if (config.recipe == Recipe::kSynPlusReal && config.mix.include_real_foreground_pastes) {
    plan.real_foregrounds = inputs.real_foregrounds;
  }
  if (config.recipe != Recipe::kSynFg) {
    plan.template_backgrounds =
        bg_templates * config.background_policy().keep_count(
                           static_cast<std::size_t>(config.counts.bg_per_template));
    if (config.cdi_dir || inputs.cdi_count > 0) {
      plan.context_backgrounds =
          inputs.cdi_count * static_cast<std::size_t>(config.counts.captions_per_cdi) *
          config.context_policy().keep_count(static_cast<std::size_t>(config.counts.bg_per_caption));
    }
  }
  if (config.recipe != Recipe::kPureSyn) plan.real_backgrounds = inputs.real_images;
  if (inputs.mix_images > 0) {
    plan.real_images = inputs.mix_images;
  } else if (config.recipe != Recipe::kPureSyn) {
    plan.real_images = inputs.real_images;
  } else {
    plan.real_images = inputs.cdi_count;
  }
  plan.synthetic_images = static_cast<std::size_t>(config.counts.target_size);
  plan.mixed_real_images = static_cast<std::size_t>(std::max(
      0.0, std::ceil(config.mix.real_fraction * static_cast<double>(inputs.mix_images) - 1e-9)));
  return plan;
}

ojson to_json(const RecipePlan& p) {
  return {{"real_images", p.real_images},
          {"foregrounds", {{"synthetic", p.synthetic_foregrounds}, {"real", p.real_foregrounds},
                           {"total", p.foregrounds()}}},
          {"backgrounds", {{"template", p.template_backgrounds}, {"context", p.context_backgrounds},
                           {"real", p.real_backgrounds}, {"total", p.backgrounds()}}},
          {"synthetic_images", p.synthetic_images},
          {"mixed_real_images", p.mixed_real_images},
          {"training_set_size", p.training_set_size()}};
}

}  // namespace synthfab::pipeline
