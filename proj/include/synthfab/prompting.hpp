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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace synthfab::prompting {

struct ClassLabel {
  std::string name;
  int id = 0;

  bool operator==(const ClassLabel&) const = default;
};

// Trims and lowercases `name`; throws kInvalidLabel if it ends up empty or
// the id is < 1.
ClassLabel make_label(std::string_view name, int id);

// Unique ids, unique names, every label individually valid.
void validate_labels(std::span<const ClassLabel> labels);

enum class TemplateKind { kForeground, kBackground };

struct PromptTemplate {
  int id = 0;
  TemplateKind kind = TemplateKind::kForeground;
  std::string pattern;
  // Background entries carry their fixed context phrase; the pattern's slot
  // is filled with it at verbalization time.
  std::string context;
};

inline constexpr std::string_view kObjectSlot = "<object>";
inline constexpr std::string_view kContextSlot = "<context>";

class TemplateSet {
 public:
  // The defaults shipped in data/templates.json (compiled in).
  static const TemplateSet& bundled();
  static TemplateSet from_json(const nlohmann::json& manifest);
  static TemplateSet from_file(const std::filesystem::path& path);

  // Replaces entries with matching (kind, id) and appends new ones.
  TemplateSet with_overrides(const nlohmann::json& manifest) const;

  std::span<const PromptTemplate> foreground() const { return foreground_; }
  std::span<const PromptTemplate> background() const { return background_; }

  std::string verbalize_foreground(const ClassLabel& label, int template_id) const;
  std::string verbalize_background(int context_id) const;

  // True when `prompt` is an instance of some foreground pattern.
  bool is_foreground_prompt(std::string_view prompt) const;

  nlohmann::json to_json() const;

 private:
  std::vector<PromptTemplate> foreground_;
  std::vector<PromptTemplate> background_;
};

std::string verbalize_foreground(const ClassLabel& label, int template_id);
std::string verbalize_background(int context_id);

enum class EditKind { kSubstitute, kRemove, kAppend };

struct EditRule {
  EditKind kind = EditKind::kAppend;
  std::string target;
  std::string replacement;

  static EditRule substitute(std::string target, std::string replacement);
  static EditRule remove(std::string target);
  static EditRule append(std::string replacement);

  void validate() const;
  bool operator==(const EditRule&) const = default;
};

EditRule edit_rule_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EditRule& rule);

// Rules run in order. Matching is whole-word and case-insensitive over a
// whitespace-normalized caption. A run of consecutive remove rules is applied
// until nothing more matches, so remove-only rule lists are idempotent. An
// empty rule list returns the caption untouched.
std::string apply_edit_rules(std::string_view caption, std::span<const EditRule> rules);

std::string normalize_whitespace(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace synthfab::prompting
