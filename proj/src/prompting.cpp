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
#include "synthfab/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "bundled.hpp"
#include "synthfab/error.hpp"

namespace synthfab::prompting {
namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string fill_slot(std::string_view pattern, std::string_view slot, std::string_view value) {
  const std::size_t pos = pattern.find(slot);
  std::string out(pattern.substr(0, pos));
  out += value;
  out += pattern.substr(pos + slot.size());
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Next whole-word occurrence of `needle` in `lowered` at or after `from`.
std::size_t find_word(std::string_view lowered, std::string_view needle, std::size_t from) {
  while (from <= lowered.size()) {
    const std::size_t pos = lowered.find(needle, from);
    if (pos == std::string_view::npos) return pos;
    const bool left_ok = pos == 0 || !is_word_char(lowered[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == lowered.size() || !is_word_char(lowered[end]);
    if (left_ok && right_ok) return pos;
    from = pos + 1;
  }
  return std::string_view::npos;
}

std::string replace_words(const std::string& text, std::string_view target,
                          std::string_view replacement) {
  const std::string lowered = to_lower(text);
  const std::string needle = to_lower(normalize_whitespace(target));
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t pos = find_word(lowered, needle, 0); pos != std::string::npos;
       pos = find_word(lowered, needle, cursor)) {
    out.append(text, cursor, pos - cursor);
    out += replacement;
    cursor = pos + needle.size();
  }
  out.append(text, cursor, std::string::npos);
  return normalize_whitespace(out);
}

TemplateKind parse_kind(const std::string& kind) {
  if (kind == "foreground") return TemplateKind::kForeground;
  if (kind == "background") return TemplateKind::kBackground;
  fail(Errc::kConfigError, "unknown template kind '" + kind + "'");
}

void check_dense(const std::vector<PromptTemplate>& set, const char* what) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    require(set[i].id == static_cast<int>(i), Errc::kConfigError,
            std::string(what) + " template ids must be dense from 0");
  }
}

}  // namespace

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

ClassLabel make_label(std::string_view name, int id) {
  std::string normalized = to_lower(normalize_whitespace(name));
  require(!normalized.empty(), Errc::kInvalidLabel, "label name is empty");
  require(id >= 1, Errc::kInvalidLabel, "label '" + normalized + "' has id < 1");
  return ClassLabel{std::move(normalized), id};
}

void validate_labels(std::span<const ClassLabel> labels) {
  std::set<int> ids;
  std::set<std::string> names;
  for (const ClassLabel& label : labels) {
    const ClassLabel checked = make_label(label.name, label.id);
    require(checked.name == label.name, Errc::kInvalidLabel,
            "label '" + label.name + "' is not normalized");
    require(ids.insert(label.id).second, Errc::kInvalidLabel,
            "duplicate label id " + std::to_string(label.id));
    require(names.insert(label.name).second, Errc::kInvalidLabel,
            "duplicate label name '" + label.name + "'");
  }
}

const TemplateSet& TemplateSet::bundled() {
  static const TemplateSet set = from_json(nlohmann::json::parse(bundled::kTemplatesJson));
  return set;
}

TemplateSet TemplateSet::from_json(const nlohmann::json& manifest) {
  TemplateSet set;
  return set.with_overrides(manifest);
}

TemplateSet TemplateSet::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::kConfigError, "cannot open template manifest " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kConfigError, path.string() + ": " + e.what());
  }
}

TemplateSet TemplateSet::with_overrides(const nlohmann::json& manifest) const {
  TemplateSet out = *this;
  try {
    for (const auto& entry : manifest.at("templates")) {
      PromptTemplate t;
      t.id = entry.at("id").get<int>();
      t.kind = parse_kind(entry.at("kind").get<std::string>());
      t.pattern = entry.at("pattern").get<std::string>();
      const std::string_view slot =
          t.kind == TemplateKind::kForeground ? kObjectSlot : kContextSlot;
      require(count_occurrences(t.pattern, slot) == 1, Errc::kConfigError,
              "pattern '" + t.pattern + "' must contain " + std::string(slot) + " exactly once");
      if (t.kind == TemplateKind::kBackground) {
        t.context = entry.at("context").get<std::string>();
        require(!t.context.empty(), Errc::kConfigError, "background context is empty");
      }
      auto& target = t.kind == TemplateKind::kForeground ? out.foreground_ : out.background_;
      require(t.id >= 0, Errc::kConfigError, "template id must be >= 0");
      auto it = std::find_if(target.begin(), target.end(),
                             [&](const PromptTemplate& p) { return p.id == t.id; });
      if (it != target.end()) {
        *it = std::move(t);
      } else {
        target.push_back(std::move(t));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kConfigError, std::string("template manifest: ") + e.what());
  }
  auto by_id = [](const PromptTemplate& a, const PromptTemplate& b) { return a.id < b.id; };
  std::sort(out.foreground_.begin(), out.foreground_.end(), by_id);
  std::sort(out.background_.begin(), out.background_.end(), by_id);
  check_dense(out.foreground_, "foreground");
  check_dense(out.background_, "background");
  return out;
}

std::string TemplateSet::verbalize_foreground(const ClassLabel& label, int template_id) const {
  require(template_id >= 0 && template_id < static_cast<int>(foreground_.size()),
          Errc::kUnknownTemplate, "foreground template " + std::to_string(template_id));
  const std::string name = normalize_whitespace(label.name);
  require(!name.empty(), Errc::kInvalidLabel, "label name is empty");
  return fill_slot(foreground_[template_id].pattern, kObjectSlot, name);
}

std::string TemplateSet::verbalize_background(int context_id) const {
  require(context_id >= 0 && context_id < static_cast<int>(background_.size()),
          Errc::kUnknownTemplate, "background template " + std::to_string(context_id));
  const PromptTemplate& t = background_[context_id];
  return fill_slot(t.pattern, kContextSlot, t.context);
}

bool TemplateSet::is_foreground_prompt(std::string_view prompt) const {
  const std::string lowered = to_lower(prompt);
  for (const PromptTemplate& t : foreground_) {
    const std::string pattern = to_lower(t.pattern);
    const std::size_t slot = pattern.find(kObjectSlot);
    const std::string_view prefix = std::string_view(pattern).substr(0, slot);
    const std::string_view suffix = std::string_view(pattern).substr(slot + kObjectSlot.size());
    if (lowered.size() > prefix.size() + suffix.size() && lowered.starts_with(prefix) &&
        lowered.ends_with(suffix)) {
      return true;
    }
  }
  return false;
}

nlohmann::json TemplateSet::to_json() const {
  nlohmann::json templates = nlohmann::json::array();
  for (const PromptTemplate& t : foreground_) {
    templates.push_back({{"id", t.id}, {"kind", "foreground"}, {"pattern", t.pattern}});
  }
  for (const PromptTemplate& t : background_) {
    templates.push_back(
        {{"id", t.id}, {"kind", "background"}, {"pattern", t.pattern}, {"context", t.context}});
  }
  return {{"templates", templates}};
}

std::string verbalize_foreground(const ClassLabel& label, int template_id) {
  return TemplateSet::bundled().verbalize_foreground(label, template_id);
}

std::string verbalize_background(int context_id) {
  return TemplateSet::bundled().verbalize_background(context_id);
}

EditRule EditRule::substitute(std::string target, std::string replacement) {
  EditRule rule{EditKind::kSubstitute, std::move(target), std::move(replacement)};
  rule.validate();
  return rule;
}

EditRule EditRule::remove(std::string target) {
  EditRule rule{EditKind::kRemove, std::move(target), {}};
  rule.validate();
  return rule;
}

EditRule EditRule::append(std::string replacement) {
  EditRule rule{EditKind::kAppend, {}, std::move(replacement)};
  rule.validate();
  return rule;
}

void EditRule::validate() const {
  const bool has_target = !normalize_whitespace(target).empty();
  const bool has_replacement = !normalize_whitespace(replacement).empty();
  switch (kind) {
    case EditKind::kSubstitute:
      require(has_target && has_replacement, Errc::kInvalidArgument,
              "substitute rule needs target and replacement");
      break;
    case EditKind::kRemove:
      require(has_target, Errc::kInvalidArgument, "remove rule needs a target");
      break;
    case EditKind::kAppend:
      require(has_replacement, Errc::kInvalidArgument, "append rule needs a replacement");
      break;
  }
}

EditRule edit_rule_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const std::string target = j.value("target", "");
    const std::string replacement = j.value("replacement", "");
    if (kind == "substitute") return EditRule::substitute(target, replacement);
    if (kind == "remove") return EditRule::remove(target);
    if (kind == "append") return EditRule::append(replacement);
    fail(Errc::kConfigError, "unknown edit rule kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kConfigError, std::string("edit rule: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::kConfigError) throw;
    fail(Errc::kConfigError, e.what());
  }
}

nlohmann::json to_json(const EditRule& rule) {
  switch (rule.kind) {
    case EditKind::kSubstitute:
      return {{"kind", "substitute"}, {"target", rule.target}, {"replacement", rule.replacement}};
    case EditKind::kRemove:
      return {{"kind", "remove"}, {"target", rule.target}};
    case EditKind::kAppend:
      return {{"kind", "append"}, {"replacement", rule.replacement}};
  }
  return {};
}

std::string apply_edit_rules(std::string_view caption, std::span<const EditRule> rules) {
  require(!caption.empty(), Errc::kInvalidArgument, "caption is empty");
  if (rules.empty()) return std::string(caption);
  std::string text = normalize_whitespace(caption);
  std::size_t i = 0;
  while (i < rules.size()) {
    const EditRule& rule = rules[i];
    rule.validate();
    if (rule.kind == EditKind::kRemove) {
      std::size_t end = i;
      while (end < rules.size() && rules[end].kind == EditKind::kRemove) ++end;
      for (std::string before; before != text;) {
        before = text;
        for (std::size_t r = i; r < end; ++r) text = replace_words(text, rules[r].target, "");
      }
      i = end;
      continue;
    }
    if (rule.kind == EditKind::kSubstitute) {
      text = replace_words(text, rule.target, normalize_whitespace(rule.replacement));
    } else {
      text = normalize_whitespace(text + " " + rule.replacement);
    }
    ++i;
  }
  return text;
}

}  // namespace synthfab::prompting
