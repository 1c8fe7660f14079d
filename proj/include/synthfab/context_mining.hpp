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
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthfab/gateway.hpp"
#include "synthfab/prompting.hpp"

namespace synthfab::context {

struct Caption {
  std::string text;
  std::string source_cdi;
  int rank = 0;
};

struct ContextPhrase {
  std::string phrase;
  Caption origin;
};

// Nouns naming things that must not appear in a background: common objects,
// people words and the like. Matching folds plurals (trailing -s/-es/-ies and
// a table of irregular forms).
class NounLexicon {
 public:
  NounLexicon() = default;
  explicit NounLexicon(std::set<std::string> words) : words_(std::move(words)) {}

  // ~800 common object nouns shipped in data/noun_lexicon.txt.
  static const NounLexicon& bundled();
  // One token per line; blank lines and lines starting with '#' are skipped.
  static NounLexicon from_file(const std::filesystem::path& path);
  static NounLexicon parse(std::string_view text);

  // Adds the last token (the head noun) of every label name, plus the name
  // with its spaces removed.
  NounLexicon with_labels(std::span<const prompting::ClassLabel> labels) const;

  bool matches(std::string_view token) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string> words_;
};

// Lowercased alphanumeric tokens; apostrophes are dropped inside words.
std::vector<std::string> tokenize(std::string_view text);

// Splits the caption into chunks at prepositions, conjunctions and verbs,
// strips leading determiners, and keeps the chunks in which no token is an
// interest class, lexicon noun, pronoun or image-meta word ("photo").
// Returned phrases are unique and in caption order; empty means the caption
// carries no usable context.
std::vector<ContextPhrase> extract_context(const Caption& caption,
                                           std::span<const prompting::ClassLabel> interest_classes,
                                           const NounLexicon& noun_lexicon);

// "A real photo of <phrase>" followed by up to per_phrase - 1 of the variants
// "A realistic photo of <phrase>", "A photo of <phrase>, color".
std::vector<std::string> augment_context(std::span<const ContextPhrase> phrases, int per_phrase);

// Index of the first whole-word interest-class token in `text` (plural
// folded), or npos when the text is clean.
std::size_t find_class_token(std::string_view text,
                             std::span<const prompting::ClassLabel> interest_classes);

struct MiningOptions {
  int captions_per_cdi = 2;
  int per_phrase = 1;
  // Applied to each caption before extraction.
  std::vector<prompting::EditRule> caption_edits;
  // Applied to each augmented prompt.
  std::vector<prompting::EditRule> prompt_edits;
};

struct CaptionPrompts {
  Caption caption;
  std::vector<std::string> prompts;
};

// Captions one CDI and turns every caption into its own prompt group. The
// surviving phrases of a caption are joined with ", " into one context, so a
// caption contributes at most per_phrase prompts. Prompts already emitted by
// an earlier group are dropped (exact match after whitespace normalization).
std::vector<CaptionPrompts> mine_cdi_grouped(const Image& cdi, const std::string& cdi_id,
                                             std::span<const prompting::ClassLabel> interest_classes,
                                             const NounLexicon& noun_lexicon,
                                             gateway::Gateway& gateway,
                                             const MiningOptions& options);

std::vector<std::string> mine_cdi(const Image& cdi, const std::string& cdi_id,
                                  std::span<const prompting::ClassLabel> interest_classes,
                                  const NounLexicon& noun_lexicon, gateway::Gateway& gateway,
                                  const MiningOptions& options);

}  // namespace synthfab::context
