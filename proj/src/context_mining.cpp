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
#include "synthfab/context_mining.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "bundled.hpp"
#include "synthfab/error.hpp"

namespace synthfab::context {
namespace {

using Lexicon = std::set<std::string, std::less<>>;

const Lexicon& prepositions() {
  static const Lexicon words = {
      "on",     "in",      "at",      "near",    "beside",  "under",   "over",  "with",
      "without", "of",     "by",      "behind",  "inside",  "outside", "across", "along",
      "around", "through", "between", "from",    "into",    "onto",    "against", "above",
      "below",  "beneath", "underneath", "among", "next",   "to",      "for",   "during",
      "toward", "towards", "up",      "down",    "off",     "out",     "atop",  "amid",
      "past",   "beyond",  "within",  "via",     "upon",    "like"};
  return words;
}

const Lexicon& conjunctions() {
  static const Lexicon words = {"and", "or",  "but",  "while", "as",   "that", "which",
                                "who", "whom", "whose", "where", "when", "then", "so",
                                "because", "nor", "yet"};
  return words;
}

const Lexicon& verbs() {
  static const Lexicon words = {
      "is",     "are",    "was",    "were",   "be",     "been",   "am",     "has",
      "have",   "had",    "do",     "does",   "did",    "can",    "could",  "will",
      "would",  "may",    "might",  "should", "there",  "here",   "sits",   "sit",
      "sat",    "stands", "stand",  "stood",  "lies",   "lie",    "lay",    "holds",
      "hold",   "held",   "rides",  "ride",   "rode",   "looks",  "look",   "eats",
      "eat",    "ate",    "runs",   "run",    "ran",    "walks",  "walk",   "flies",
      "fly",    "flew",   "plays",  "play",   "waits",  "wait",   "parked", "covered",
      "filled", "topped", "made",   "seen",   "shown",  "placed", "left",   "set",
      "sitting", "standing", "lying", "laying", "riding", "holding", "looking", "eating",
      "running", "walking", "flying", "playing", "waiting", "showing", "shows", "show",
      "contains", "containing", "displayed", "stacked", "lined", "surrounded", "located",
      "taken",  "painted", "decorated", "crowded", "gets",  "get",    "goes",   "go",
      "going",  "grazing", "grazes", "graze",  "drives", "drive",  "driving", "carrying",
      "carries", "carry", "pulling", "pulls",  "pull",   "watching", "watches", "watch",
      "sleeping", "sleeps", "sleep", "resting", "rests", "rest",   "perched", "parked",
      "hanging", "hangs",  "hang",   "leaning", "leans",  "lean",   "posing", "poses",
      "pose",   "swimming", "swims", "swim",   "jumping", "jumps",  "jump",   "using",
      "uses",   "use",    "wearing", "wears",  "wear",   "having", "being",  "doing"};
  return words;
}

// -ing words that are nouns or noun modifiers, not verbs.
const Lexicon& ing_nouns() {
  static const Lexicon words = {
      "building", "buildings", "ceiling", "clothing", "evening",  "morning", "spring",
      "string",   "thing",     "things",  "something", "nothing", "everything", "anything",
      "ring",     "king",      "wing",    "swing",    "railing",  "landing", "clearing",
      "dining",   "living",    "parking", "shopping", "wedding",  "bedding", "lighting",
      "awning",   "crossing",  "ending",  "sibling",  "pudding",  "icing",   "frosting",
      "painting", "paintings", "housing", "flooring", "siding",   "offering", "opening",
      "setting",  "surroundings", "sailing", "skiing", "camping", "fishing", "farming"};
  return words;
}

// Leading words that never head a context phrase.
const Lexicon& determiners() {
  static const Lexicon words = {
      "a",     "an",     "the",   "this",   "these",   "those",  "some",   "many",
      "several", "few",  "couple", "lot",   "lots",    "group",  "bunch",  "pair",
      "number", "its",   "their", "his",    "her",     "my",     "our",    "your",
      "one",   "two",    "three", "four",   "five",    "six",    "seven",  "eight",
      "nine",  "ten",    "dozen", "another", "other",  "each",   "every",  "all",
      "both",  "no",     "any",   "very",   "much",    "more",   "most",   "such",
      "just",  "only",   "also",  "single", "multiple", "various", "large", "small",
      "big",   "little"};
  return words;
}

const Lexicon& pronouns() {
  static const Lexicon words = {"it", "they", "them", "he", "she", "him", "we", "us",
                                "i",  "you",  "what", "itself", "themselves"};
  return words;
}

// Words describing the picture rather than its content.
const Lexicon& meta_nouns() {
  static const Lexicon words = {"photo",   "photos", "photograph", "picture", "pictures",
                                "image",   "images", "view",       "shot",    "snapshot",
                                "closeup", "close",  "pic",        "selfie",  "depiction"};
  return words;
}

const std::map<std::string, std::string, std::less<>>& irregular_plurals() {
  static const std::map<std::string, std::string, std::less<>> forms = {
      {"people", "person"}, {"men", "man"},      {"women", "woman"},  {"children", "child"},
      {"mice", "mouse"},    {"geese", "goose"},  {"feet", "foot"},    {"teeth", "tooth"},
      {"knives", "knife"},  {"leaves", "leaf"},  {"shelves", "shelf"}, {"wolves", "wolf"},
      {"calves", "calf"},   {"oxen", "ox"},      {"loaves", "loaf"},  {"halves", "half"}};
  return forms;
}

bool is_verb(const std::string& token) {
  if (verbs().contains(token)) return true;
  return token.size() >= 5 && token.ends_with("ing") && !ing_nouns().contains(token);
}

bool is_number(const std::string& token) {
  return !token.empty() && std::all_of(token.begin(), token.end(),
                                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool is_boundary(const std::string& token) {
  return prepositions().contains(token) || conjunctions().contains(token);
}

}  // namespace

const NounLexicon& NounLexicon::bundled() {
  static const NounLexicon lexicon = parse(bundled::kNounLexicon);
  return lexicon;
}

NounLexicon NounLexicon::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::kConfigError, "cannot open noun lexicon " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

NounLexicon NounLexicon::parse(std::string_view text) {
  std::set<std::string> words;
  std::istringstream lines{std::string(text)};
  for (std::string line; std::getline(lines, line);) {
    const std::string word = prompting::to_lower(prompting::normalize_whitespace(line));
    if (word.empty() || word.front() == '#') continue;
    words.insert(word);
  }
  return NounLexicon(std::move(words));
}

NounLexicon NounLexicon::with_labels(std::span<const prompting::ClassLabel> labels) const {
  std::set<std::string> words = words_;
  for (const prompting::ClassLabel& label : labels) {
    // "dining table" contributes its head "table" and "diningtable"; the
    // modifier alone ("dining room") is not an object.
    const std::vector<std::string> tokens = tokenize(label.name);
    if (tokens.empty()) continue;
    std::string joined;
    for (const std::string& token : tokens) joined += token;
    words.insert(tokens.back());
    words.insert(joined);
  }
  return NounLexicon(std::move(words));
}

bool NounLexicon::matches(std::string_view token_view) const {
  const std::string token(token_view);
  if (token.empty()) return false;
  if (words_.contains(token)) return true;
  if (const auto it = irregular_plurals().find(token);
      it != irregular_plurals().end() && words_.contains(it->second)) {
    return true;
  }
  if (token.size() > 3 && token.ends_with("ies") &&
      words_.contains(token.substr(0, token.size() - 3) + "y")) {
    return true;
  }
  if (token.size() > 2 && token.ends_with("es") &&
      words_.contains(token.substr(0, token.size() - 2))) {
    return true;
  }
  return token.size() > 1 && token.ends_with('s') &&
         words_.contains(token.substr(0, token.size() - 1));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (c == '\'' && !current.empty()) {
      continue;
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<ContextPhrase> extract_context(const Caption& caption,
                                           std::span<const prompting::ClassLabel> interest_classes,
                                           const NounLexicon& noun_lexicon) {
  const NounLexicon objects = noun_lexicon.with_labels(interest_classes);
  std::vector<std::vector<std::string>> chunks(1);
  for (std::string& token : tokenize(caption.text)) {
    // Object nouns win over the verb heuristic ("painting", "building").
    if (!objects.matches(token) && (is_boundary(token) || is_verb(token))) {
      if (!chunks.back().empty()) chunks.emplace_back();
      continue;
    }
    chunks.back().push_back(std::move(token));
  }

  std::vector<ContextPhrase> phrases;
  for (const std::vector<std::string>& chunk : chunks) {
    auto first = std::find_if(chunk.begin(), chunk.end(), [](const std::string& t) {
      return !determiners().contains(t) && !is_number(t);
    });
    if (first == chunk.end()) continue;
    const bool polluted = std::any_of(first, chunk.end(), [&](const std::string& t) {
      return objects.matches(t) || pronouns().contains(t) || meta_nouns().contains(t);
    });
    if (polluted) continue;
    std::string phrase;
    for (auto it = first; it != chunk.end(); ++it) {
      if (!phrase.empty()) phrase += ' ';
      phrase += *it;
    }
    const bool seen = std::any_of(phrases.begin(), phrases.end(),
                                  [&](const ContextPhrase& p) { return p.phrase == phrase; });
    if (!seen) phrases.push_back(ContextPhrase{std::move(phrase), caption});
  }
  return phrases;
}

std::vector<std::string> augment_context(std::span<const ContextPhrase> phrases, int per_phrase) {
  require(per_phrase >= 1, Errc::kInvalidArgument, "per_phrase must be >= 1");
  static const char* const kVariants[][2] = {
      {"A real photo of ", ""},
      {"A realistic photo of ", ""},
      {"A photo of ", ", color"},
  };
  const int count = std::min(per_phrase, 3);
  std::vector<std::string> prompts;
  for (const ContextPhrase& p : phrases) {
    for (int v = 0; v < count; ++v) {
      prompts.push_back(std::string(kVariants[v][0]) + p.phrase + kVariants[v][1]);
    }
  }
  return prompts;
}

std::size_t find_class_token(std::string_view text,
                             std::span<const prompting::ClassLabel> interest_classes) {
  const NounLexicon classes = NounLexicon().with_labels(interest_classes);
  const std::vector<std::string> tokens = tokenize(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (classes.matches(tokens[i])) return i;
  }
  return std::string_view::npos;
}

std::vector<CaptionPrompts> mine_cdi_grouped(const Image& cdi, const std::string& cdi_id,
                                             std::span<const prompting::ClassLabel> interest_classes,
                                             const NounLexicon& noun_lexicon,
                                             gateway::Gateway& gateway,
                                             const MiningOptions& options) {
  require(options.captions_per_cdi >= 1, Errc::kInvalidArgument, "captions_per_cdi must be >= 1");
  const std::vector<std::string> texts = gateway.caption_image(cdi, options.captions_per_cdi);
  require(static_cast<int>(texts.size()) == options.captions_per_cdi, Errc::kBadResponse,
          "captioner returned " + std::to_string(texts.size()) + " captions");

  std::set<std::string> emitted;
  std::vector<CaptionPrompts> groups;
  for (std::size_t rank = 0; rank < texts.size(); ++rank) {
    CaptionPrompts group;
    group.caption = Caption{texts[rank], cdi_id, static_cast<int>(rank)};
    std::string text = prompting::normalize_whitespace(texts[rank]);
    if (!text.empty() && !options.caption_edits.empty()) {
      text = prompting::apply_edit_rules(text, options.caption_edits);
    }
    const std::vector<ContextPhrase> phrases =
        extract_context(Caption{text, cdi_id, static_cast<int>(rank)}, interest_classes, noun_lexicon);
    if (!phrases.empty()) {
      std::string joined;
      for (const ContextPhrase& p : phrases) joined += (joined.empty() ? "" : ", ") + p.phrase;
      const ContextPhrase combined{joined, group.caption};
      for (std::string prompt : augment_context(std::span(&combined, 1), options.per_phrase)) {
        if (!options.prompt_edits.empty()) {
          prompt = prompting::apply_edit_rules(prompt, options.prompt_edits);
        }
        prompt = prompting::normalize_whitespace(prompt);
        if (!prompt.empty() && emitted.insert(prompt).second) group.prompts.push_back(prompt);
      }
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

std::vector<std::string> mine_cdi(const Image& cdi, const std::string& cdi_id,
                                  std::span<const prompting::ClassLabel> interest_classes,
                                  const NounLexicon& noun_lexicon, gateway::Gateway& gateway,
                                  const MiningOptions& options) {
  std::vector<std::string> prompts;
  for (CaptionPrompts& group :
       mine_cdi_grouped(cdi, cdi_id, interest_classes, noun_lexicon, gateway, options)) {
    for (std::string& p : group.prompts) prompts.push_back(std::move(p));
  }
  return prompts;
}

}  // namespace synthfab::context
