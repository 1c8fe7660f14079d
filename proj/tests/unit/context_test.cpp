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
#include <doctest.h>

#include <json.hpp>

#include "synthfab/context_mining.hpp"
#include "synthfab/image_io.hpp"
#include "synthfab/mock_backend.hpp"
#include "synthfab/rng.hpp"
#include "test_util.hpp"

using namespace synthfab;
using namespace synthfab::context;
using prompting::ClassLabel;
using prompting::EditRule;
using testutil::error_of;

namespace {

std::vector<std::string> phrases_of(const std::string& text, std::span<const ClassLabel> classes,
                                    const NounLexicon& lexicon = NounLexicon::bundled()) {
  std::vector<std::string> out;
  for (const auto& p : extract_context(Caption{text, "cdi", 0}, classes, lexicon))
    out.push_back(p.phrase);
  return out;
}

using Strings = std::vector<std::string>;

Image cdi_with(const std::string& prompt) {
  Image im(64, 64, 3, 128);
  im.text[gateway::kMockPromptKey] = prompt;
  return im;
}

}  // namespace

TEST_SUITE("context") {

TEST_CASE("worked example reaches the prompt exactly") {
  const std::vector<ClassLabel> dog{prompting::make_label("dog", 1)};
  const auto phrases = extract_context(Caption{"A dog lying on grass field", "x", 0}, dog,
                                       NounLexicon::bundled());
  REQUIRE(phrases.size() == 1);
  CHECK(phrases[0].phrase == "grass field");
  CHECK(phrases[0].origin.source_cdi == "x");
  CHECK(augment_context(phrases, 1) == Strings{"A real photo of grass field"});
}

TEST_CASE("phrase and prompt examples") {
  const std::vector<ClassLabel> dog{prompting::make_label("dog", 1)};
  CHECK(phrases_of("two dogs", dog).empty());
  const std::vector<ClassLabel> hp{prompting::make_label("horse", 1), prompting::make_label("person", 2)};
  CHECK(phrases_of("a man riding a horse on a city street", hp, NounLexicon({"man"})) ==
        Strings{"city street"});
  CHECK(augment_context({}, 3).empty());
  const std::vector<ContextPhrase> forest{{"forest", {}}};
  CHECK(augment_context(forest, 2) == Strings{"A real photo of forest", "A realistic photo of forest"});
  CHECK(augment_context(forest, 3).back() == "A photo of forest, color");
  CHECK(augment_context(forest, 9).size() == 3);
  CHECK(error_of([&] { augment_context(forest, 0); }) == Errc::kInvalidArgument);
}

TEST_CASE("hand-parsed caption corpus") {
  const auto labels = testutil::voc_labels();
  const auto corpus =
      nlohmann::json::parse(testutil::slurp(testutil::source_dir() / "fixtures" / "captions.json"));
  REQUIRE(corpus.size() == 50);
  for (const auto& row : corpus) {
    const auto caption = row.at("caption").get<std::string>();
    CHECK_MESSAGE(phrases_of(caption, labels) == row.at("expected").get<Strings>(), caption);
  }
}

TEST_CASE("lexicon folding") {
  const NounLexicon lex = NounLexicon::parse("# comment\n\nbox\nberry\nknife\n  Person \n");
  CHECK(lex.size() == 4);
  for (const char* w : {"box", "boxes", "berries", "knives", "people", "person", "persons"})
    CHECK_MESSAGE(lex.matches(w), w);
  for (const char* w : {"bo", "", "berr", "knif", "s"}) CHECK_MESSAGE(!lex.matches(w), w);

  const std::vector<ClassLabel> table{prompting::make_label("dining table", 1)};
  const NounLexicon with = NounLexicon().with_labels(table);
  CHECK(with.matches("table"));
  CHECK(with.matches("diningtable"));
  CHECK(!with.matches("dining"));
  CHECK(NounLexicon::bundled().size() > 700);
  CHECK(error_of([] { NounLexicon::from_file("/nonexistent/lexicon.txt"); }) == Errc::kConfigError);
}

TEST_CASE("tokenize and find_class_token") {
  CHECK(tokenize("It's a DOG's-life, 2 cats!") == Strings{"its", "a", "dogs", "life", "2", "cats"});
  const auto labels = testutil::voc_labels();
  CHECK(find_class_token("A real photo of grass field", labels) == std::string::npos);
  CHECK(find_class_token("A real photo of kitchen without people", labels) == 6);
  CHECK(find_class_token("two Dogs", labels) == 1);
  CHECK(find_class_token("hotdog stand", labels) == std::string::npos);
}

TEST_CASE("property: no class or lexicon token survives, order is stable") {
  const auto labels = testutil::voc_labels();
  const Strings vocab = {"a",     "the",   "dog",    "dogs",   "people", "man",    "grass",
                         "field", "on",    "in",     "with",   "and",    "sitting", "red",
                         "table", "dining", "room",  "street", "cars",   "lamp",   "sky",
                         "is",    "photo", "of",     "three",  "sheep",  "beach",  "it",
                         "potted", "plant", "running", "under", "old",   "bridge", "tv"};
  Rng rng(2024);
  const NounLexicon objects = NounLexicon::bundled().with_labels(labels);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    for (int i = 0, n = int(rng.between(1, 12)); i < n; ++i)
      text += (i ? " " : "") + vocab[rng.below(vocab.size())];
    const auto phrases = extract_context(Caption{text, "c", 0}, labels, NounLexicon::bundled());
    CHECK(phrases_of(text, labels) == phrases_of(text, labels));
    std::size_t last = 0;
    for (const auto& p : phrases) {
      REQUIRE(!p.phrase.empty());
      for (const auto& t : tokenize(p.phrase)) CHECK_MESSAGE(!objects.matches(t), text);
      // Phrases are contiguous token runs of the caption, emitted left to right.
      const std::size_t at = (" " + text + " ").find(" " + p.phrase + " ", last);
      REQUIRE_MESSAGE(at != std::string::npos, text);
      last = at + 1;
    }
    for (const auto& prompt : augment_context(phrases, 3))
      CHECK_MESSAGE(find_class_token(prompt, labels) == std::string::npos, prompt);
  }
}

TEST_CASE("mine_cdi with the mock captioner") {
  gateway::MockGateway mock(prompting::TemplateSet::bundled());
  const auto labels = testutil::voc_labels();
  const auto dir = testutil::scratch("context_cdi");
  // Round-trip through PNG so the fixture path matches the pipeline.
  const std::vector<std::pair<std::string, std::string>> cdis = {
      {"sofa", "A cat sleeping on a sofa in a sunny living room"},
      {"coast", "A horse on a beach near the ocean at sunset"},
      {"pets", "two dogs and a cat"},
  };
  for (const auto& [id, prompt] : cdis) write_png(dir / (id + ".png"), cdi_with(prompt), 6);

  MiningOptions opt;
  auto mine = [&](const std::string& id) {
    return mine_cdi(read_image(dir / (id + ".png")), id, labels, NounLexicon::bundled(), mock, opt);
  };
  CHECK(mine("sofa") == Strings{"A real photo of sunny living room"});
  CHECK(mine("coast") == Strings{"A real photo of beach, ocean, sunset"});
  CHECK(mine("pets").empty());

  opt.per_phrase = 2;
  CHECK(mine("sofa") ==
        Strings{"A real photo of sunny living room", "A realistic photo of sunny living room"});

  // The second caption repeats the first after the "a picture showing" prefix
  // is stripped, so its group comes back empty rather than duplicated.
  const auto groups = mine_cdi_grouped(read_image(dir / "sofa.png"), "sofa", labels,
                                       NounLexicon::bundled(), mock, opt);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].caption.rank == 0);
  CHECK(groups[1].caption.text == "a picture showing a cat sleeping on a sofa in a sunny living room");
  CHECK(groups[1].prompts.empty());

  opt.per_phrase = 1;
  opt.captions_per_cdi = 8;
  for (const auto& [id, prompt] : cdis) {
    const auto prompts = mine(id);
    CHECK(prompts.size() <= 8);
    for (const auto& p : prompts) CHECK(find_class_token(p, labels) == std::string::npos);
  }
  opt.captions_per_cdi = 0;
  CHECK(error_of([&] { mine("sofa"); }) == Errc::kInvalidArgument);
}

TEST_CASE("language interventions") {
  gateway::MockGateway mock(prompting::TemplateSet::bundled());
  const auto labels = testutil::voc_labels();

  MiningOptions cartoon;
  cartoon.captions_per_cdi = 1;
  cartoon.caption_edits = {EditRule::substitute("cartoon", "real")};
  CHECK(mine_cdi(cdi_with("A cartoon kitchen"), "k", labels, NounLexicon::bundled(), mock, cartoon) ==
        Strings{"A real photo of real kitchen"});

  MiningOptions human;
  human.captions_per_cdi = 1;
  human.caption_edits = {EditRule::remove("a couple of people")};
  human.prompt_edits = {EditRule::append("without people")};
  const auto prompts =
      mine_cdi(cdi_with("A couple of people in a kitchen"), "h", labels, NounLexicon::bundled(), mock, human);
  CHECK(prompts == Strings{"A real photo of kitchen without people"});
}

TEST_CASE("gateway errors propagate") {
  struct Down final : gateway::Gateway {
    std::vector<Image> generate_images(const gateway::GenerationRequest&) override { return {}; }
    std::vector<double> score_image_text(const Image&, std::span<const std::string>) override {
      return {};
    }
    std::vector<std::string> caption_image(const Image&, int) override {
      fail(Errc::kGatewayUnavailable, "down");
    }
  } down;
  struct Short final : gateway::Gateway {
    std::vector<Image> generate_images(const gateway::GenerationRequest&) override { return {}; }
    std::vector<double> score_image_text(const Image&, std::span<const std::string>) override {
      return {};
    }
    std::vector<std::string> caption_image(const Image&, int) override { return {"a field"}; }
  } short_;
  const auto labels = testutil::voc_labels();
  MiningOptions opt;
  CHECK(error_of([&] { mine_cdi(cdi_with("x"), "x", labels, NounLexicon::bundled(), down, opt); }) ==
        Errc::kGatewayUnavailable);
  CHECK(error_of([&] { mine_cdi(cdi_with("x"), "x", labels, NounLexicon::bundled(), short_, opt); }) ==
        Errc::kBadResponse);
}

}  // TEST_SUITE
