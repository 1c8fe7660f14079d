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

#include <sstream>

#include "oracles.hpp"
#include "synthfab/prompting.hpp"
#include "test_util.hpp"

using namespace synthfab;
using namespace synthfab::prompting;
using testutil::error_of;

TEST_SUITE("prompting") {

TEST_CASE("foreground templates fill the object slot") {
  CHECK(verbalize_foreground(make_label("dog", 1), 0) == "A photo of dog");
  CHECK(verbalize_foreground(make_label("bus", 6), 3) == "bus in a white background");
  CHECK(verbalize_foreground(make_label("  Dog ", 1), 2) == "A photo of dog in pure background");
}

TEST_CASE("bad labels and template ids are rejected") {
  CHECK(error_of([] { make_label("", 1); }) == Errc::kInvalidLabel);
  CHECK(error_of([] { make_label("   ", 1); }) == Errc::kInvalidLabel);
  CHECK(error_of([] { make_label("dog", 0); }) == Errc::kInvalidLabel);
  CHECK(error_of([] { verbalize_foreground(ClassLabel{"", 1}, 0); }) == Errc::kInvalidLabel);
  CHECK(error_of([] { verbalize_foreground(make_label("dog", 1), 6); }) == Errc::kUnknownTemplate);
  CHECK(error_of([] { verbalize_foreground(make_label("dog", 1), -1); }) == Errc::kUnknownTemplate);
  CHECK(error_of([] { verbalize_background(16); }) == Errc::kUnknownTemplate);
  CHECK(error_of([] { verbalize_background(-1); }) == Errc::kUnknownTemplate);
}

TEST_CASE("label sets need unique ids and names") {
  std::vector<ClassLabel> ok{make_label("dog", 1), make_label("cat", 2)};
  validate_labels(ok);
  std::vector<ClassLabel> dup_id{make_label("dog", 1), make_label("cat", 1)};
  CHECK(error_of([&] { validate_labels(dup_id); }) == Errc::kInvalidLabel);
  std::vector<ClassLabel> dup_name{make_label("dog", 1), make_label("dog", 2)};
  CHECK(error_of([&] { validate_labels(dup_name); }) == Errc::kInvalidLabel);
}

TEST_CASE("background templates") {
  CHECK(verbalize_background(2) == "A real photo of blue sky");
  CHECK(verbalize_background(7) == "A real photo of railway without train");
  CHECK(verbalize_background(1) == "A real photo of empty kitch");
  CHECK(TemplateSet::bundled().foreground().size() == 6);
  CHECK(TemplateSet::bundled().background().size() == 16);
}

TEST_CASE("kitchen override restores the full word and leaves the rest alone") {
  const auto path = testutil::source_dir().parent_path() / "data" / "template_overrides" /
                    "empty_kitchen.json";
  const TemplateSet fixed =
      TemplateSet::bundled().with_overrides(nlohmann::json::parse(testutil::slurp(path)));
  CHECK(fixed.verbalize_background(1) == "A real photo of empty kitchen");
  for (int i = 0; i < 16; ++i) {
    if (i != 1) CHECK(fixed.verbalize_background(i) == verbalize_background(i));
  }
}

TEST_CASE("every verbalized prompt matches the golden file") {
  std::ostringstream got;
  for (const ClassLabel& l : testutil::voc_labels())
    for (int t = 0; t < 6; ++t)
      got << "fg\t" << l.name << "\t" << t << "\t" << verbalize_foreground(l, t) << "\n";
  for (int i = 0; i < 16; ++i) got << "bg\t" << i << "\t" << verbalize_background(i) << "\n";
  CHECK(got.str() == testutil::slurp(testutil::source_dir() / "golden" / "prompts_voc.txt"));
}

TEST_CASE("foreground prompts hold the label exactly once") {
  synthfab::Rng rng(11);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  for (int trial = 0; trial < 300; ++trial) {
    std::string name;
    const int len = static_cast<int>(rng.between(3, 10));
    for (int i = 0; i < len; ++i) name += alphabet[rng.below(alphabet.size())];
    if (rng.bernoulli(0.3)) name += " " + name.substr(0, 2) + "x";
    const ClassLabel label = make_label(name, 1);
    for (int t = 0; t < 6; ++t) {
      const std::string p = verbalize_foreground(label, t);
      const auto first = p.find(name);
      REQUIRE(first != std::string::npos);
      CHECK(p.find(name, first + 1) == std::string::npos);
    }
  }
  for (const ClassLabel& l : testutil::voc_labels())
    for (int t = 0; t < 6; ++t) {
      const std::string p = verbalize_foreground(l, t);
      CHECK(p.find(l.name) != std::string::npos);
      CHECK(p.find(l.name, p.find(l.name) + 1) == std::string::npos);
    }
}

TEST_CASE("template manifests are validated") {
  auto bad_slot = nlohmann::json::parse(R"({"templates":[
      {"id":0,"kind":"foreground","pattern":"A photo of dog"}]})");
  CHECK_THROWS_AS(TemplateSet::from_json(bad_slot), synthfab::Error);
  auto twice = nlohmann::json::parse(R"({"templates":[
      {"id":0,"kind":"foreground","pattern":"<object> and <object>"}]})");
  CHECK_THROWS_AS(TemplateSet::from_json(twice), synthfab::Error);
}

TEST_CASE("edit rules: substitution, removal, append") {
  const std::vector<EditRule> cartoon{EditRule::substitute("cartoon", "real")};
  CHECK(apply_edit_rules("a cartoon kitchen", cartoon) == "a real kitchen");

  const std::vector<EditRule> people{EditRule::remove("a couple of people"),
                                     EditRule::append("without people")};
  CHECK(apply_edit_rules("a couple of people in a kitchen", people) ==
        "in a kitchen without people");

  CHECK(apply_edit_rules("a kitchen", {}) == "a kitchen");
  const std::vector<EditRule> kitchen_of{EditRule::append("a kitchen of")};
  CHECK(apply_edit_rules("an environment with a table", kitchen_of) ==
        "an environment with a table a kitchen of");
}

TEST_CASE("edit rules match whole words, case-insensitively") {
  const std::vector<EditRule> real{EditRule::substitute("real", "fake")};
  CHECK(apply_edit_rules("a bowl of cereal", real) == "a bowl of cereal");
  CHECK(apply_edit_rules("A REAL photo", real) == "A fake photo");
  const std::vector<EditRule> rm{EditRule::remove("people")};
  CHECK(apply_edit_rules("people  watching   people", rm) == "watching");
  CHECK(apply_edit_rules("peoples", rm) == "peoples");
}

TEST_CASE("edit rule invariants are checked") {
  CHECK_THROWS_AS(EditRule::substitute("", "x").validate(), synthfab::Error);
  CHECK_THROWS_AS(EditRule::substitute("x", "").validate(), synthfab::Error);
  CHECK_THROWS_AS(EditRule::remove("").validate(), synthfab::Error);
  CHECK_THROWS_AS(EditRule::append("").validate(), synthfab::Error);
  const EditRule r = EditRule::substitute("cartoon", "real");
  CHECK(edit_rule_from_json(to_json(r)) == r);
}

// Random captions over a small vocabulary so rules actually hit.
std::string random_caption(synthfab::Rng& rng) {
  static const char* words[] = {"a", "the", "people", "kitchen", "cartoon", "man", "of",
                                "couple", "in", "dog", "Real", "street", "on"};
  std::string s;
  const int n = static_cast<int>(rng.between(1, 12));
  for (int i = 0; i < n; ++i) {
    if (i) s += rng.bernoulli(0.2) ? "  " : " ";
    s += words[rng.below(std::size(words))];
  }
  return s;
}

TEST_CASE("property: empty rule list is the identity") {
  synthfab::Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    std::string c;
    const int len = static_cast<int>(rng.between(1, 40));
    for (int k = 0; k < len; ++k) c += static_cast<char>(rng.between(1, 255));
    CHECK(apply_edit_rules(c, {}) == c);
    const std::string words = random_caption(rng);
    CHECK(apply_edit_rules(words, {}) == words);
  }
}

TEST_CASE("property: remove-only rule lists are idempotent") {
  synthfab::Rng rng(4);
  static const char* targets[] = {"people", "a couple of", "man", "the", "a", "of people",
                                  "in", "a a"};
  for (int i = 0; i < 500; ++i) {
    std::vector<EditRule> rules;
    const int n = static_cast<int>(rng.between(1, 4));
    for (int k = 0; k < n; ++k) rules.push_back(EditRule::remove(targets[rng.below(std::size(targets))]));
    const std::string c = random_caption(rng);
    const std::string once = apply_edit_rules(c, rules);
    if (once.empty()) continue;  // nothing left to re-apply to
    CHECK_MESSAGE(apply_edit_rules(once, rules) == once, c);
  }
}

TEST_CASE("property: a substitute rule is a no-op once its target is gone") {
  synthfab::Rng rng(5);
  const std::vector<EditRule> rules{EditRule::substitute("cartoon", "real")};
  for (int i = 0; i < 300; ++i) {
    const std::string once = apply_edit_rules(random_caption(rng), rules);
    CHECK(apply_edit_rules(once, rules) == once);
  }
}

}  // TEST_SUITE
