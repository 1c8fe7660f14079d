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
// Runs every primary acceptance criterion and prints one PASS/FAIL line
// for each. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "synthfab/compositor.hpp"
#include "synthfab/context_mining.hpp"
#include "synthfab/dataset_io.hpp"
#include "synthfab/foreground_lab.hpp"
#include "synthfab/mock_backend.hpp"
#include "synthfab/pipeline.hpp"
#include "synthfab/selection.hpp"
#include "test_util.hpp"

using namespace synthfab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Collects failures; a criterion passes when nothing was recorded.
struct Check {
  std::vector<std::string> failures;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    else if (!ok) failures.back() = "... more";
  }
  template <typename A, typename B>
  void equal(const A& got, const B& want, const std::string& what) {
    if (got == want) return;
    std::ostringstream s;
    s << what << ": got " << got << ", want " << want;
    expect(false, s.str());
  }
};

struct Criterion {
  std::string name;
  std::function<void(Check&)> body;
};

std::vector<prompting::ClassLabel> labels_of(std::initializer_list<const char*> names) {
  std::vector<prompting::ClassLabel> out;
  int id = 1;
  for (const char* n : names) out.push_back(prompting::make_label(n, id++));
  return out;
}

// ---------------------------------------------------------------- counts

void count_arithmetic(Check& c) {
  using selection::SelectionPolicy;
  c.equal(20 * 6 * SelectionPolicy::top_k(200).keep_count(500), 24000u, "foregrounds");
  c.equal(16 * SelectionPolicy::top_fraction(0.95).keep_count(600), 9120u, "template backgrounds");
  c.equal(200 * 2 * SelectionPolicy::top_k(30).keep_count(80), 12000u, "context backgrounds");

  json labels = json::array();
  for (const auto& l : testutil::voc_labels()) labels.push_back(l.name);
  const auto templates = prompting::TemplateSet::bundled();
  auto plan = [&](const json& doc, pipeline::RecipeInputs in) {
    return pipeline::plan_recipe(pipeline::config_from_json(doc), templates, in);
  };
  auto row = [&](const std::string& name, const pipeline::RecipePlan& p, std::size_t real, std::size_t fg,
                 std::size_t bg, std::size_t train) {
    c.equal(p.real_images, real, name + " real images");
    c.equal(p.foregrounds(), fg, name + " foregrounds");
    c.equal(p.backgrounds(), bg, name + " backgrounds");
    c.equal(p.training_set_size(), train, name + " training images");
  };
  // 10-shot: 200 real images holding 541 objects, also used as the CDIs.
  json doc = {{"labels", labels}};
  row("0-shot pure_syn", plan(doc, {}), 0, 24000, 9120, 60000);
  json pure = doc;
  pure["cdi_dir"] = "/voc10/images";
  row("10-shot pure_syn", plan(pure, {200, 0, 0, 0}), 200, 24000, 21120, 60000);
  json fg = doc;
  fg["recipe"] = "syn_fg";
  fg["real_dataset"] = "/voc10/annotations.json";
  row("10-shot syn_fg", plan(fg, {0, 200, 541, 0}), 200, 24000, 200, 60000);
  json both = fg;
  both["recipe"] = "syn_plus_real";
  both["cdi_dir"] = "/voc10/images";
  row("10-shot syn_plus_real", plan(both, {200, 200, 541, 0}), 200, 24541, 21320, 60000);
  row("syn + 1464 real", plan(both, {200, 200, 541, 1464}), 1464, 24541, 21320, 61464);
  c.detail << "24000 fg, 9120 + 12000 bg, 5 recipe rows";
}

// ------------------------------------------------------------------ desk

struct DeskRun {
  double seconds = 0;
  fs::path dir;
};

DeskRun run_desk(const std::string& name) {
  const fs::path ws = testutil::scratch(name);
  const auto config = pipeline::load_config(testutil::source_dir().parent_path() / "configs" / "desk.json");
  gateway::MockGateway mock(config.load_templates());
  pipeline::Logger quiet;
  pipeline::Pipeline p(config, ws, mock, quiet);
  const auto t0 = std::chrono::steady_clock::now();
  p.run();
  const auto t1 = std::chrono::steady_clock::now();
  return {std::chrono::duration<double>(t1 - t0).count(), p.final_dataset_dir()};
}

std::map<std::string, std::string> files_under(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = testutil::slurp(e.path());
  return out;
}

std::optional<DeskRun> g_desk;

void desk_end_to_end(Check& c) {
  g_desk = run_desk("acceptance_desk_a");
  const DeskRun again = run_desk("acceptance_desk_b");
  const fs::path ann = g_desk->dir / "annotations.json";
  const auto ds = dataset::load_coco(ann);
  c.equal(ds.images.size(), 500u, "images");
  const auto v = pipeline::validate_dataset(ann);
  c.expect(v.ok(), "COCO validation: " + (v.integrity.problems.empty() ? "missing files"
                                                                        : v.integrity.problems.front()));
  std::set<int> with_instance;
  for (const auto& a : ds.annotations) with_instance.insert(a.image_id);
  const double frac = double(with_instance.size()) / double(std::max<std::size_t>(1, ds.images.size()));
  c.expect(frac >= 0.95, "fraction with an instance " + std::to_string(frac));
  c.expect(g_desk->seconds < 120.0, "wall time " + std::to_string(g_desk->seconds) + " s");
  const auto a = files_under(g_desk->dir), b = files_under(again.dir);
  c.expect(a.size() > ds.images.size(), "file count " + std::to_string(a.size()));
  c.expect(a == b, "two runs differ");
  c.detail << ds.images.size() << " images, " << ds.annotations.size() << " annotations, " << std::fixed
           << std::setprecision(1) << 100 * frac << "% with instances, " << g_desk->seconds << " s / "
           << again.seconds << " s, " << a.size() << " files identical";
}

// ------------------------------------------------------------ extraction

void extraction(Check& c) {
  const auto corpus = oracle::extraction_corpus(2027, 100, 256, 4.0);
  double sum = 0, worst = 1;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    double score = 0;
    try {
      score = oracle::iou(foreground::extract_mask(corpus[i].image, {}), corpus[i].truth);
    } catch (const Error& e) {
      c.expect(false, "image " + std::to_string(i) + ": " + e.what());
    }
    sum += score;
    worst = std::min(worst, score);
  }
  const double mean = sum / double(corpus.size());
  c.expect(mean >= 0.95, "mean IoU " + std::to_string(mean));
  c.expect(worst >= 0.90, "min IoU " + std::to_string(worst));
  c.detail << std::fixed << std::setprecision(4) << "mean IoU " << mean << ", min " << worst << " over 100";
}

// ------------------------------------------------------------ compositor

Image noise(Rng& rng, int w, int h, int channels) {
  Image im(w, h, channels);
  for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return im;
}

void paste_sigma0(Check& c) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int cw = int(rng.between(1, 40)), ch = int(rng.between(1, 40));
    compositor::Cutout cut;
    cut.mask = oracle::random_blob_mask(rng, cw, ch);
    cut.image = noise(rng, cw, ch, 4);
    Image canvas = noise(rng, 64, 64, 3);
    Image expected = canvas;
    const int x = int(rng.between(0, 64 - cw)), y = int(rng.between(0, 64 - ch));
    compositor::paste(canvas, cut, x, y, 0.0);
    for (int v = 0; v < ch; ++v)
      for (int u = 0; u < cw; ++u)
        if (cut.mask.get(u, v)) std::copy_n(cut.image.at(u, v), 3, expected.at(x + u, y + v));
    c.expect(canvas == expected, "trial " + std::to_string(trial));
  }
  c.detail << "200 cases bit-equal";
}

void occlusion(Check& c) {
  Rng rng(43);
  std::size_t layers_total = 0, partial = 0;
  for (int scene = 0; scene < 1000; ++scene) {
    const int layers = int(rng.between(1, 6));
    std::vector<BinaryMask> masks;
    std::vector<compositor::Instance> instances;
    for (int l = 0; l < layers; ++l) {
      BinaryMask m;
      do m = oracle::random_blob_mask(rng, 128, 128);
      while (oracle::count(m) == 0);
      masks.push_back(m);
      compositor::occlude(instances, m);
      compositor::Instance inst;
      inst.mask = m;
      inst.pasted_area = oracle::count(m);
      inst.bbox = *oracle::bbox_scan(m);
      instances.push_back(inst);
    }
    const auto z = oracle::zbuffer(masks);
    for (int l = 0; l < layers; ++l) {
      ++layers_total;
      partial += z.fraction[l] < 1.0;
      c.expect(instances[l].mask == z.visible[l], "scene " + std::to_string(scene) + " mask");
      c.expect(std::abs(instances[l].visible_fraction - z.fraction[l]) < 1e-12,
               "scene " + std::to_string(scene) + " visible fraction");
    }
  }
  c.detail << "1000 scenes, " << layers_total << " layers, " << partial << " occluded";
}

void desk_bboxes(Check& c) {
  if (!g_desk) {
    c.expect(false, "desk run unavailable");
    return;
  }
  const auto ds = dataset::load_coco(g_desk->dir / "annotations.json");
  for (const auto& a : ds.annotations) {
    const BinaryMask m = dataset::rle_decode(a.segmentation);
    const auto box = oracle::bbox_scan(m);
    c.expect(box && a.bbox == *box, "annotation " + std::to_string(a.id));
    c.equal(a.area, oracle::count(m), "area of annotation " + std::to_string(a.id));
  }
  c.detail << ds.annotations.size() << " annotations checked";
}

// ------------------------------------------------------------- selection

std::vector<gateway::ScoredImage> scored_batch(Rng& rng, std::vector<oracle::Cand>& cands, std::size_t n) {
  const char* classes[] = {"dog", "cat", "bird", "horse"};
  cands.clear();
  std::vector<gateway::ScoredImage> out;
  for (std::size_t i = 0; i < n; ++i) {
    oracle::Cand cd;
    cd.faithfulness = double(rng.between(-4, 4)) / 4.0;
    for (int k = 0, m = int(rng.between(0, 4)); k < m; ++k) cd.sims[classes[k]] = double(rng.between(-4, 4)) / 4.0;
    cd.own = rng.bernoulli(0.5) ? classes[rng.below(4)] : "";
    cd.seed = rng.below(3);
    cd.index = int(rng.below(3));
    gateway::ScoredImage s;
    s.faithfulness = cd.faithfulness;
    s.class_similarities = cd.sims;
    s.own_label = cd.own;
    s.seed = cd.seed;
    s.index = cd.index;
    s.id = std::to_string(i);
    cands.push_back(cd);
    out.push_back(s);
  }
  return out;
}

void selection_brute(Check& c) {
  Rng rng(47);
  std::vector<oracle::Cand> cands;
  for (int trial = 0; trial < 500; ++trial) {
    const auto batch = scored_batch(rng, cands, rng.between(1, 16));
    auto policy = rng.bernoulli(0.5) ? selection::SelectionPolicy::top_k(int(rng.between(1, 20)))
                                     : selection::SelectionPolicy::top_fraction(rng.uniform(0.01, 1.0));
    policy.class_penalty_weight = double(rng.between(0, 4)) / 2.0;
    std::vector<std::size_t> got;
    for (const auto& s : selection::rank_and_select(batch, policy)) got.push_back(std::stoul(s.id));
    c.expect(got == oracle::brute_select(cands, policy.class_penalty_weight, policy.keep_count(batch.size())),
             "trial " + std::to_string(trial));
  }
  c.detail << "500 batches";
}

void selection_monotone(Check& c) {
  Rng rng(53);
  std::vector<oracle::Cand> cands;
  for (int trial = 0; trial < 500; ++trial) {
    auto batch = scored_batch(rng, cands, rng.between(2, 16));
    const auto policy = selection::SelectionPolicy::top_k(16);
    const std::size_t who = rng.below(batch.size());
    auto position = [&] {
      const auto order = selection::rank(batch, policy);
      return std::find(order.begin(), order.end(), who) - order.begin();
    };
    const auto before = position();
    batch[who].faithfulness += double(rng.between(1, 8)) / 4.0;
    c.expect(position() <= before, "trial " + std::to_string(trial));
  }
  c.detail << "500 perturbations";
}

// ---------------------------------------------------------------- mining

void mining(Check& c) {
  using context::Caption;
  const auto& lexicon = context::NounLexicon::bundled();
  const auto dog = labels_of({"dog"});
  const auto phrases = context::extract_context(Caption{"A dog lying on grass field", "x", 0}, dog, lexicon);
  c.expect(phrases.size() == 1 && phrases[0].phrase == "grass field", "worked example phrase");
  c.expect(context::augment_context(phrases, 1) == std::vector<std::string>{"A real photo of grass field"},
           "worked example prompt");

  gateway::MockGateway mock(prompting::TemplateSet::bundled());
  const auto voc = testutil::voc_labels();
  auto cdi = [](const std::string& prompt) {
    Image im(64, 64, 3, 128);
    im.text[gateway::kMockPromptKey] = prompt;
    return im;
  };
  context::MiningOptions cartoon;
  cartoon.captions_per_cdi = 1;
  cartoon.caption_edits = {prompting::EditRule::substitute("cartoon", "real")};
  c.expect(context::mine_cdi(cdi("A cartoon kitchen"), "k", voc, lexicon, mock, cartoon) ==
               std::vector<std::string>{"A real photo of real kitchen"},
           "cartoon to real");
  context::MiningOptions people;
  people.captions_per_cdi = 1;
  people.caption_edits = {prompting::EditRule::remove("a couple of people")};
  people.prompt_edits = {prompting::EditRule::append("without people")};
  c.expect(context::mine_cdi(cdi("A couple of people in a kitchen"), "h", voc, lexicon, mock, people) ==
               std::vector<std::string>{"A real photo of kitchen without people"},
           "remove people");

  // Fixture corpus: every caption, all three prompt styles, VOC classes.
  const json corpus = json::parse(testutil::slurp(testutil::source_dir() / "fixtures" / "captions.json"));
  std::size_t prompts = 0, leaks = 0;
  for (const auto& item : corpus) {
    const auto ph = context::extract_context(Caption{item.at("caption"), "f", 0}, voc, lexicon);
    for (const auto& p : context::augment_context(ph, 3)) {
      ++prompts;
      if (context::find_class_token(p, voc) != std::string::npos) {
        ++leaks;
        c.expect(false, "class token in \"" + p + "\"");
      }
    }
  }
  c.detail << "worked example, 2 interventions, " << prompts << " prompts from " << corpus.size()
           << " captions with " << leaks << " class tokens";
}

// ------------------------------------------------------------------- mix

void mixing(Check& c) {
  const auto cats = labels_of({"dog", "cat"});
  auto stub = [&](int n, const std::string& prefix) {
    dataset::Dataset d;
    d.name = prefix;
    d.categories = cats;
    d.seed_lineage = {1};
    for (int i = 1; i <= n; ++i) {
      d.images.push_back({i, prefix + std::to_string(i) + ".png", 16, 16, dataset::Origin::kSynthetic});
      BinaryMask m(16, 16);
      m.set(i % 16, 3);
      dataset::Annotation a;
      a.id = i;
      a.image_id = i;
      a.category_id = 1 + i % 2;
      a.segmentation = dataset::rle_encode(m);
      a.bbox = *oracle::bbox_scan(m);
      a.area = 1;
      d.annotations.push_back(a);
    }
    return d;
  };
  const auto syn = stub(60000, "syn/");
  for (int n : {200, 1464}) {
    const auto mixed = dataset::mix_datasets(syn, stub(n, "real/"), {});
    c.equal(mixed.images.size(), std::size_t(60000 + n), "images with " + std::to_string(n) + " real");
    c.equal(mixed.annotations.size(), std::size_t(60000 + n), "annotations with " + std::to_string(n) + " real");
    const auto report = dataset::check_integrity(mixed);
    c.expect(report.ok(), report.ok() ? "" : report.problems.front());
  }
  c.detail << "60200 and 61464 image records, integrity intact";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"count arithmetic at full scale", count_arithmetic},
      {"desk-scale end-to-end with the mock backend", desk_end_to_end},
      {"foreground extraction IoU on the procedural corpus", extraction},
      {"compositor: sigma 0 paste equals naive replacement", paste_sigma0},
      {"compositor: occlusion equals the z-buffer on 128x128 scenes", occlusion},
      {"compositor: bbox equals the mask box for every desk annotation", desk_bboxes},
      {"selection equals exhaustive sort and truncate", selection_brute},
      {"selection: raising faithfulness never lowers rank", selection_monotone},
      {"context mining: worked example, interventions, no class tokens", mining},
      {"dataset mixing with real image records", mixing},
  };
  int failed = 0;
  for (const auto& crit : criteria) {
    Check c;
    try {
      crit.body(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = c.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS " : "FAIL ") << crit.name << " (" << c.detail.str() << ")\n";
    for (const auto& f : c.failures) std::cout << "    " << f << "\n";
    std::cout.flush();
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
