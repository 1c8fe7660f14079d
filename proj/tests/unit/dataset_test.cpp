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

#include "oracles.hpp"
#include "synthfab/dataset_io.hpp"
#include "synthfab/image_io.hpp"
#include "test_util.hpp"

using namespace synthfab;
using namespace synthfab::dataset;
using testutil::error_of;

namespace {

const std::vector<prompting::ClassLabel> kCats{prompting::make_label("dog", 1),
                                               prompting::make_label("cat", 2)};

BinaryMask rows_to_mask(const nlohmann::json& rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows[0].get<std::string>().size());
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, rows[y].get<std::string>()[x] == '1');
  return m;
}

compositor::Instance instance(const BinaryMask& m, const std::string& label, double visible = 1.0) {
  compositor::Instance inst;
  inst.label = prompting::make_label(label, label == "dog" ? 1 : 2);
  inst.mask = m;
  inst.bbox = *oracle::bbox_scan(m);
  inst.visible_fraction = visible;
  inst.pasted_area = oracle::count(m);
  return inst;
}

// A sample with `n` disjoint square instances on a noisy canvas.
compositor::CompositeSample square_sample(Rng& rng, int n) {
  compositor::CompositeSample s;
  s.image = Image(64, 48, 3);
  for (auto& p : s.image.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  for (int k = 0; k < n; ++k) {
    BinaryMask m(64, 48);
    const int x0 = 16 * k + static_cast<int>(rng.below(4)), y0 = static_cast<int>(rng.below(20));
    for (int y = y0; y < y0 + 10; ++y)
      for (int x = x0; x < x0 + 8; ++x) m.set(x, y);
    s.instances.push_back(instance(m, k % 2 ? "cat" : "dog", 0.5 + 0.1 * k));
  }
  return s;
}

Dataset bare(int images, const std::vector<prompting::ClassLabel>& cats, const std::string& prefix) {
  Dataset d;
  d.name = prefix;
  d.categories = cats;
  d.seed_lineage = {7};
  for (int i = 1; i <= images; ++i)
    d.images.push_back({i, prefix + std::to_string(i) + ".png", 32, 32, Origin::kSynthetic});
  return d;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("RLE agrees with pycocotools on frozen cases") {
  const auto cases =
      nlohmann::json::parse(testutil::slurp(testutil::source_dir() / "fixtures" / "rle_golden.json"));
  REQUIRE(cases.size() == 24);
  for (const auto& c : cases) {
    const BinaryMask m = rows_to_mask(c.at("rows"));
    const Rle rle = rle_encode(m);
    CHECK(rle.counts == c.at("counts").get<std::vector<std::uint32_t>>());
    CHECK(rle_decode(rle) == m);
    const Rle from = rle_from_compressed(c.at("compressed").get<std::string>(), m.height, m.width);
    CHECK(from == rle);
  }
}

TEST_CASE("property: RLE encode then decode is the identity") {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const int w = static_cast<int>(rng.between(1, 50)), h = static_cast<int>(rng.between(1, 50));
    const BinaryMask m = trial % 2 ? oracle::random_mask(rng, w, h, rng.uniform())
                                   : oracle::random_blob_mask(rng, w, h);
    const Rle rle = rle_encode(m);
    CHECK(rle.counts == oracle::rle_counts(m));
    CHECK(rle_decode(rle) == m);
  }
}

TEST_CASE("malformed RLE is rejected") {
  CHECK(error_of([] { rle_decode(Rle{2, 2, {1, 1}}); }) == Errc::kSchemaInvariantViolation);
  CHECK(error_of([] { rle_decode(Rle{2, 2, {3, 3}}); }) == Errc::kSchemaInvariantViolation);
}

TEST_CASE("polygons fill at pixel centres") {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const auto shape = oracle::random_polygon(rng, 20, 15, rng.uniform(3, 14), static_cast<int>(rng.between(3, 8)));
    std::vector<double> flat;
    for (const auto& p : shape.poly) flat.insert(flat.end(), {p.x, p.y});
    CHECK(rasterize_polygons({flat}, 30, 40) == shape.rasterize(40, 30));
  }
  // Even-odd: a square with a square hole.
  const auto ring = rasterize_polygons({{0, 0, 10, 0, 10, 10, 0, 10}, {3, 3, 7, 3, 7, 7, 3, 7}}, 10, 10);
  CHECK(oracle::count(ring) == 100 - 16);
  CHECK(!ring.get(5, 5));
}

TEST_CASE("emit: one sample with four instances") {
  Rng rng(23);
  const auto sample = square_sample(rng, 4);
  const auto dir = testutil::scratch("emit_one");
  const auto manifest = emit_coco(std::span(&sample, 1), dir, "one", kCats, {1, 2});
  CHECK(manifest.images.size() == 1);
  CHECK(manifest.annotation_count == 4);
  CHECK(manifest.seed_lineage == std::vector<std::uint64_t>{1, 2});

  const auto doc = nlohmann::json::parse(testutil::slurp(dir / "annotations.json"));
  CHECK(doc.at("images").size() == 1);
  CHECK(doc.at("images")[0].at("file_name") == "images/000001.png");
  CHECK(doc.at("categories")[1].at("name") == "cat");
  REQUIRE(doc.at("annotations").size() == 4);
  const auto& a = doc.at("annotations")[0];
  for (const char* key : {"id", "image_id", "category_id", "bbox", "segmentation", "area", "iscrowd"})
    CHECK_MESSAGE(a.contains(key), key);
  CHECK(a.at("iscrowd") == 0);
  CHECK(a.at("segmentation").at("size") == nlohmann::json::array({48, 64}));
  CHECK(read_image(dir / "images" / "000001.png") == sample.image);

  // Decode every emitted mask from the file and rescan its box.
  for (const auto& ann : doc.at("annotations")) {
    Rle rle{48, 64, ann.at("segmentation").at("counts").get<std::vector<std::uint32_t>>()};
    const BinaryMask m = rle_decode(rle);
    const auto box = *oracle::bbox_scan(m);
    CHECK(ann.at("bbox") == nlohmann::json::array({box.x, box.y, box.w, box.h}));
    CHECK(ann.at("area") == oracle::count(m));
  }
  const Dataset back = load_coco(dir / "annotations.json");
  CHECK(check_integrity(back).ok());
  CHECK(back.annotations[3].visible_fraction == doctest::Approx(0.8));
}

TEST_CASE("emit is byte-deterministic") {
  Rng a(24), b(24);
  std::vector<compositor::CompositeSample> s1, s2;
  for (int i = 0; i < 5; ++i) s1.push_back(square_sample(a, 1 + i % 4));
  for (int i = 0; i < 5; ++i) s2.push_back(square_sample(b, 1 + i % 4));
  const auto d1 = testutil::scratch("emit_a"), d2 = testutil::scratch("emit_b");
  emit_coco(s1, d1, "x", kCats, {9});
  emit_coco(s2, d2, "x", kCats, {9});
  CHECK(testutil::slurp(d1 / "annotations.json") == testutil::slurp(d2 / "annotations.json"));
  CHECK(testutil::slurp(d1 / "manifest.json") == testutil::slurp(d2 / "manifest.json"));
  for (int i = 1; i <= 5; ++i) {
    const auto f = CocoWriter::image_file_name(i);
    CHECK(testutil::slurp(d1 / f) == testutil::slurp(d2 / f));
  }
}

TEST_CASE("writer refuses inconsistent samples and writes nothing") {
  Rng rng(25);
  auto sample = square_sample(rng, 2);
  sample.instances[1].bbox.w += 1;
  const auto dir = testutil::scratch("emit_bad");
  CHECK(error_of([&] { emit_coco(std::span(&sample, 1), dir, "bad", kCats, {}); }) ==
        Errc::kSchemaInvariantViolation);
  CHECK(!std::filesystem::exists(dir / "annotations.json"));

  auto unknown = square_sample(rng, 1);
  unknown.instances[0].label = prompting::make_label("horse", 3);
  CHECK(error_of([&] { emit_coco(std::span(&unknown, 1), dir, "bad", kCats, {}); }) ==
        Errc::kSchemaInvariantViolation);
}

TEST_CASE("integrity check finds each kind of defect") {
  Rng rng(26);
  const auto dir = testutil::scratch("integrity");
  const auto sample = square_sample(rng, 2);
  emit_coco(std::span(&sample, 1), dir, "ok", kCats, {});
  const Dataset good = load_coco(dir / "annotations.json");
  REQUIRE(check_integrity(good).ok());

  auto broken = [&](auto&& mutate) {
    Dataset d = good;
    mutate(d);
    return !check_integrity(d).ok();
  };
  CHECK(broken([](Dataset& d) { d.images[0].id = 2; }));
  CHECK(broken([](Dataset& d) { d.annotations[1].id = 1; }));
  CHECK(broken([](Dataset& d) { d.annotations[0].image_id = 5; }));
  CHECK(broken([](Dataset& d) { d.annotations[0].category_id = 9; }));
  CHECK(broken([](Dataset& d) { d.annotations[0].area += 1; }));
  CHECK(broken([](Dataset& d) { d.annotations[0].bbox.x += 1; }));
  CHECK(broken([](Dataset& d) { d.annotations[0].segmentation.width = 10; }));
  CHECK(broken([](Dataset& d) { d.categories.push_back(d.categories[0]); }));
}

TEST_CASE("COCO parsing accepts compressed RLE and polygons") {
  const auto doc = nlohmann::json::parse(R"({
    "images": [{"id": 1, "file_name": "a.jpg", "width": 4, "height": 3}],
    "categories": [{"id": 5, "name": "dog"}],
    "annotations": [
      {"id": 1, "image_id": 1, "category_id": 5, "bbox": [1, 0, 2, 2], "area": 4, "iscrowd": 0,
       "segmentation": [[1, 0, 3, 0, 3, 2, 1, 2]]},
      {"id": 2, "image_id": 1, "category_id": 5, "bbox": [0, 0, 1, 3], "area": 3, "iscrowd": 0,
       "segmentation": {"size": [3, 4], "counts": "039"}}
    ]})");
  const Dataset d = from_coco_json(doc);
  CHECK(d.images[0].origin == Origin::kReal);  // foreign files without the field are real data
  REQUIRE(d.annotations.size() == 2);
  CHECK(d.annotations[0].segmentation.counts == std::vector<std::uint32_t>{3, 2, 1, 2, 4});
  CHECK(d.annotations[1].segmentation.counts == std::vector<std::uint32_t>{0, 3, 9});
  CHECK(check_integrity(d).ok());
  CHECK(error_of([] { from_coco_json(nlohmann::json::parse(R"({"images": 3})")); }) ==
        Errc::kSchemaInvariantViolation);
}

TEST_CASE("mix arithmetic") {
  const Dataset syn = bare(60000, kCats, "s");
  Dataset real200 = bare(200, {kCats[1], kCats[0]}, "r");
  real200.categories[0].id = 10;
  real200.categories[1].id = 20;
  Dataset real1464 = bare(1464, kCats, "r");

  MixSpec spec;
  const Dataset m1 = mix_datasets(syn, real200, spec);
  CHECK(m1.images.size() == 60200);
  CHECK(check_integrity(m1).ok());
  CHECK(m1.images[60000].origin == Origin::kReal);
  CHECK(m1.images.back().id == 60200);
  const Dataset m2 = mix_datasets(syn, real1464, spec, "../real/");
  CHECK(m2.images.size() == 61464);
  CHECK(m2.images.back().file_name.rfind("../real/r", 0) == 0);
  CHECK(check_integrity(m2).ok());

  spec.real_fraction = 0.0;
  const Dataset none = mix_datasets(syn, real200, spec);
  CHECK(none.images == syn.images);
  CHECK(none.seed_lineage == syn.seed_lineage);

  spec.real_fraction = 0.5;
  CHECK(mix_datasets(bare(3, kCats, "s"), bare(3, kCats, "r"), spec).images.size() == 5);
  // Same lineage, same sample.
  CHECK(mix_datasets(syn, real1464, spec).images == mix_datasets(syn, real1464, spec).images);

  const Dataset other = bare(2, {prompting::make_label("horse", 1), kCats[1]}, "r");
  CHECK(error_of([&] { mix_datasets(syn, other, spec); }) == Errc::kCategoryMismatch);
  spec.real_fraction = 1.5;
  CHECK(error_of([&] { spec.validate(); }) == Errc::kInvalidArgument);
}

TEST_CASE("mix remaps real annotations") {
  Rng rng(27);
  const auto sdir = testutil::scratch("mix_syn"), rdir = testutil::scratch("mix_real");
  std::vector<compositor::CompositeSample> ss{square_sample(rng, 2), square_sample(rng, 1)};
  emit_coco(ss, sdir, "syn", kCats, {3});
  // Real categories listed in the other order with other ids.
  const std::vector<prompting::ClassLabel> real_cats{prompting::make_label("cat", 7),
                                                     prompting::make_label("dog", 8)};
  std::vector<compositor::CompositeSample> rs{square_sample(rng, 2)};
  rs[0].instances[0].label = real_cats[1];
  rs[0].instances[1].label = real_cats[0];
  emit_coco(rs, rdir, "real", real_cats, {4});

  MixSpec spec;
  spec.real_manifest = rdir / "annotations.json";
  const auto out = testutil::scratch("mix_out");
  const auto manifest = mix_files(sdir / "annotations.json", spec, out);
  CHECK(manifest.images.size() == 3);
  CHECK(manifest.annotation_count == 5);
  const Dataset mixed = load_coco(out / "annotations.json");
  CHECK(check_integrity(mixed).ok());
  CHECK(mixed.annotations[3].category_id == 1);  // dog
  CHECK(mixed.annotations[4].category_id == 2);  // cat
  CHECK(std::filesystem::exists(out / mixed.images[2].file_name));
  CHECK(std::filesystem::exists(out / mixed.images[0].file_name));
}

TEST_CASE("stats") {
  const DatasetStats empty = dataset_stats(Dataset{});
  CHECK(empty.images == 0);
  CHECK(empty.annotations == 0);
  CHECK(empty.mean_instances_per_image == 0.0);
  CHECK(empty.real_ratio == 0.0);
  CHECK(empty.mean_visible_fraction == 0.0);

  Rng rng(28);
  std::vector<compositor::CompositeSample> ss;
  for (int i = 0; i < 6; ++i) ss.push_back(square_sample(rng, 4));
  const auto dir = testutil::scratch("stats4");
  emit_coco(ss, dir, "s", kCats, {});
  const DatasetStats four = dataset_stats(load_coco(dir / "annotations.json"));
  CHECK(four.mean_instances_per_image == 4.0);
  CHECK(four.instances_per_image.at(4) == 6);
  CHECK(four.instances_per_category.at("dog") == 12);
  CHECK(four.mean_visible_fraction == doctest::Approx(0.65));
  CHECK(stats_table(four).find("dog") != std::string::npos);
  CHECK(to_json(four).at("images") == 6);

  MixSpec spec;
  const DatasetStats mixed = dataset_stats(mix_datasets(bare(60000, kCats, "s"), bare(200, kCats, "r"), spec));
  CHECK(mixed.real_images == 200);
  CHECK(mixed.synthetic_images == 60000);
  CHECK(mixed.real_ratio == doctest::Approx(200.0 / 60200.0));
  CHECK(mixed.instances_per_category.at("cat") == 0);
}

TEST_CASE("real datasets become backgrounds and foregrounds") {
  Rng rng(29);
  const auto dir = testutil::scratch("real_assets");
  std::vector<compositor::CompositeSample> rs{square_sample(rng, 3)};
  emit_coco(rs, dir, "real", kCats, {});
  const Dataset real = load_coco(dir / "annotations.json");
  const auto bgs = load_real_backgrounds(real, dir);
  REQUIRE(bgs.size() == 1);
  CHECK(bgs[0].image == rs[0].image);
  REQUIRE(bgs[0].instances.size() == 3);
  CHECK(bgs[0].instances[2].mask == rs[0].instances[2].mask);
  CHECK(bgs[0].instances[1].label.name == "cat");

  const auto fgs = extract_real_foregrounds(real, dir, 64);
  REQUIRE(fgs.size() == 3);
  CHECK(fgs[0].id == "real/1/1");
  CHECK(fgs[0].image.width == 8);
  CHECK(fgs[0].image.height == 10);
  CHECK(oracle::count(fgs[0].mask) == 80);
  CHECK(extract_real_foregrounds(real, dir, 81).empty());
}

TEST_CASE("manifest round trip") {
  Rng rng(30);
  const auto dir = testutil::scratch("manifest");
  std::vector<compositor::CompositeSample> ss{square_sample(rng, 1)};
  const auto m = emit_coco(ss, dir, "m", kCats, {5, 6});
  const auto back = manifest_from_json(nlohmann::json::parse(testutil::slurp(dir / "manifest.json")));
  CHECK(back.name == "m");
  CHECK(back.categories == m.categories);
  CHECK(back.images.size() == 1);
  CHECK(back.annotation_count == 1);
  CHECK(back.seed_lineage == m.seed_lineage);
  CHECK(parse_origin(origin_name(Origin::kReal)) == Origin::kReal);
}

}  // TEST_SUITE
