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
#include "synthfab/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "synthfab/error.hpp"
#include "synthfab/image_io.hpp"
#include "synthfab/rng.hpp"

namespace synthfab::dataset {
namespace {

using ojson = nlohmann::ordered_json;

ojson category_json(std::span<const prompting::ClassLabel> categories) {
  ojson out = ojson::array();
  for (const auto& c : categories) out.push_back({{"id", c.id}, {"name", c.name}});
  return out;
}

std::vector<prompting::ClassLabel> categories_from_json(const nlohmann::json& arr) {
  std::vector<prompting::ClassLabel> out;
  for (const auto& c : arr) {
    out.push_back({c.at("name").get<std::string>(), c.at("id").get<int>()});
  }
  return out;
}

std::filesystem::path dataset_root(const std::filesystem::path& annotations_path) {
  const std::filesystem::path parent = annotations_path.parent_path();
  return parent.empty() ? std::filesystem::path(".") : parent;
}

std::string with_prefix(const std::string& prefix, const std::string& file) {
  if (prefix.empty()) return file;
  return (std::filesystem::path(prefix) / file).lexically_normal().generic_string();
}

void check_fraction(double f) {
  require(f >= 0.0 && f <= 1.0, Errc::kInvalidArgument, "real_fraction must be in [0, 1]");
}

}  // namespace

const char* origin_name(Origin origin) {
  return origin == Origin::kReal ? "real" : "synthetic";
}

Origin parse_origin(std::string_view text) {
  if (text == "real") return Origin::kReal;
  require(text == "synthetic", Errc::kSchemaInvariantViolation,
          "unknown origin '" + std::string(text) + "'");
  return Origin::kSynthetic;
}

Rle rle_encode(const BinaryMask& mask) {
  Rle rle{mask.height, mask.width, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width; ++x) {
    for (int y = 0; y < mask.height; ++y) {
      const std::uint8_t v = mask.get(x, y) ? 1 : 0;
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const Rle& rle) {
  require(rle.height >= 0 && rle.width >= 0, Errc::kSchemaInvariantViolation,
          "negative RLE size");
  const std::uint64_t total = static_cast<std::uint64_t>(rle.height) * rle.width;
  const std::uint64_t covered =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  require(covered == total, Errc::kSchemaInvariantViolation,
          "RLE covers " + std::to_string(covered) + " of " + std::to_string(total) + " pixels");
  BinaryMask mask(rle.width, rle.height);
  std::uint64_t pos = 0;
  bool value = false;
  for (std::uint32_t run : rle.counts) {
    if (value) {
      for (std::uint64_t p = pos; p < pos + run; ++p) {
        const int x = static_cast<int>(p / rle.height);
        const int y = static_cast<int>(p % rle.height);
        mask.set(x, y);
      }
    }
    pos += run;
    value = !value;
  }
  return mask;
}

Rle rle_from_compressed(std::string_view text, int height, int width) {
  std::vector<std::int64_t> counts;
  std::size_t p = 0;
  while (p < text.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      require(p < text.size(), Errc::kSchemaInvariantViolation, "truncated compressed RLE");
      const std::int64_t c = static_cast<std::int64_t>(text[p]) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -(std::int64_t{1} << (5 * k));
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  Rle rle{height, width, {}};
  for (std::int64_t c : counts) {
    require(c >= 0, Errc::kSchemaInvariantViolation, "negative run in compressed RLE");
    rle.counts.push_back(static_cast<std::uint32_t>(c));
  }
  return rle;
}

BinaryMask rasterize_polygons(const std::vector<std::vector<double>>& polygons, int height,
                              int width) {
  BinaryMask mask(width, height);
  for (const auto& poly : polygons) {
    require(poly.size() >= 6 && poly.size() % 2 == 0, Errc::kSchemaInvariantViolation,
            "polygon needs at least three points");
    const std::size_t n = poly.size() / 2;
    for (int y = 0; y < height; ++y) {
      const double py = y + 0.5;
      for (int x = 0; x < width; ++x) {
        const double px = x + 0.5;
        bool inside = false;
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
          const double xi = poly[2 * i], yi = poly[2 * i + 1];
          const double xj = poly[2 * j], yj = poly[2 * j + 1];
          if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
            inside = !inside;
          }
        }
        if (inside) mask.set(x, y, !mask.get(x, y));
      }
    }
  }
  return mask;
}

ojson to_coco_json(const Dataset& dataset) {
  ojson doc;
  doc["info"] = {{"description", dataset.name}, {"seed_lineage", dataset.seed_lineage}};
  ojson images = ojson::array();
  for (const ImageRecord& im : dataset.images) {
    images.push_back({{"id", im.id},
                      {"file_name", im.file_name},
                      {"width", im.width},
                      {"height", im.height},
                      {"origin", origin_name(im.origin)}});
  }
  ojson annotations = ojson::array();
  for (const Annotation& a : dataset.annotations) {
    ojson rec = {{"id", a.id},
                 {"image_id", a.image_id},
                 {"category_id", a.category_id},
                 {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
                 {"segmentation",
                  {{"size", {a.segmentation.height, a.segmentation.width}},
                   {"counts", a.segmentation.counts}}},
                 {"area", a.area},
                 {"iscrowd", a.iscrowd}};
    if (a.visible_fraction) rec["visible_fraction"] = *a.visible_fraction;
    annotations.push_back(std::move(rec));
  }
  doc["images"] = std::move(images);
  doc["annotations"] = std::move(annotations);
  doc["categories"] = category_json(dataset.categories);
  return doc;
}

Dataset from_coco_json(const nlohmann::json& doc) {
  Dataset ds;
  try {
    if (doc.contains("info")) {
      const auto& info = doc.at("info");
      ds.name = info.value("description", std::string{});
      if (info.contains("seed_lineage")) {
        ds.seed_lineage = info.at("seed_lineage").get<std::vector<std::uint64_t>>();
      }
    }
    ds.categories = categories_from_json(doc.at("categories"));
    std::map<int, std::pair<int, int>> sizes;
    for (const auto& im : doc.at("images")) {
      ImageRecord rec;
      rec.id = im.at("id").get<int>();
      rec.file_name = im.at("file_name").get<std::string>();
      rec.width = im.at("width").get<int>();
      rec.height = im.at("height").get<int>();
      rec.origin = parse_origin(im.value("origin", std::string("real")));
      sizes[rec.id] = {rec.height, rec.width};
      ds.images.push_back(std::move(rec));
    }
    for (const auto& an : doc.value("annotations", nlohmann::json::array())) {
      Annotation a;
      a.id = an.at("id").get<int>();
      a.image_id = an.at("image_id").get<int>();
      a.category_id = an.at("category_id").get<int>();
      a.iscrowd = an.value("iscrowd", 0);
      if (an.contains("visible_fraction")) a.visible_fraction = an.at("visible_fraction").get<double>();
      const auto& seg = an.at("segmentation");
      const auto size = sizes.find(a.image_id);
      if (seg.is_object()) {
        const int h = seg.at("size").at(0).get<int>();
        const int w = seg.at("size").at(1).get<int>();
        if (seg.at("counts").is_string()) {
          a.segmentation = rle_from_compressed(seg.at("counts").get<std::string>(), h, w);
        } else {
          a.segmentation = Rle{h, w, seg.at("counts").get<std::vector<std::uint32_t>>()};
        }
      } else {
        require(size != sizes.end(), Errc::kSchemaInvariantViolation,
                "annotation " + std::to_string(a.id) + " references a missing image");
        a.segmentation = rle_encode(rasterize_polygons(
            seg.get<std::vector<std::vector<double>>>(), size->second.first, size->second.second));
      }
      if (seg.is_object()) {
        const auto& box = an.at("bbox");
        a.bbox = BBox{static_cast<int>(std::lround(box.at(0).get<double>())),
                      static_cast<int>(std::lround(box.at(1).get<double>())),
                      static_cast<int>(std::lround(box.at(2).get<double>())),
                      static_cast<int>(std::lround(box.at(3).get<double>()))};
        a.area = static_cast<std::size_t>(std::llround(an.at("area").get<double>()));
      }
      // Polygons and compressed RLE get box and area from the decoded mask so
      // they obey the same invariants as emitted annotations.
      const bool foreign = !seg.is_object() || seg.at("counts").is_string();
      if (foreign) {
        const BinaryMask mask = rle_decode(a.segmentation);
        a.area = mask.popcount();
        if (a.area > 0) a.bbox = foreground::mask_to_bbox(mask);
      }
      ds.annotations.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kSchemaInvariantViolation, std::string("malformed COCO document: ") + e.what());
  }
  return ds;
}

Dataset load_coco(const std::filesystem::path& annotations_path) {
  const std::vector<std::uint8_t> bytes = read_file(annotations_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kSchemaInvariantViolation,
         annotations_path.string() + " is not valid JSON: " + e.what());
  }
  return from_coco_json(doc);
}

void save_coco(const std::filesystem::path& annotations_path, const Dataset& dataset) {
  if (annotations_path.has_parent_path()) {
    std::filesystem::create_directories(annotations_path.parent_path());
  }
  write_text_atomic(annotations_path, to_coco_json(dataset).dump() + "\n");
}

IntegrityReport check_integrity(const Dataset& dataset, std::size_t max_problems) {
  IntegrityReport report;
  report.images = dataset.images.size();
  report.annotations = dataset.annotations.size();
  auto problem = [&](std::string text) {
    if (report.problems.size() < max_problems) report.problems.push_back(std::move(text));
  };

  std::set<int> category_ids;
  std::set<std::string> category_names;
  for (const auto& c : dataset.categories) {
    if (!category_ids.insert(c.id).second) problem("duplicate category id " + std::to_string(c.id));
    if (!category_names.insert(c.name).second) problem("duplicate category name " + c.name);
  }

  std::map<int, const ImageRecord*> images;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const ImageRecord& im = dataset.images[i];
    if (im.id != static_cast<int>(i) + 1) {
      problem("image ids are not dense from 1: position " + std::to_string(i) + " has id " +
              std::to_string(im.id));
    }
    if (!images.emplace(im.id, &im).second) problem("duplicate image id " + std::to_string(im.id));
    if (im.width <= 0 || im.height <= 0) problem("image " + std::to_string(im.id) + " has no size");
    if (im.file_name.empty()) problem("image " + std::to_string(im.id) + " has no file name");
  }

  for (std::size_t i = 0; i < dataset.annotations.size(); ++i) {
    const Annotation& a = dataset.annotations[i];
    const std::string tag = "annotation " + std::to_string(a.id);
    if (a.id != static_cast<int>(i) + 1) problem("annotation ids are not dense from 1 at " + tag);
    if (!category_ids.contains(a.category_id)) {
      problem(tag + " references missing category " + std::to_string(a.category_id));
    }
    const auto im = images.find(a.image_id);
    if (im == images.end()) {
      problem(tag + " references missing image " + std::to_string(a.image_id));
      continue;
    }
    if (a.segmentation.height != im->second->height || a.segmentation.width != im->second->width) {
      problem(tag + " mask size differs from its image");
      continue;
    }
    BinaryMask mask;
    try {
      mask = rle_decode(a.segmentation);
    } catch (const Error& e) {
      problem(tag + ": " + e.what());
      continue;
    }
    const std::size_t area = mask.popcount();
    if (area == 0) {
      problem(tag + " has an empty mask");
      continue;
    }
    if (area != a.area) problem(tag + " area " + std::to_string(a.area) + " != popcount " + std::to_string(area));
    if (foreground::mask_to_bbox(mask) != a.bbox) problem(tag + " bbox is not the mask's tight box");
    if (a.visible_fraction && !(*a.visible_fraction > 0.0 && *a.visible_fraction <= 1.0)) {
      problem(tag + " visible_fraction out of (0, 1]");
    }
  }
  return report;
}

DatasetManifest manifest_of(const Dataset& dataset) {
  DatasetManifest m;
  m.name = dataset.name;
  m.categories = dataset.categories;
  for (const ImageRecord& im : dataset.images) {
    m.images.push_back({im.id, im.file_name, im.width, im.height, im.origin});
  }
  m.annotation_count = dataset.annotations.size();
  m.seed_lineage = dataset.seed_lineage;
  return m;
}

ojson to_json(const DatasetManifest& manifest) {
  ojson images = ojson::array();
  for (const ManifestImage& im : manifest.images) {
    images.push_back({{"id", im.id},
                      {"file", im.file},
                      {"width", im.width},
                      {"height", im.height},
                      {"origin", origin_name(im.origin)}});
  }
  return {{"name", manifest.name},
          {"categories", category_json(manifest.categories)},
          {"images", std::move(images)},
          {"annotation_count", manifest.annotation_count},
          {"seed_lineage", manifest.seed_lineage}};
}

DatasetManifest manifest_from_json(const nlohmann::json& doc) {
  DatasetManifest m;
  try {
    m.name = doc.at("name").get<std::string>();
    m.categories = categories_from_json(doc.at("categories"));
    for (const auto& im : doc.at("images")) {
      m.images.push_back({im.at("id").get<int>(), im.at("file").get<std::string>(),
                          im.at("width").get<int>(), im.at("height").get<int>(),
                          parse_origin(im.at("origin").get<std::string>())});
    }
    m.annotation_count = doc.at("annotation_count").get<std::size_t>();
    m.seed_lineage = doc.at("seed_lineage").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kSchemaInvariantViolation, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

CocoWriter::CocoWriter(std::filesystem::path out_dir, std::string name,
                       std::vector<prompting::ClassLabel> categories,
                       std::vector<std::uint64_t> seed_lineage, int png_level)
    : out_dir_(std::move(out_dir)), png_level_(png_level) {
  prompting::validate_labels(categories);
  dataset_.name = std::move(name);
  dataset_.categories = std::move(categories);
  dataset_.seed_lineage = std::move(seed_lineage);
  for (const auto& c : dataset_.categories) category_ids_[c.name] = c.id;
  try {
    std::filesystem::create_directories(out_dir_ / "images");
  } catch (const std::filesystem::filesystem_error& e) {
    fail(Errc::kIoFailure, e.what());
  }
}

std::string CocoWriter::image_file_name(int image_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "images/%06d.png", image_id);
  return buf;
}

int CocoWriter::add(const compositor::CompositeSample& sample) {
  return add_encoded(sample, encode_png(sample.image, png_level_));
}

int CocoWriter::add_encoded(const compositor::CompositeSample& sample,
                            std::span<const std::uint8_t> png) {
  require(!finished_, Errc::kInvalidArgument, "writer already finished");
  const int image_id = static_cast<int>(dataset_.images.size()) + 1;
  ImageRecord rec{image_id, image_file_name(image_id), sample.image.width, sample.image.height,
                  Origin::kSynthetic};
  write_file_atomic(out_dir_ / rec.file_name, png);
  dataset_.images.push_back(rec);

  for (const compositor::Instance& inst : sample.instances) {
    const auto cat = category_ids_.find(inst.label.name);
    require(cat != category_ids_.end(), Errc::kSchemaInvariantViolation,
            "instance label '" + inst.label.name + "' is not a dataset category");
    Annotation a;
    a.id = static_cast<int>(dataset_.annotations.size()) + 1;
    a.image_id = image_id;
    a.category_id = cat->second;
    a.bbox = inst.bbox;
    a.segmentation = rle_encode(inst.mask);
    a.area = inst.mask.popcount();
    a.visible_fraction = inst.visible_fraction;
    dataset_.annotations.push_back(std::move(a));
  }
  return image_id;
}

DatasetManifest CocoWriter::finish() {
  require(!finished_, Errc::kInvalidArgument, "writer already finished");
  finished_ = true;
  const IntegrityReport report = check_integrity(dataset_);
  if (!report.ok()) {
    fail(Errc::kSchemaInvariantViolation,
         "refusing to write annotations: " + report.problems.front());
  }
  save_coco(out_dir_ / "annotations.json", dataset_);
  const DatasetManifest manifest = manifest_of(dataset_);
  write_text_atomic(out_dir_ / "manifest.json", to_json(manifest).dump(2) + "\n");
  return manifest;
}

DatasetManifest emit_coco(std::span<const compositor::CompositeSample> samples,
                          const std::filesystem::path& out_dir, const std::string& name,
                          std::span<const prompting::ClassLabel> categories,
                          std::vector<std::uint64_t> seed_lineage, int png_level) {
  CocoWriter writer(out_dir, name, {categories.begin(), categories.end()},
                    std::move(seed_lineage), png_level);
  for (const auto& s : samples) writer.add(s);
  return writer.finish();
}

void MixSpec::validate() const { check_fraction(real_fraction); }

Dataset mix_datasets(const Dataset& synthetic, const Dataset& real, const MixSpec& spec,
                     const std::string& real_prefix) {
  spec.validate();
  std::map<std::string, int> syn_ids;
  for (const auto& c : synthetic.categories) syn_ids[c.name] = c.id;
  std::set<std::string> real_names;
  for (const auto& c : real.categories) real_names.insert(c.name);
  std::set<std::string> syn_names;
  for (const auto& [n, id] : syn_ids) syn_names.insert(n);
  if (syn_names != real_names) {
    fail(Errc::kCategoryMismatch, "synthetic and real datasets have different category names");
  }
  std::map<int, int> remap;
  for (const auto& c : real.categories) remap[c.id] = syn_ids.at(c.name);

  Dataset out;
  out.name = synthetic.name;
  out.categories = synthetic.categories;
  out.seed_lineage = synthetic.seed_lineage;

  std::map<int, int> syn_image_ids;
  for (const ImageRecord& im : synthetic.images) {
    ImageRecord r = im;
    r.id = static_cast<int>(out.images.size()) + 1;
    syn_image_ids[im.id] = r.id;
    out.images.push_back(std::move(r));
  }
  for (const Annotation& a : synthetic.annotations) {
    Annotation b = a;
    b.id = static_cast<int>(out.annotations.size()) + 1;
    b.image_id = syn_image_ids.at(a.image_id);
    out.annotations.push_back(std::move(b));
  }

  const std::size_t want = static_cast<std::size_t>(std::max(
      0.0, std::ceil(spec.real_fraction * static_cast<double>(real.images.size()) - 1e-9)));
  if (want == 0) return out;

  const std::uint64_t parent = synthetic.seed_lineage.empty() ? 0 : synthetic.seed_lineage.back();
  const std::uint64_t mix_seed = derive_seed(parent, {hash_string("mix")});
  out.seed_lineage.push_back(mix_seed);
  std::vector<std::size_t> order(real.images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed);
  rng.shuffle(order);
  order.resize(std::min(want, order.size()));
  std::sort(order.begin(), order.end());

  std::map<int, int> real_image_ids;
  for (std::size_t idx : order) {
    ImageRecord r = real.images[idx];
    real_image_ids[r.id] = static_cast<int>(out.images.size()) + 1;
    r.id = real_image_ids[real.images[idx].id];
    r.origin = Origin::kReal;
    r.file_name = with_prefix(real_prefix, r.file_name);
    out.images.push_back(std::move(r));
  }
  for (const Annotation& a : real.annotations) {
    const auto it = real_image_ids.find(a.image_id);
    if (it == real_image_ids.end()) continue;
    Annotation b = a;
    b.id = static_cast<int>(out.annotations.size()) + 1;
    b.image_id = it->second;
    b.category_id = remap.at(a.category_id);
    out.annotations.push_back(std::move(b));
  }
  return out;
}

DatasetManifest mix_files(const std::filesystem::path& synthetic_annotations,
                          const MixSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  Dataset syn = load_coco(synthetic_annotations);
  const Dataset real = load_coco(spec.real_manifest);
  std::filesystem::create_directories(out_dir);
  const auto rel = [&](const std::filesystem::path& root) {
    const std::string r = std::filesystem::relative(std::filesystem::absolute(root),
                                                    std::filesystem::absolute(out_dir))
                              .generic_string();
    return r == "." ? std::string{} : r;
  };
  const std::string syn_prefix = rel(dataset_root(synthetic_annotations));
  for (ImageRecord& im : syn.images) im.file_name = with_prefix(syn_prefix, im.file_name);
  const Dataset mixed = mix_datasets(syn, real, spec, rel(dataset_root(spec.real_manifest)));
  const IntegrityReport report = check_integrity(mixed);
  if (!report.ok()) {
    fail(Errc::kSchemaInvariantViolation, "mixed dataset is inconsistent: " + report.problems.front());
  }
  save_coco(out_dir / "annotations.json", mixed);
  const DatasetManifest manifest = manifest_of(mixed);
  write_text_atomic(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return manifest;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats s;
  s.images = dataset.images.size();
  s.annotations = dataset.annotations.size();
  std::map<int, std::string> names;
  for (const auto& c : dataset.categories) {
    names[c.id] = c.name;
    s.instances_per_category[c.name] = 0;
  }
  std::map<int, std::size_t> per_image;
  for (const ImageRecord& im : dataset.images) {
    per_image[im.id] = 0;
    (im.origin == Origin::kReal ? s.real_images : s.synthetic_images) += 1;
  }
  double visible_sum = 0.0;
  std::size_t visible_count = 0;
  for (const Annotation& a : dataset.annotations) {
    if (const auto n = names.find(a.category_id); n != names.end()) {
      ++s.instances_per_category[n->second];
    }
    if (const auto p = per_image.find(a.image_id); p != per_image.end()) ++p->second;
    if (a.visible_fraction) {
      visible_sum += *a.visible_fraction;
      ++visible_count;
    }
  }
  for (const auto& [id, count] : per_image) ++s.instances_per_image[count];
  if (s.images > 0) {
    s.mean_instances_per_image = static_cast<double>(s.annotations) / static_cast<double>(s.images);
    s.real_ratio = static_cast<double>(s.real_images) / static_cast<double>(s.images);
  }
  if (visible_count > 0) s.mean_visible_fraction = visible_sum / static_cast<double>(visible_count);
  return s;
}

ojson to_json(const DatasetStats& s) {
  ojson per_cat = ojson::object();
  for (const auto& [name, n] : s.instances_per_category) per_cat[name] = n;
  ojson hist = ojson::object();
  for (const auto& [k, n] : s.instances_per_image) hist[std::to_string(k)] = n;
  return {{"images", s.images},
          {"synthetic_images", s.synthetic_images},
          {"real_images", s.real_images},
          {"annotations", s.annotations},
          {"instances_per_category", per_cat},
          {"instances_per_image", hist},
          {"mean_instances_per_image", s.mean_instances_per_image},
          {"real_ratio", s.real_ratio},
          {"mean_visible_fraction", s.mean_visible_fraction}};
}

std::string stats_table(const DatasetStats& s) {
  std::ostringstream out;
  char line[160];
  auto row = [&](const std::string& key, const std::string& value) {
    std::snprintf(line, sizeof line, "%-28s %s\n", key.c_str(), value.c_str());
    out << line;
  };
  auto fixed = [](double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return std::string(buf);
  };
  row("images", std::to_string(s.images));
  row("  synthetic", std::to_string(s.synthetic_images));
  row("  real", std::to_string(s.real_images));
  row("real ratio", fixed(s.real_ratio * 100.0, 2) + "%");
  row("annotations", std::to_string(s.annotations));
  row("mean instances / image", fixed(s.mean_instances_per_image, 3));
  row("mean visible fraction", fixed(s.mean_visible_fraction, 3));
  out << "instances per category\n";
  for (const auto& [name, n] : s.instances_per_category) row("  " + name, std::to_string(n));
  out << "images by instance count\n";
  for (const auto& [k, n] : s.instances_per_image) row("  " + std::to_string(k), std::to_string(n));
  return out.str();
}

std::vector<foreground::ForegroundAsset> extract_real_foregrounds(
    const Dataset& real, const std::filesystem::path& root, std::size_t min_area) {
  std::map<int, prompting::ClassLabel> labels;
  for (const auto& c : real.categories) labels[c.id] = c;
  std::map<int, std::vector<const Annotation*>> by_image;
  for (const Annotation& a : real.annotations) {
    if (a.iscrowd == 0 && a.area >= min_area) by_image[a.image_id].push_back(&a);
  }

  std::vector<foreground::ForegroundAsset> assets;
  for (const ImageRecord& im : real.images) {
    const auto anns = by_image.find(im.id);
    if (anns == by_image.end()) continue;
    const Image picture = to_rgb(read_image(root / im.file_name));
    require(picture.width == im.width && picture.height == im.height, Errc::kSchemaInvariantViolation,
            im.file_name + " does not match its recorded size");
    for (const Annotation* a : anns->second) {
      const BinaryMask mask = rle_decode(a->segmentation);
      const BBox box = foreground::mask_to_bbox(mask);
      foreground::ForegroundAsset asset;
      asset.id = "real/" + std::to_string(im.id) + "/" + std::to_string(a->id);
      asset.label = labels.at(a->category_id);
      asset.image = Image(box.w, box.h, 4);
      asset.mask = BinaryMask(box.w, box.h);
      for (int y = 0; y < box.h; ++y) {
        for (int x = 0; x < box.w; ++x) {
          const bool inside = mask.get(box.x + x, box.y + y);
          std::uint8_t* d = asset.image.at(x, y);
          std::copy_n(picture.at(box.x + x, box.y + y), 3, d);
          d[3] = inside ? 255 : 0;
          asset.mask.set(x, y, inside);
        }
      }
      asset.provenance.index = a->id;
      asset.provenance.template_id = -1;
      asset.provenance.source_width = im.width;
      asset.provenance.source_height = im.height;
      asset.provenance.crop = box;
      assets.push_back(std::move(asset));
    }
  }
  return assets;
}

std::vector<compositor::BackgroundAsset> load_real_backgrounds(const Dataset& real,
                                                               const std::filesystem::path& root) {
  std::map<int, prompting::ClassLabel> labels;
  for (const auto& c : real.categories) labels[c.id] = c;
  std::map<int, std::vector<const Annotation*>> by_image;
  for (const Annotation& a : real.annotations) {
    if (a.iscrowd == 0) by_image[a.image_id].push_back(&a);
  }
  std::vector<compositor::BackgroundAsset> out;
  for (const ImageRecord& im : real.images) {
    compositor::BackgroundAsset bg;
    bg.id = "real/" + std::to_string(im.id);
    bg.image = to_rgb(read_image(root / im.file_name));
    for (const Annotation* a : by_image[im.id]) {
      compositor::Instance inst;
      inst.label = labels.at(a->category_id);
      inst.mask = rle_decode(a->segmentation);
      require(inst.mask.width == bg.image.width && inst.mask.height == bg.image.height,
              Errc::kSchemaInvariantViolation, "mask size differs from " + im.file_name);
      inst.pasted_area = inst.mask.popcount();
      if (inst.pasted_area == 0) continue;
      inst.bbox = foreground::mask_to_bbox(inst.mask);
      inst.source_asset = bg.id + "/" + std::to_string(a->id);
      bg.instances.push_back(std::move(inst));
    }
    out.push_back(std::move(bg));
  }
  return out;
}

}  // namespace synthfab::dataset
