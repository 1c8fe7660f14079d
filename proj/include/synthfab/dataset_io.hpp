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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthfab/compositor.hpp"
#include "synthfab/foreground_lab.hpp"
#include "synthfab/image.hpp"
#include "synthfab/prompting.hpp"

namespace synthfab::dataset {

enum class Origin { kSynthetic, kReal };

const char* origin_name(Origin origin);
Origin parse_origin(std::string_view text);

// Uncompressed COCO run-length encoding: column-major runs, starting with a
// (possibly empty) run of zeros.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const Rle&) const = default;
};

Rle rle_encode(const BinaryMask& mask);
// Throws kSchemaInvariantViolation when the runs do not cover the mask.
BinaryMask rle_decode(const Rle& rle);
// Decodes the compressed string form used by pycocotools.
Rle rle_from_compressed(std::string_view text, int height, int width);
// Even-odd fill of COCO polygons, sampled at pixel centres.
BinaryMask rasterize_polygons(const std::vector<std::vector<double>>& polygons, int height,
                              int width);

struct ImageRecord {
  int id = 0;
  std::string file_name;  // relative to the dataset root
  int width = 0;
  int height = 0;
  Origin origin = Origin::kSynthetic;

  bool operator==(const ImageRecord&) const = default;
};

struct Annotation {
  int id = 0;
  int image_id = 0;
  int category_id = 0;
  BBox bbox;
  Rle segmentation;
  std::size_t area = 0;
  int iscrowd = 0;
  std::optional<double> visible_fraction;

  bool operator==(const Annotation&) const = default;
};

// A COCO dataset held in memory.
struct Dataset {
  std::string name;
  std::vector<prompting::ClassLabel> categories;
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<std::uint64_t> seed_lineage;
};

nlohmann::ordered_json to_coco_json(const Dataset& dataset);
// Accepts uncompressed RLE, compressed RLE strings and polygon
// segmentations; everything is converted to uncompressed RLE.
Dataset from_coco_json(const nlohmann::json& doc);
Dataset load_coco(const std::filesystem::path& annotations_path);
// Atomic: the file appears complete or not at all.
void save_coco(const std::filesystem::path& annotations_path, const Dataset& dataset);

struct IntegrityReport {
  std::vector<std::string> problems;
  std::size_t images = 0;
  std::size_t annotations = 0;

  bool ok() const { return problems.empty(); }
};

// Image and annotation ids unique and dense from 1, every reference
// resolves, mask sizes match their image, area = popcount and bbox = tight
// box of the decoded mask. At most `max_problems` messages are kept.
IntegrityReport check_integrity(const Dataset& dataset, std::size_t max_problems = 50);

struct ManifestImage {
  int id = 0;
  std::string file;
  int width = 0;
  int height = 0;
  Origin origin = Origin::kSynthetic;
};

struct DatasetManifest {
  std::string name;
  std::vector<prompting::ClassLabel> categories;
  std::vector<ManifestImage> images;
  std::size_t annotation_count = 0;
  std::vector<std::uint64_t> seed_lineage;
};

DatasetManifest manifest_of(const Dataset& dataset);
nlohmann::ordered_json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& doc);

// Streams composed samples into <out_dir>/images/NNNNNN.png and, on
// finish(), writes <out_dir>/annotations.json and manifest.json after the
// integrity check passes. Nothing is written to annotations.json on failure.
class CocoWriter {
 public:
  CocoWriter(std::filesystem::path out_dir, std::string name,
             std::vector<prompting::ClassLabel> categories,
             std::vector<std::uint64_t> seed_lineage, int png_level = 6);

  // Returns the new image id.
  int add(const compositor::CompositeSample& sample);
  // Same, with the PNG already encoded (lets callers encode in parallel).
  int add_encoded(const compositor::CompositeSample& sample, std::span<const std::uint8_t> png);
  const Dataset& dataset() const { return dataset_; }
  DatasetManifest finish();

  static std::string image_file_name(int image_id);

 private:
  std::filesystem::path out_dir_;
  Dataset dataset_;
  std::map<std::string, int> category_ids_;
  int png_level_;
  bool finished_ = false;
};

DatasetManifest emit_coco(std::span<const compositor::CompositeSample> samples,
                          const std::filesystem::path& out_dir, const std::string& name,
                          std::span<const prompting::ClassLabel> categories,
                          std::vector<std::uint64_t> seed_lineage, int png_level = 6);

struct MixSpec {
  std::filesystem::path real_manifest;  // a COCO annotations.json
  double real_fraction = 1.0;
  bool include_real_foreground_pastes = false;

  void validate() const;
};

// Appends ceil(real_fraction * |real|) real images, sampled uniformly with a
// seed taken from the synthetic lineage, after the synthetic ones. Real
// categories are remapped to synthetic ids by name; image and annotation ids
// are re-densified. Throws kCategoryMismatch if the category names differ.
// `real_prefix` is prepended to real file names.
Dataset mix_datasets(const Dataset& synthetic, const Dataset& real, const MixSpec& spec,
                     const std::string& real_prefix = {});

// Loads both datasets, mixes them and writes <out_dir>/annotations.json plus
// manifest.json. Real file names are rewritten relative to out_dir.
DatasetManifest mix_files(const std::filesystem::path& synthetic_annotations,
                          const MixSpec& spec, const std::filesystem::path& out_dir);

struct DatasetStats {
  std::size_t images = 0;
  std::size_t synthetic_images = 0;
  std::size_t real_images = 0;
  std::size_t annotations = 0;
  std::map<std::string, std::size_t> instances_per_category;  // every category listed
  std::map<std::size_t, std::size_t> instances_per_image;    // count -> images
  double mean_instances_per_image = 0.0;
  double real_ratio = 0.0;
  double mean_visible_fraction = 0.0;  // over annotations that record one
};

DatasetStats dataset_stats(const Dataset& dataset);
nlohmann::ordered_json to_json(const DatasetStats& stats);
std::string stats_table(const DatasetStats& stats);

// Cuts every non-crowd annotation of a real dataset out as a foreground
// asset (ids "real/<image_id>/<annotation_id>"). Instances smaller than
// min_area pixels are skipped.
std::vector<foreground::ForegroundAsset> extract_real_foregrounds(
    const Dataset& real, const std::filesystem::path& root, std::size_t min_area = 64);

// Real images as backgrounds that keep their labelled instances.
std::vector<compositor::BackgroundAsset> load_real_backgrounds(const Dataset& real,
                                                               const std::filesystem::path& root);

}  // namespace synthfab::dataset
