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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthfab/error.hpp"
#include "synthfab/gateway.hpp"
#include "synthfab/image.hpp"
#include "synthfab/prompting.hpp"
#include "synthfab/selection.hpp"

namespace synthfab::foreground {

struct ExtractionParams {
  // Per-channel distance, as a fraction of full scale.
  double chroma_threshold = 30.0 / 255.0;
  int morph_radius = 2;
  double min_area = 0.02;
  double max_area = 0.80;
  int border_ring = 8;
  // Pool building drops masks touching this share of the image border.
  double max_border_touch = 0.25;

  void validate() const;
};

// Border-seeded extraction for objects on a near-uniform field. Throws
// kBackgroundNotUniform when a border-ring channel has a standard deviation
// above 3 * chroma_threshold, then kNoForeground / kOversizedForeground when
// the area fraction of the result leaves [min_area, max_area].
BinaryMask extract_mask(const Image& image, const ExtractionParams& params);

// Throws kEmptyMask on an empty mask.
BBox mask_to_bbox(const BinaryMask& mask);

// Share of the image's outermost pixels that are set.
double border_touch_fraction(const BinaryMask& mask);

// Disk structuring element of the given radius. Pixels outside the image are
// ignored, so objects touching the edge are not eroded from that side.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask open(const BinaryMask& mask, int radius);
BinaryMask close(const BinaryMask& mask, int radius);

// 4-connectivity. Ties in size go to the component met first in scan order.
BinaryMask largest_component(const BinaryMask& mask);
int count_components(const BinaryMask& mask);

struct Provenance {
  std::string prompt;
  std::uint64_t seed = 0;
  int index = 0;
  int template_id = 0;
  double faithfulness = 0.0;
  double composite = 0.0;
  std::map<std::string, double> class_similarities;
  int source_width = 0;
  int source_height = 0;
  BBox crop;  // where the asset sat in the generated image
};

// The cutout is cropped to the mask's bounding box. image is RGBA with
// alpha = 255 inside the mask; colour is kept everywhere.
struct ForegroundAsset {
  std::string id;  // "<label_dir>/<template_id>/<seed>_<index>", spaces as underscores
  Image image;
  BinaryMask mask;
  prompting::ClassLabel label;
  Provenance provenance;
};

std::string asset_id(const prompting::ClassLabel& label, int template_id, std::uint64_t seed,
                     int index);

// Extracts and crops one selected candidate. Adds the border-touch check on
// top of extract_mask (reported as kOversizedForeground).
ForegroundAsset make_asset(const gateway::ScoredImage& candidate,
                           const prompting::ClassLabel& label, int template_id,
                           const std::string& prompt, double composite,
                           const ExtractionParams& params);

struct ExtractionFailure {
  std::string id;
  Errc code = Errc::kNoForeground;
  std::string message;
};

struct BatchReport {
  std::string label;
  int template_id = 0;
  std::size_t generated = 0;
  std::size_t kept = 0;
  std::size_t extracted = 0;
  std::vector<ExtractionFailure> failures;
};

// Runs extraction over the selected candidates of one (label, template)
// batch. Failures are recorded in `report` and dropped; if every candidate
// fails the batch is considered lost and kPipelineFailure is thrown.
std::vector<ForegroundAsset> extract_batch(std::span<const gateway::ScoredImage> kept,
                                           const prompting::ClassLabel& label, int template_id,
                                           const std::string& prompt,
                                           const selection::SelectionPolicy& policy,
                                           const ExtractionParams& params, BatchReport& report,
                                           int workers = 1);

struct PoolOptions {
  int per_template_n = 500;
  selection::SelectionPolicy policy = selection::SelectionPolicy::top_k(200);
  ExtractionParams extraction;
  int width = 512;
  int height = 512;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct PoolResult {
  std::vector<ForegroundAsset> assets;
  std::vector<BatchReport> batches;

  std::size_t generated() const;
  std::size_t extracted() const { return assets.size(); }
};

// Seed of the (label, template) generation batch.
std::uint64_t foreground_batch_seed(std::uint64_t seed, const prompting::ClassLabel& label,
                                    int template_id);

// generate -> score -> select -> extract for every (label, foreground
// template). Batches run in label order, then template order.
PoolResult build_foreground_pool(std::span<const prompting::ClassLabel> labels,
                                 const prompting::TemplateSet& templates,
                                 gateway::Gateway& gateway, const PoolOptions& options);

// Asset store: <root>/fg/<label>/<template_id>/<seed>_<index>.png (RGBA,
// alpha = mask) plus a .json provenance record next to it. Spaces in label
// names become underscores in the directory name.
std::filesystem::path asset_path(const std::filesystem::path& root, const ForegroundAsset& asset);
void save_asset(const std::filesystem::path& root, const ForegroundAsset& asset);
ForegroundAsset load_asset(const std::filesystem::path& png_path);
// Every asset under <root>/fg, in path order.
std::vector<ForegroundAsset> load_assets(const std::filesystem::path& root);

nlohmann::ordered_json provenance_to_json(const ForegroundAsset& asset);

}  // namespace synthfab::foreground
