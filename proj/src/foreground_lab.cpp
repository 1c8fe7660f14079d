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
#include "synthfab/foreground_lab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "synthfab/image_io.hpp"
#include "synthfab/parallel.hpp"
#include "synthfab/rng.hpp"

namespace synthfab::foreground {
namespace {

struct Offset {
  int dx;
  int dy;
};

std::vector<Offset> disk(int radius) {
  std::vector<Offset> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.push_back({dx, dy});
    }
  }
  return offsets;
}

// any == true: dilation (some neighbour set); false: erosion (all set).
BinaryMask morph(const BinaryMask& mask, int radius, bool any) {
  if (radius <= 0) return mask;
  const std::vector<Offset> offsets = disk(radius);
  BinaryMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool result = !any;
      for (const Offset& o : offsets) {
        const int nx = x + o.dx;
        const int ny = y + o.dy;
        if (!mask.contains(nx, ny)) continue;
        if (mask.get(nx, ny) == any) {
          result = any;
          break;
        }
      }
      out.set(x, y, result);
    }
  }
  return out;
}

// Component labels (0 = background), 4-connected, numbered in scan order.
std::vector<int> label_components(const BinaryMask& mask, std::vector<std::size_t>& sizes) {
  std::vector<int> labels(mask.bits.size(), 0);
  sizes.assign(1, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.bits.size(); ++start) {
    if (!mask.bits[start] || labels[start] != 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t size = 0;
    labels[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int x = static_cast<int>(p % mask.width);
      const int y = static_cast<int>(p / mask.width);
      const std::array<Offset, 4> nbrs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
      for (const Offset& o : nbrs) {
        const int nx = x + o.dx;
        const int ny = y + o.dy;
        if (!mask.contains(nx, ny)) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * mask.width + nx;
        if (mask.bits[q] && labels[q] == 0) {
          labels[q] = id;
          stack.push_back(q);
        }
      }
    }
    sizes.push_back(size);
  }
  return labels;
}

bool in_ring(int x, int y, int width, int height, int ring) {
  return x < ring || y < ring || x >= width - ring || y >= height - ring;
}

std::string dir_name(const std::string& label) {
  std::string out = label;
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

}  // namespace

void ExtractionParams::validate() const {
  require(chroma_threshold > 0.0 && chroma_threshold <= 1.0, Errc::kInvalidArgument,
          "chroma_threshold must be in (0, 1]");
  require(morph_radius >= 0, Errc::kInvalidArgument, "morph_radius must be >= 0");
  require(min_area > 0.0 && min_area < max_area && max_area <= 1.0, Errc::kInvalidArgument,
          "need 0 < min_area < max_area <= 1");
  require(border_ring >= 1, Errc::kInvalidArgument, "border_ring must be >= 1");
  require(max_border_touch > 0.0 && max_border_touch <= 1.0, Errc::kInvalidArgument,
          "max_border_touch must be in (0, 1]");
}

BinaryMask extract_mask(const Image& image, const ExtractionParams& params) {
  params.validate();
  require(image.width >= 64 && image.height >= 64, Errc::kInvalidArgument,
          "extraction needs at least a 64x64 image");
  require(image.channels >= 3, Errc::kInvalidArgument, "extraction needs colour channels");
  const int w = image.width;
  const int h = image.height;

  // Ring statistics: per-channel median and standard deviation.
  std::array<std::array<std::size_t, 256>, 3> hist{};
  std::array<double, 3> sum{}, sum_sq{};
  std::size_t ring_count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!in_ring(x, y, w, h, params.border_ring)) continue;
      const std::uint8_t* px = image.at(x, y);
      for (int c = 0; c < 3; ++c) {
        ++hist[c][px[c]];
        sum[c] += px[c];
        sum_sq[c] += static_cast<double>(px[c]) * px[c];
      }
      ++ring_count;
    }
  }
  const double threshold = params.chroma_threshold * 255.0;
  std::array<int, 3> background{};
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / static_cast<double>(ring_count);
    const double var = std::max(0.0, sum_sq[c] / static_cast<double>(ring_count) - mean * mean);
    if (std::sqrt(var) > 3.0 * threshold) {
      fail(Errc::kBackgroundNotUniform,
           "border ring channel " + std::to_string(c) + " stddev " +
               std::to_string(std::sqrt(var)) + " exceeds " + std::to_string(3.0 * threshold));
    }
    std::size_t seen = 0;
    const std::size_t half = (ring_count + 1) / 2;
    for (int v = 0; v < 256; ++v) {
      seen += hist[c][v];
      if (seen >= half) {
        background[c] = v;
        break;
      }
    }
  }

  auto admits = [&](int x, int y) {
    const std::uint8_t* px = image.at(x, y);
    for (int c = 0; c < 3; ++c) {
      if (std::abs(px[c] - background[c]) > threshold) return false;
    }
    return true;
  };

  // Flood fill the background from every border pixel.
  BinaryMask background_region(w, h);
  std::vector<std::size_t> stack;
  auto seed = [&](int x, int y) {
    if (!background_region.get(x, y) && admits(x, y)) {
      background_region.set(x, y);
      stack.push_back(static_cast<std::size_t>(y) * w + x);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    const std::size_t p = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(p % w);
    const int y = static_cast<int>(p / w);
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }

  BinaryMask mask(w, h);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) mask.bits[i] = background_region.bits[i] ? 0 : 1;
  mask = open(close(mask, params.morph_radius), params.morph_radius);
  mask = largest_component(mask);

  const double fraction =
      static_cast<double>(mask.popcount()) / (static_cast<double>(w) * static_cast<double>(h));
  if (fraction < params.min_area) {
    fail(Errc::kNoForeground, "foreground covers " + std::to_string(fraction) + " of the image");
  }
  if (fraction > params.max_area) {
    fail(Errc::kOversizedForeground,
         "foreground covers " + std::to_string(fraction) + " of the image");
  }
  return mask;
}

BBox mask_to_bbox(const BinaryMask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(y) * mask.width;
    for (int x = 0; x < mask.width; ++x) {
      if (!row[x]) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = y;
    }
  }
  require(x1 >= 0, Errc::kEmptyMask, "mask has no set pixels");
  return BBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

double border_touch_fraction(const BinaryMask& mask) {
  if (mask.width == 0 || mask.height == 0) return 0.0;
  std::size_t total = 0;
  std::size_t touched = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (x != 0 && y != 0 && x != mask.width - 1 && y != mask.height - 1) continue;
      ++total;
      touched += mask.get(x, y) ? 1 : 0;
    }
  }
  return static_cast<double>(touched) / static_cast<double>(total);
}

BinaryMask dilate(const BinaryMask& mask, int radius) { return morph(mask, radius, true); }
BinaryMask erode(const BinaryMask& mask, int radius) { return morph(mask, radius, false); }
BinaryMask open(const BinaryMask& mask, int radius) {
  return dilate(erode(mask, radius), radius);
}
BinaryMask close(const BinaryMask& mask, int radius) {
  return erode(dilate(mask, radius), radius);
}

BinaryMask largest_component(const BinaryMask& mask) {
  std::vector<std::size_t> sizes;
  const std::vector<int> labels = label_components(mask, sizes);
  int best = 0;
  for (std::size_t id = 1; id < sizes.size(); ++id) {
    if (sizes[id] > sizes[best]) best = static_cast<int>(id);
  }
  BinaryMask out(mask.width, mask.height);
  if (best == 0) return out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.bits[i] = labels[i] == best ? 1 : 0;
  return out;
}

int count_components(const BinaryMask& mask) {
  std::vector<std::size_t> sizes;
  label_components(mask, sizes);
  return static_cast<int>(sizes.size()) - 1;
}

std::string asset_id(const prompting::ClassLabel& label, int template_id, std::uint64_t seed,
                     int index) {
  return dir_name(label.name) + "/" + std::to_string(template_id) + "/" + std::to_string(seed) +
         "_" + std::to_string(index);
}

ForegroundAsset make_asset(const gateway::ScoredImage& candidate,
                           const prompting::ClassLabel& label, int template_id,
                           const std::string& prompt, double composite,
                           const ExtractionParams& params) {
  const BinaryMask full = extract_mask(candidate.image, params);
  const double touch = border_touch_fraction(full);
  if (touch >= params.max_border_touch) {
    fail(Errc::kOversizedForeground,
         "mask touches " + std::to_string(touch) + " of the image border");
  }
  const BBox box = mask_to_bbox(full);

  ForegroundAsset asset;
  asset.id = asset_id(label, template_id, candidate.seed, candidate.index);
  asset.label = label;
  asset.image = Image(box.w, box.h, 4);
  asset.mask = BinaryMask(box.w, box.h);
  const Image& src = candidate.image;
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      const std::uint8_t* s = src.at(box.x + x, box.y + y);
      std::uint8_t* d = asset.image.at(x, y);
      const bool inside = full.get(box.x + x, box.y + y);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
      d[3] = inside ? 255 : 0;
      asset.mask.set(x, y, inside);
    }
  }
  asset.provenance = Provenance{prompt,
                                candidate.seed,
                                candidate.index,
                                template_id,
                                candidate.faithfulness,
                                composite,
                                candidate.class_similarities,
                                src.width,
                                src.height,
                                box};
  return asset;
}

std::vector<ForegroundAsset> extract_batch(std::span<const gateway::ScoredImage> kept,
                                           const prompting::ClassLabel& label, int template_id,
                                           const std::string& prompt,
                                           const selection::SelectionPolicy& policy,
                                           const ExtractionParams& params, BatchReport& report,
                                           int workers) {
  report.label = label.name;
  report.template_id = template_id;
  report.kept = kept.size();

  std::vector<std::optional<ForegroundAsset>> slots(kept.size());
  std::vector<std::optional<ExtractionFailure>> errors(kept.size());
  parallel_for(kept.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = make_asset(kept[i], label, template_id, prompt,
                            selection::composite_score(kept[i], policy), params);
    } catch (const Error& e) {
      errors[i] = ExtractionFailure{asset_id(label, template_id, kept[i].seed, kept[i].index),
                                    e.code(), e.what()};
    }
  });

  std::vector<ForegroundAsset> assets;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (slots[i]) assets.push_back(std::move(*slots[i]));
    if (errors[i]) report.failures.push_back(std::move(*errors[i]));
  }
  report.extracted = assets.size();
  if (!kept.empty() && assets.empty()) {
    fail(Errc::kPipelineFailure, "every candidate of batch " + label.name + "/" +
                                     std::to_string(template_id) + " failed extraction");
  }
  return assets;
}

std::size_t PoolResult::generated() const {
  std::size_t total = 0;
  for (const BatchReport& b : batches) total += b.generated;
  return total;
}

std::uint64_t foreground_batch_seed(std::uint64_t seed, const prompting::ClassLabel& label,
                                    int template_id) {
  return derive_seed(seed, {hash_string("foreground"), hash_string(label.name),
                            static_cast<std::uint64_t>(template_id)});
}

PoolResult build_foreground_pool(std::span<const prompting::ClassLabel> labels,
                                 const prompting::TemplateSet& templates,
                                 gateway::Gateway& gateway, const PoolOptions& options) {
  require(!labels.empty(), Errc::kInvalidArgument, "no labels to build foregrounds for");
  require(options.per_template_n >= 1, Errc::kInvalidArgument, "per_template_n must be >= 1");
  prompting::validate_labels(labels);
  options.policy.validate();
  options.extraction.validate();

  PoolResult result;
  for (const prompting::ClassLabel& label : labels) {
    for (const prompting::PromptTemplate& t : templates.foreground()) {
      const std::string prompt = templates.verbalize_foreground(label, t.id);
      BatchReport report;
      report.generated = static_cast<std::size_t>(options.per_template_n);
      std::vector<gateway::Candidate> candidates = gateway::generate_candidates(
          gateway, prompt, options.per_template_n, foreground_batch_seed(options.seed, label, t.id),
          options.width, options.height);
      std::vector<gateway::ScoredImage> scored = selection::score_batch(
          std::move(candidates), prompt, labels, gateway, options.policy, label.name,
          options.workers);
      const std::vector<gateway::ScoredImage> kept =
          selection::rank_and_select(std::move(scored), options.policy);
      for (ForegroundAsset& a : extract_batch(kept, label, t.id, prompt, options.policy,
                                              options.extraction, report, options.workers)) {
        result.assets.push_back(std::move(a));
      }
      result.batches.push_back(std::move(report));
    }
  }
  return result;
}

nlohmann::ordered_json provenance_to_json(const ForegroundAsset& asset) {
  const Provenance& p = asset.provenance;
  nlohmann::ordered_json sims = nlohmann::ordered_json::object();
  for (const auto& [name, v] : p.class_similarities) sims[name] = v;
  return {
      {"id", asset.id},
      {"label", {{"name", asset.label.name}, {"id", asset.label.id}}},
      {"prompt", p.prompt},
      {"seed", p.seed},
      {"index", p.index},
      {"template_id", p.template_id},
      {"scores", {{"faithfulness", p.faithfulness}, {"composite", p.composite},
                  {"class_similarities", sims}}},
      {"source", {{"width", p.source_width}, {"height", p.source_height}}},
      {"crop", {p.crop.x, p.crop.y, p.crop.w, p.crop.h}},
  };
}

std::filesystem::path asset_path(const std::filesystem::path& root, const ForegroundAsset& asset) {
  return root / "fg" / dir_name(asset.label.name) / std::to_string(asset.provenance.template_id) /
         (std::to_string(asset.provenance.seed) + "_" + std::to_string(asset.provenance.index) +
          ".png");
}

void save_asset(const std::filesystem::path& root, const ForegroundAsset& asset) {
  const std::filesystem::path png = asset_path(root, asset);
  std::filesystem::create_directories(png.parent_path());
  write_png(png, asset.image);
  std::filesystem::path record = png;
  record.replace_extension(".json");
  write_text_atomic(record, provenance_to_json(asset).dump(2) + "\n");
}

ForegroundAsset load_asset(const std::filesystem::path& png_path) {
  std::filesystem::path record_path = png_path;
  record_path.replace_extension(".json");
  nlohmann::json record;
  try {
    const std::vector<std::uint8_t> bytes = read_file(record_path);
    record = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kIoFailure, "bad asset record " + record_path.string() + ": " + e.what());
  }

  ForegroundAsset asset;
  try {
    asset.id = record.at("id").get<std::string>();
    asset.label = prompting::ClassLabel{record.at("label").at("name").get<std::string>(),
                                        record.at("label").at("id").get<int>()};
    Provenance& p = asset.provenance;
    p.prompt = record.at("prompt").get<std::string>();
    p.seed = record.at("seed").get<std::uint64_t>();
    p.index = record.at("index").get<int>();
    p.template_id = record.at("template_id").get<int>();
    const auto& scores = record.at("scores");
    p.faithfulness = scores.at("faithfulness").get<double>();
    p.composite = scores.at("composite").get<double>();
    p.class_similarities = scores.at("class_similarities").get<std::map<std::string, double>>();
    p.source_width = record.at("source").at("width").get<int>();
    p.source_height = record.at("source").at("height").get<int>();
    const auto& crop = record.at("crop");
    p.crop = BBox{crop.at(0).get<int>(), crop.at(1).get<int>(), crop.at(2).get<int>(),
                  crop.at(3).get<int>()};
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kIoFailure, "bad asset record " + record_path.string() + ": " + e.what());
  }

  asset.image = to_rgba(read_image(png_path));
  asset.mask = BinaryMask(asset.image.width, asset.image.height);
  for (int y = 0; y < asset.image.height; ++y) {
    for (int x = 0; x < asset.image.width; ++x) asset.mask.set(x, y, asset.image.at(x, y)[3] >= 128);
  }
  require(asset.mask.popcount() > 0, Errc::kEmptyMask, "asset " + png_path.string() + " is empty");
  return asset;
}

std::vector<ForegroundAsset> load_assets(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> paths;
  const std::filesystem::path fg = root / "fg";
  if (std::filesystem::exists(fg)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(fg)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        paths.push_back(entry.path());
      }
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ForegroundAsset> assets;
  assets.reserve(paths.size());
  for (const auto& p : paths) assets.push_back(load_asset(p));
  return assets;
}

}  // namespace synthfab::foreground
