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
#include "synthfab/compositor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

#include "synthfab/error.hpp"
#include "synthfab/parallel.hpp"

namespace synthfab::compositor {
namespace {

bool boxes_overlap(const BBox& a, const BBox& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

// Copies the colour of the nearest mask pixel (BFS order) into every
// non-mask pixel so blurred edges blend towards the object, not the old field.
void bleed_colours(Image& rgb, const BinaryMask& mask) {
  std::vector<std::uint8_t> done(mask.bits);
  std::vector<std::size_t> queue;
  queue.reserve(mask.bits.size());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i]) queue.push_back(i);
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t p = queue[head];
    const int x = static_cast<int>(p % mask.width);
    const int y = static_cast<int>(p / mask.width);
    const int nx[4] = {x + 1, x - 1, x, x};
    const int ny[4] = {y, y, y + 1, y - 1};
    for (int k = 0; k < 4; ++k) {
      if (!mask.contains(nx[k], ny[k])) continue;
      const std::size_t q = static_cast<std::size_t>(ny[k]) * mask.width + nx[k];
      if (done[q]) continue;
      done[q] = 1;
      std::copy_n(rgb.at(x, y), 3, rgb.at(nx[k], ny[k]));
      queue.push_back(q);
    }
  }
}

}  // namespace

void AugmentParams::validate() const {
  require(rotation_range >= 0.0 && rotation_range <= 180.0, Errc::kInvalidArgument,
          "rotation_range must be in [0, 180]");
  require(scale_min > 0.0 && scale_min < scale_max && scale_max <= 1.0, Errc::kInvalidArgument,
          "need 0 < scale_min < scale_max <= 1");
  require(flip_prob >= 0.0 && flip_prob <= 1.0, Errc::kInvalidArgument,
          "flip_prob must be in [0, 1]");
  require(blur_sigma >= 0.0 && std::isfinite(blur_sigma), Errc::kInvalidArgument,
          "blur_sigma must be >= 0");
  require(pastes_per_bg >= 1, Errc::kInvalidArgument, "pastes_per_bg must be >= 1");
  require(min_visible_fraction > 0.0 && min_visible_fraction <= 1.0, Errc::kInvalidArgument,
          "min_visible_fraction must be in (0, 1]");
  require(max_place_attempts >= 1, Errc::kInvalidArgument, "max_place_attempts must be >= 1");
}

Transform sample_transform(Rng& rng, const AugmentParams& params) {
  Transform t;
  t.angle_degrees = rng.uniform(-params.rotation_range, params.rotation_range);
  t.scale_fraction = rng.uniform(params.scale_min, params.scale_max);
  t.flip = rng.bernoulli(params.flip_prob);
  return t;
}

Cutout apply_transform(const foreground::ForegroundAsset& asset, const Transform& transform,
                       int bg_short_side) {
  const BinaryMask& mask = asset.mask;
  const Image src = to_rgba(asset.image);
  require(src.width == mask.width && src.height == mask.height, Errc::kInvalidArgument,
          "asset image and mask sizes differ");
  require(transform.scale_fraction > 0.0 && bg_short_side > 0, Errc::kDegenerateTransform,
          "non-positive scale");

  double cx = 0.0, cy = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.get(x, y)) continue;
      cx += x + 0.5;
      cy += y + 0.5;
      ++count;
    }
  }
  require(count > 0, Errc::kDegenerateTransform, "asset mask is empty");
  cx /= static_cast<double>(count);
  cy /= static_cast<double>(count);

  const double theta = transform.angle_degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);

  // Extent of the rotated mask, measured on pixel centres plus one pixel.
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.get(x, y)) continue;
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const double rx = cs * dx - sn * dy;
      const double ry = sn * dx + cs * dy;
      min_x = std::min(min_x, rx);
      max_x = std::max(max_x, rx);
      min_y = std::min(min_y, ry);
      max_y = std::max(max_y, ry);
    }
  }
  const double longer = std::max(max_x - min_x, max_y - min_y) + 1.0;
  const double k = transform.scale_fraction * bg_short_side / longer;

  const int ox = static_cast<int>(std::floor(k * (min_x - 0.5))) - 1;
  const int oy = static_cast<int>(std::floor(k * (min_y - 0.5))) - 1;
  const int out_w = static_cast<int>(std::ceil(k * (max_x + 0.5))) - ox + 1;
  const int out_h = static_cast<int>(std::ceil(k * (max_y + 0.5))) - oy + 1;
  require(out_w > 0 && out_h > 0 && out_w <= 16384 && out_h <= 16384,
          Errc::kDegenerateTransform, "transformed size out of range");

  Image big(out_w, out_h, 4);
  BinaryMask big_mask(out_w, out_h);
  for (int v = 0; v < out_h; ++v) {
    for (int u = 0; u < out_w; ++u) {
      const double qx = (u + 0.5 + ox) / k;
      const double qy = (v + 0.5 + oy) / k;
      const double px = cs * qx + sn * qy + cx;
      const double py = -sn * qx + cs * qy + cy;
      const int mx = static_cast<int>(std::floor(px));
      const int my = static_cast<int>(std::floor(py));
      const int du = transform.flip ? out_w - 1 - u : u;
      if (!mask.contains(mx, my) || !mask.get(mx, my)) continue;
      big_mask.set(du, v);

      const double sx = std::clamp(px - 0.5, 0.0, src.width - 1.0);
      const double sy = std::clamp(py - 0.5, 0.0, src.height - 1.0);
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const int y1 = std::min(y0 + 1, src.height - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      std::uint8_t* out = big.at(du, v);
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(x0, y0)[c] * (1 - fx) + src.at(x1, y0)[c] * fx;
        const double bottom = src.at(x0, y1)[c] * (1 - fx) + src.at(x1, y1)[c] * fx;
        out[c] = static_cast<std::uint8_t>(std::lround(top * (1 - fy) + bottom * fy));
      }
      out[3] = 255;
    }
  }

  // Nearest-neighbour sampling can cut thin tips off a shape; keep the
  // body so the cutout stays one 4-connected piece like its source.
  big_mask = foreground::largest_component(big_mask);
  const std::size_t area = big_mask.popcount();
  require(area >= 16, Errc::kDegenerateTransform,
          "transformed mask has " + std::to_string(area) + " pixels");
  const BBox box = foreground::mask_to_bbox(big_mask);
  Cutout cut;
  cut.source_id = asset.id;
  cut.label = asset.label;
  cut.image = Image(box.w, box.h, 4);
  cut.mask = BinaryMask(box.w, box.h);
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      const bool in = big_mask.get(box.x + x, box.y + y);
      std::copy_n(big.at(box.x + x, box.y + y), 3, cut.image.at(x, y));
      cut.image.at(x, y)[3] = in ? 255 : 0;
      cut.mask.set(x, y, in);
    }
  }
  return cut;
}

Cutout augment_foreground(const foreground::ForegroundAsset& asset, Rng& rng,
                          const AugmentParams& params, int bg_short_side) {
  return apply_transform(asset, sample_transform(rng, params), bg_short_side);
}

std::vector<double> gaussian_kernel(double sigma) {
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::kInvalidArgument, "sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  }
  const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= total;
  return taps;
}

BinaryMask paste(Image& canvas, const Cutout& cutout, int x, int y, double blur_sigma) {
  require(canvas.channels >= 3, Errc::kInvalidArgument, "canvas needs colour channels");
  require(cutout.mask.width == cutout.image.width && cutout.mask.height == cutout.image.height,
          Errc::kInvalidArgument, "cutout image and mask sizes differ");
  require(x >= 0 && y >= 0 && x + cutout.mask.width <= canvas.width &&
              y + cutout.mask.height <= canvas.height,
          Errc::kOutOfBounds, "cutout does not fit inside the canvas");

  const std::vector<double> kernel = gaussian_kernel(blur_sigma);
  const int r = static_cast<int>(kernel.size() / 2);
  const int pw = cutout.mask.width + 2 * r;
  const int ph = cutout.mask.height + 2 * r;

  BinaryMask padded(pw, ph);
  Image colour(pw, ph, 3);
  for (int v = 0; v < cutout.mask.height; ++v) {
    for (int u = 0; u < cutout.mask.width; ++u) {
      padded.set(u + r, v + r, cutout.mask.get(u, v));
      std::copy_n(cutout.image.at(u, v), 3, colour.at(u + r, v + r));
    }
  }
  bleed_colours(colour, padded);

  // Separable blur of the binary mask: rows, then columns.
  std::vector<double> rows(static_cast<std::size_t>(pw) * ph, 0.0);
  for (int v = 0; v < ph; ++v) {
    for (int u = 0; u < pw; ++u) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) {
        const int su = u + t;
        if (su >= 0 && su < pw && padded.get(su, v)) acc += kernel[t + r];
      }
      rows[static_cast<std::size_t>(v) * pw + u] = acc;
    }
  }

  BinaryMask placed(canvas.width, canvas.height);
  for (int v = 0; v < ph; ++v) {
    const int cy = y - r + v;
    if (cy < 0 || cy >= canvas.height) continue;
    for (int u = 0; u < pw; ++u) {
      const int cx = x - r + u;
      if (cx < 0 || cx >= canvas.width) continue;
      double alpha = 0.0;
      for (int t = -r; t <= r; ++t) {
        const int sv = v + t;
        if (sv >= 0 && sv < ph) alpha += kernel[t + r] * rows[static_cast<std::size_t>(sv) * pw + u];
      }
      if (padded.get(u, v)) placed.set(cx, cy);
      if (alpha <= 0.0) continue;
      alpha = std::min(alpha, 1.0);
      std::uint8_t* bg = canvas.at(cx, cy);
      const std::uint8_t* fg = colour.at(u, v);
      for (int c = 0; c < 3; ++c) {
        bg[c] = static_cast<std::uint8_t>(std::lround(alpha * fg[c] + (1.0 - alpha) * bg[c]));
      }
    }
  }
  return placed;
}

void occlude(std::vector<Instance>& instances, const BinaryMask& placed) {
  const std::size_t placed_area = placed.popcount();
  if (placed_area == 0) return;
  const BBox placed_box = foreground::mask_to_bbox(placed);
  for (Instance& inst : instances) {
    if (inst.bbox.w == 0 || !boxes_overlap(inst.bbox, placed_box)) continue;
    std::size_t removed = 0;
    for (int yy = placed_box.y; yy < placed_box.y + placed_box.h; ++yy) {
      for (int xx = placed_box.x; xx < placed_box.x + placed_box.w; ++xx) {
        if (placed.get(xx, yy) && inst.mask.get(xx, yy)) {
          inst.mask.set(xx, yy, false);
          ++removed;
        }
      }
    }
    if (removed == 0) continue;
    const std::size_t left = inst.mask.popcount();
    inst.visible_fraction =
        inst.pasted_area == 0 ? 0.0
                              : static_cast<double>(left) / static_cast<double>(inst.pasted_area);
    inst.bbox = left == 0 ? BBox{} : foreground::mask_to_bbox(inst.mask);
  }
}

CompositeSample compose_sample(const BackgroundAsset& background,
                               std::span<const foreground::ForegroundAsset* const> assets,
                               Rng& rng, const AugmentParams& params) {
  params.validate();
  require(!background.image.empty(), Errc::kNoBackground, "background image is empty");
  require(static_cast<int>(assets.size()) == params.pastes_per_bg, Errc::kInvalidArgument,
          "expected " + std::to_string(params.pastes_per_bg) + " assets, got " +
              std::to_string(assets.size()));

  CompositeSample sample;
  sample.background_id = background.id;
  sample.image = to_rgb(background.image);
  const int w = sample.image.width;
  const int h = sample.image.height;
  for (const Instance& inst : background.instances) {
    require(inst.mask.width == w && inst.mask.height == h, Errc::kInvalidArgument,
            "background instance mask size differs from the image");
    sample.instances.push_back(inst);
  }

  const int short_side = std::min(w, h);
  for (const foreground::ForegroundAsset* asset : assets) {
    require(asset != nullptr, Errc::kInvalidArgument, "null asset");
    std::optional<Cutout> cut;
    for (int attempt = 0; attempt < params.max_place_attempts && !cut; ++attempt) {
      try {
        Cutout c = augment_foreground(*asset, rng, params, short_side);
        if (c.mask.width <= w && c.mask.height <= h) cut = std::move(c);
      } catch (const Error& e) {
        if (e.code() != Errc::kDegenerateTransform) throw;
      }
    }
    if (!cut) {
      ++sample.skipped;
      continue;
    }
    const int x = static_cast<int>(rng.between(0, w - cut->mask.width));
    const int y = static_cast<int>(rng.between(0, h - cut->mask.height));
    BinaryMask placed = paste(sample.image, *cut, x, y, params.blur_sigma);
    occlude(sample.instances, placed);

    Instance inst;
    inst.label = asset->label;
    inst.pasted_area = placed.popcount();
    inst.bbox = BBox{x, y, cut->mask.width, cut->mask.height};
    inst.mask = std::move(placed);
    inst.visible_fraction = 1.0;
    inst.source_asset = asset->id;
    sample.instances.push_back(std::move(inst));
    sample.asset_ids.push_back(asset->id);
  }

  std::erase_if(sample.instances, [&](const Instance& inst) {
    return inst.bbox.w == 0 || inst.visible_fraction < params.min_visible_fraction;
  });
  return sample;
}

std::vector<SamplePlan> plan_dataset(std::size_t foreground_count, std::size_t background_count,
                                     std::size_t target_size, std::uint64_t seed,
                                     int pastes_per_bg) {
  require(foreground_count > 0, Errc::kEmptyPool, "foreground pool is empty");
  require(background_count > 0, Errc::kEmptyPool, "background pool is empty");
  require(target_size >= 1, Errc::kInvalidArgument, "target_size must be >= 1");
  require(pastes_per_bg >= 1, Errc::kInvalidArgument, "pastes_per_bg must be >= 1");

  Rng rng(derive_seed(seed, {hash_string("plan")}));
  std::vector<std::size_t> cycle(foreground_count);
  std::iota(cycle.begin(), cycle.end(), std::size_t{0});
  rng.shuffle(cycle);
  std::size_t cursor = 0;

  std::vector<SamplePlan> plans(target_size);
  for (std::size_t i = 0; i < target_size; ++i) {
    SamplePlan& plan = plans[i];
    plan.background = static_cast<std::size_t>(rng.below(background_count));
    for (int p = 0; p < pastes_per_bg; ++p) {
      if (cursor == cycle.size()) {
        rng.shuffle(cycle);
        cursor = 0;
      }
      plan.foregrounds.push_back(cycle[cursor++]);
    }
    plan.seed = derive_seed(seed, {i});
  }
  return plans;
}

void build_dataset(std::span<const foreground::ForegroundAsset> foregrounds,
                   std::span<const BackgroundAsset> backgrounds, std::size_t target_size,
                   std::uint64_t seed, const AugmentParams& params, int workers,
                   const SampleSink& sink) {
  params.validate();
  const std::vector<SamplePlan> plans = plan_dataset(foregrounds.size(), backgrounds.size(),
                                                     target_size, seed, params.pastes_per_bg);
  const std::size_t chunk = std::max<std::size_t>(16, static_cast<std::size_t>(workers) * 4);
  for (std::size_t begin = 0; begin < plans.size(); begin += chunk) {
    const std::size_t end = std::min(plans.size(), begin + chunk);
    std::vector<CompositeSample> slots(end - begin);
    parallel_for(end - begin, workers, [&](std::size_t k) {
      const SamplePlan& plan = plans[begin + k];
      std::vector<const foreground::ForegroundAsset*> chosen;
      for (std::size_t f : plan.foregrounds) chosen.push_back(&foregrounds[f]);
      Rng rng(plan.seed);
      slots[k] = compose_sample(backgrounds[plan.background], chosen, rng, params);
      slots[k].seed = plan.seed;
    });
    for (std::size_t k = 0; k < slots.size(); ++k) sink(begin + k, std::move(slots[k]));
  }
}

std::vector<CompositeSample> build_dataset(std::span<const foreground::ForegroundAsset> foregrounds,
                                           std::span<const BackgroundAsset> backgrounds,
                                           std::size_t target_size, std::uint64_t seed,
                                           const AugmentParams& params, int workers) {
  std::vector<CompositeSample> out;
  out.reserve(target_size);
  build_dataset(foregrounds, backgrounds, target_size, seed, params, workers,
                [&](std::size_t, CompositeSample&& s) { out.push_back(std::move(s)); });
  return out;
}

}  // namespace synthfab::compositor
