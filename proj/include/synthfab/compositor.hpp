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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "synthfab/foreground_lab.hpp"
#include "synthfab/image.hpp"
#include "synthfab/prompting.hpp"
#include "synthfab/rng.hpp"

namespace synthfab::compositor {

struct AugmentParams {
  double rotation_range = 30.0;  // degrees, theta ~ U(-range, range)
  // Object's longer side as a fraction of the background's shorter side.
  double scale_min = 0.15;
  double scale_max = 0.50;
  double flip_prob = 0.5;
  double blur_sigma = 2.0;
  int pastes_per_bg = 4;
  double min_visible_fraction = 0.25;
  int max_place_attempts = 10;

  void validate() const;
};

struct Transform {
  double angle_degrees = 0.0;
  double scale_fraction = 1.0;
  bool flip = false;
};

Transform sample_transform(Rng& rng, const AugmentParams& params);

// A transformed foreground ready for pasting: RGBA with alpha = mask, tightly
// cropped to the mask.
struct Cutout {
  Image image;
  BinaryMask mask;
  std::string source_id;
  prompting::ClassLabel label;
};

// Rotates about the mask centroid, scales so the rotated mask's longer side
// is scale_fraction * bg_short_side, then mirrors horizontally if asked. Mask
// resampling is nearest-neighbour, colour is bilinear; only the largest
// 4-connected piece of the resampled mask is kept. Throws
// kDegenerateTransform when fewer than 16 mask pixels survive.
Cutout apply_transform(const foreground::ForegroundAsset& asset, const Transform& transform,
                       int bg_short_side);

Cutout augment_foreground(const foreground::ForegroundAsset& asset, Rng& rng,
                          const AugmentParams& params, int bg_short_side);

// Normalised 1-D Gaussian taps for offsets -r..r with r = ceil(2 * sigma);
// {1} when sigma is 0.
std::vector<double> gaussian_kernel(double sigma);

// Blends `cutout` into `canvas` (RGB) with its top-left corner at (x, y).
// alpha is the binary mask convolved with the separable Gaussian; pixels
// beyond the kernel support are left untouched. Returns the canvas-sized
// binary mask of the pasted object. Throws kOutOfBounds unless the cutout
// lies entirely inside the canvas.
BinaryMask paste(Image& canvas, const Cutout& cutout, int x, int y, double blur_sigma);

struct Instance {
  prompting::ClassLabel label;
  BinaryMask mask;  // canvas-sized, after occlusion
  BBox bbox;
  double visible_fraction = 1.0;
  std::string source_asset;
  std::size_t pasted_area = 0;  // popcount before occlusion
};

// A background image, optionally with objects already labelled in it (real
// images reused as backgrounds keep their annotations).
struct BackgroundAsset {
  std::string id;
  Image image;
  std::vector<Instance> instances;
};

struct CompositeSample {
  Image image;
  std::vector<Instance> instances;
  std::string background_id;
  std::vector<std::string> asset_ids;  // in paste order, skipped ones excluded
  std::uint64_t seed = 0;
  int skipped = 0;
};

// Removes `placed` from every instance mask, refreshing visible fractions and
// boxes. Instances left with no pixels get visible_fraction 0.
void occlude(std::vector<Instance>& instances, const BinaryMask& placed);

// Pastes the assets in order at uniformly drawn positions that keep each
// cutout inside the canvas. A cutout that cannot fit is re-augmented up to
// max_place_attempts times and skipped after that. Later pastes occlude
// earlier instances; instances whose visible fraction ends below
// min_visible_fraction are dropped from the labels.
CompositeSample compose_sample(const BackgroundAsset& background,
                               std::span<const foreground::ForegroundAsset* const> assets,
                               Rng& rng, const AugmentParams& params);

struct SamplePlan {
  std::size_t background = 0;
  std::vector<std::size_t> foregrounds;
  std::uint64_t seed = 0;
};

// Backgrounds uniform with replacement; foregrounds drawn from a shuffled
// cycle that is reshuffled once exhausted. Sample i composes with
// Rng(derive_seed(seed, {i})).
std::vector<SamplePlan> plan_dataset(std::size_t foreground_count, std::size_t background_count,
                                     std::size_t target_size, std::uint64_t seed,
                                     int pastes_per_bg);

using SampleSink = std::function<void(std::size_t, CompositeSample&&)>;

// Composes target_size samples and hands them to `sink` in index order.
// Output does not depend on `workers`. Throws kEmptyPool on an empty pool.
void build_dataset(std::span<const foreground::ForegroundAsset> foregrounds,
                   std::span<const BackgroundAsset> backgrounds, std::size_t target_size,
                   std::uint64_t seed, const AugmentParams& params, int workers,
                   const SampleSink& sink);

std::vector<CompositeSample> build_dataset(std::span<const foreground::ForegroundAsset> foregrounds,
                                           std::span<const BackgroundAsset> backgrounds,
                                           std::size_t target_size, std::uint64_t seed,
                                           const AugmentParams& params, int workers = 1);

}  // namespace synthfab::compositor
