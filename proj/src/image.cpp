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
#include "synthfab/image.hpp"

#include <algorithm>
#include <numeric>

#include "synthfab/error.hpp"

namespace synthfab {

Image to_rgb(const Image& image) {
  if (image.channels == 3) return image;
  require(image.channels == 4, Errc::kInvalidArgument, "to_rgb expects 3 or 4 channels");
  Image out(image.width, image.height, 3);
  out.text = image.text;
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(image.pixels.data() + i * 4, 3, out.pixels.data() + i * 3);
  }
  return out;
}

Image to_rgba(const Image& image) {
  if (image.channels == 4) return image;
  require(image.channels == 3, Errc::kInvalidArgument, "to_rgba expects 3 or 4 channels");
  Image out(image.width, image.height, 4);
  out.text = image.text;
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(image.pixels.data() + i * 3, 3, out.pixels.data() + i * 4);
    out.pixels[i * 4 + 3] = 255;
  }
  return out;
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  require(a.width == b.width && a.height == b.height, Errc::kInvalidArgument,
          "iou: mask dimensions differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] & b.bits[i]);
    uni += (a.bits[i] | b.bits[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace synthfab
