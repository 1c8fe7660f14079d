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
#include "synthfab/mock_backend.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "synthfab/error.hpp"
#include "synthfab/rng.hpp"

namespace synthfab::gateway {
namespace {

constexpr double kPi = 3.14159265358979323846;

const std::set<std::string>& mock_stopwords() {
  static const std::set<std::string> words = {
      "a",     "an",         "the",   "of",   "in",    "on",      "at",   "to",
      "for",   "with",       "without", "and", "or",   "is",      "are",  "photo",
      "photograph", "picture", "image", "real", "realistic", "color", "colored"};
  return words;
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void hsv_to_rgb(double h, double s, double v, std::uint8_t out[3]) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  out[0] = clamp_u8((r + m) * 255.0);
  out[1] = clamp_u8((g + m) * 255.0);
  out[2] = clamp_u8((b + m) * 255.0);
}

// Coarse description used when an image carries no recorded prompt.
std::string describe_colours(const Image& image) {
  if (image.empty() || image.channels < 3) return "an empty scene";
  double sum[3] = {0, 0, 0};
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) sum[c] += image.pixels[i * image.channels + c];
  }
  for (double& s : sum) s /= static_cast<double>(n);
  const double brightness = (sum[0] + sum[1] + sum[2]) / 3.0;
  const char* tone = brightness < 85 ? "dark " : (brightness > 170 ? "bright " : "");
  const double spread = *std::max_element(sum, sum + 3) - *std::min_element(sum, sum + 3);
  const char* hue = "grey";
  if (spread > 20) {
    const int dominant = static_cast<int>(std::max_element(sum, sum + 3) - sum);
    hue = dominant == 0 ? "red" : (dominant == 1 ? "green" : "blue");
  }
  return std::string("a ") + tone + hue + " scene";
}

}  // namespace

bool MockShape::contains(double x, double y) const {
  if (kind == Kind::kEllipse) {
    const double dx = x - center.x;
    const double dy = y - center.y;
    const double u = dx * std::cos(angle) + dy * std::sin(angle);
    const double v = -dx * std::sin(angle) + dy * std::cos(angle);
    return (u * u) / (radius_x * radius_x) + (v * v) / (radius_y * radius_y) <= 1.0;
  }
  const std::size_t k = vertices.size();
  for (std::size_t i = 0; i < k; ++i) {
    const Point& a = vertices[i];
    const Point& b = vertices[(i + 1) % k];
    if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) < 0.0) return false;
  }
  return true;
}

BinaryMask MockShape::rasterize(int width, int height) const {
  BinaryMask mask(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (contains(x + 0.5, y + 0.5)) mask.set(x, y);
    }
  }
  return mask;
}

MockScene describe_mock_image(const prompting::TemplateSet& templates, std::string_view prompt,
                              std::uint64_t seed, int index, int width, int height) {
  MockScene scene;
  scene.foreground_style = templates.is_foreground_prompt(prompt);
  Rng rng(derive_seed(hash_string(prompt),
                      {seed, static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(width),
                       static_cast<std::uint64_t>(height)}));
  scene.seed = rng.next();
  if (!scene.foreground_style) {
    for (auto& c : scene.field) c = static_cast<std::uint8_t>(rng.between(40, 210));
    return scene;
  }
  for (auto& c : scene.field) c = static_cast<std::uint8_t>(rng.between(235, 250));
  hsv_to_rgb(rng.uniform(), rng.uniform(0.75, 1.0), rng.uniform(0.5, 0.9), scene.shape_color);

  const double side = std::min(width, height);
  MockShape& shape = scene.shape;
  shape.center = {width * rng.uniform(0.42, 0.58), height * rng.uniform(0.42, 0.58)};
  shape.radius_x = side * rng.uniform(0.15, 0.32);
  shape.radius_y = side * rng.uniform(0.15, 0.32);
  shape.angle = rng.uniform(0.0, kPi);
  if (rng.bernoulli(0.5)) {
    shape.kind = MockShape::Kind::kEllipse;
  } else {
    // Points on an ellipse taken in angular order always form a convex polygon.
    shape.kind = MockShape::Kind::kPolygon;
    const int k = static_cast<int>(rng.between(5, 8));
    for (int i = 0; i < k; ++i) {
      const double t = 2.0 * kPi * (i + rng.uniform(-0.3, 0.3)) / k;
      const double ex = shape.radius_x * std::cos(t);
      const double ey = shape.radius_y * std::sin(t);
      shape.vertices.push_back(
          {shape.center.x + ex * std::cos(shape.angle) - ey * std::sin(shape.angle),
           shape.center.y + ex * std::sin(shape.angle) + ey * std::cos(shape.angle)});
    }
  }
  return scene;
}

Image render_mock_image(const MockScene& scene, std::string_view prompt, int width, int height) {
  Image image(width, height, 4, 255);
  image.text[kMockPromptKey] = std::string(prompt);
  Rng rng(scene.seed);
  if (scene.foreground_style) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        std::uint8_t* px = image.at(x, y);
        const bool inside = scene.shape.contains(x + 0.5, y + 0.5);
        const double shade = inside ? 10.0 * std::sin(x * 0.07) * std::cos(y * 0.05) : 0.0;
        for (int c = 0; c < 3; ++c) {
          const double base = inside ? scene.shape_color[c] + shade : scene.field[c];
          px[c] = clamp_u8(base + static_cast<double>(rng.between(-2, 2)));
        }
      }
    }
    return image;
  }
  // Low-frequency background: bilinear blend of four corner colours plus one
  // gentle plane wave.
  std::array<std::array<double, 3>, 4> corners{};
  for (auto& corner : corners) {
    for (int c = 0; c < 3; ++c) corner[c] = scene.field[c] + rng.uniform(-45.0, 45.0);
  }
  const double fx = rng.uniform(0.5, 2.0);
  const double fy = rng.uniform(0.5, 2.0);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double amplitude = rng.uniform(5.0, 20.0);
  for (int y = 0; y < height; ++y) {
    const double v = (y + 0.5) / height;
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width;
      const double wave = amplitude * std::sin(2.0 * kPi * (fx * u + fy * v) + phase);
      std::uint8_t* px = image.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = corners[0][c] * (1 - u) + corners[1][c] * u;
        const double bottom = corners[2][c] * (1 - u) + corners[3][c] * u;
        px[c] = clamp_u8(top * (1 - v) + bottom * v + wave +
                         static_cast<double>(rng.between(-2, 2)));
      }
    }
  }
  return image;
}

std::set<std::string> mock_content_tokens(std::string_view text) {
  std::set<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !mock_stopwords().contains(current)) tokens.insert(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const std::string& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Image> MockGateway::generate_images(const GenerationRequest& request) {
  request.validate();
  std::vector<Image> images;
  images.reserve(static_cast<std::size_t>(request.n));
  for (int i = 0; i < request.n; ++i) {
    const MockScene scene = describe_mock_image(templates_, request.prompt, request.seed, i,
                                                request.width, request.height);
    images.push_back(render_mock_image(scene, request.prompt, request.width, request.height));
  }
  return images;
}

std::vector<double> MockGateway::score_image_text(const Image& image,
                                                  std::span<const std::string> texts) {
  require(!texts.empty(), Errc::kInvalidArgument, "score_image_text needs at least one text");
  std::vector<double> scores;
  scores.reserve(texts.size());
  const auto it = image.text.find(kMockPromptKey);
  if (it == image.text.end()) return std::vector<double>(texts.size(), 0.0);
  const std::set<std::string> reference = mock_content_tokens(it->second);
  for (const std::string& text : texts) scores.push_back(jaccard(reference, mock_content_tokens(text)));
  return scores;
}

std::vector<std::string> MockGateway::caption_image(const Image& image, int n) {
  require(n >= 1, Errc::kInvalidArgument, "caption count must be >= 1");
  require(n <= kMockCaptionVariants, Errc::kInvalidArgument,
          "mock captioner produces at most " + std::to_string(kMockCaptionVariants) +
              " distinct captions");
  static const std::array<const char*, kMockCaptionVariants> prefixes = {
      "",           "a picture showing ", "an image of ",      "a view of ",
      "there is ",  "a photo of ",        "a snapshot of ",    "a close up of "};
  const auto it = image.text.find(kMockPromptKey);
  const std::string content = prompting::to_lower(
      prompting::normalize_whitespace(it != image.text.end() ? it->second : describe_colours(image)));
  std::vector<std::string> captions;
  for (int k = 0; k < n; ++k) captions.push_back(prefixes[k] + content);
  return captions;
}

}  // namespace synthfab::gateway
