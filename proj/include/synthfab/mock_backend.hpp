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

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthfab/gateway.hpp"
#include "synthfab/prompting.hpp"

namespace synthfab::gateway {

// PNG text key under which mock images record the prompt they depict.
inline constexpr const char* kMockPromptKey = "mockprompt";

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// The single object drawn into a foreground-style mock image. Pixel (x, y)
// belongs to the shape when its centre (x + 0.5, y + 0.5) is inside.
struct MockShape {
  enum class Kind { kEllipse, kPolygon };
  Kind kind = Kind::kEllipse;
  Point center;
  double radius_x = 0.0;
  double radius_y = 0.0;
  double angle = 0.0;
  std::vector<Point> vertices;  // convex, counter-clockwise in image coordinates

  bool contains(double x, double y) const;
  BinaryMask rasterize(int width, int height) const;
};

struct MockScene {
  bool foreground_style = false;
  std::uint8_t field[3] = {0, 0, 0};
  std::uint8_t shape_color[3] = {0, 0, 0};
  MockShape shape;
  std::uint64_t seed = 0;  // pixel-noise stream
};

// Deterministic description of image `index` for (prompt, seed, size).
MockScene describe_mock_image(const prompting::TemplateSet& templates, std::string_view prompt,
                              std::uint64_t seed, int index, int width, int height);
Image render_mock_image(const MockScene& scene, std::string_view prompt, int width, int height);

// Lowercased alphanumeric tokens with template boilerplate removed; the mock
// scorer compares these sets.
std::set<std::string> mock_content_tokens(std::string_view text);
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

inline constexpr int kMockCaptionVariants = 8;

class MockGateway final : public Gateway {
 public:
  explicit MockGateway(const prompting::TemplateSet& templates) : templates_(templates) {}

  std::vector<Image> generate_images(const GenerationRequest& request) override;
  // Jaccard similarity of content tokens between each text and the image's
  // recorded prompt; images without a recorded prompt score 0.
  std::vector<double> score_image_text(const Image& image,
                                       std::span<const std::string> texts) override;
  // Up to kMockCaptionVariants distinct captions built from the recorded
  // prompt, or from a coarse colour description when there is none.
  std::vector<std::string> caption_image(const Image& image, int n) override;

 private:
  prompting::TemplateSet templates_;
};

}  // namespace synthfab::gateway
