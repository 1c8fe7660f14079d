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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthfab/image.hpp"

namespace synthfab {

// PNG output is deterministic: fixed zlib level and filter, no timestamp
// chunk, text chunks written in key order.
std::vector<std::uint8_t> encode_png(const Image& image, int compression_level = 6);
Image decode_png(std::span<const std::uint8_t> bytes);

// PNG or JPEG, sniffed from the magic bytes.
Image read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image,
               int compression_level = 6);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never observe a
// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// BLAKE2b-256 hex digest.
std::string digest_hex(std::span<const std::uint8_t> bytes);
std::string file_digest(const std::filesystem::path& path);

}  // namespace synthfab
