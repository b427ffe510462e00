// Copyright 2026 The talkface Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "talkface/tensor.hpp"

namespace talkface::image {

// Binary PGM (P5) for 1-channel and PPM (P6) for 3-channel images. Values
// are [0, 1] doubles in C x H x W layout; files store 8 bits per sample.
std::vector<std::uint8_t> encode_pnm(const Tensor& image);
Tensor decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& what = "image");

void save_pnm(const std::filesystem::path& path, const Tensor& image);
Tensor load_pnm(const std::filesystem::path& path);

// "%06d" followed by .ppm or .pgm.
std::string frame_file_name(std::size_t index, std::size_t channels);

// Sorted frame files (.ppm/.pgm) in a directory.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

}  // namespace talkface::image
