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
#include <vector>

#include "talkface/nn.hpp"

namespace talkface {

// "G4GCKPT1" then per tensor: u32 name length, name bytes, u32 rank,
// u32 extents, row-major f32 values. Little-endian.
std::vector<std::uint8_t> encode_checkpoint(const std::vector<const ParameterStore*>& stores);
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const ParameterStore*>& stores);

// Fills every tensor of `stores` by name; names and shapes must match and
// the file may not hold extra tensors.
void decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                       const std::vector<ParameterStore*>& stores);
void load_checkpoint(const std::filesystem::path& path,
                     const std::vector<ParameterStore*>& stores);

}  // namespace talkface
