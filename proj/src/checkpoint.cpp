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

#include "talkface/checkpoint.hpp"

#include <map>
#include <string>

#include "binary_io.hpp"
#include "talkface/error.hpp"

namespace talkface {

namespace {
constexpr char kMagic[] = "G4GCKPT1";
constexpr std::size_t kMagicSize = 8;
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<const ParameterStore*>& stores) {
  std::vector<std::uint8_t> out;
  binary::put_bytes(out, std::string(kMagic, kMagicSize));
  for (const ParameterStore* store : stores) {
    for (const auto& e : store->entries()) {
      binary::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
      binary::put_bytes(out, e.name);
      binary::put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
      for (std::size_t d : e.tensor.shape()) binary::put_u32(out, static_cast<std::uint32_t>(d));
      for (double v : e.tensor.data()) binary::put_f32(out, static_cast<float>(v));
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const ParameterStore*>& stores) {
  binary::write_file(path, encode_checkpoint(stores));
}

void decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                       const std::vector<ParameterStore*>& stores) {
  binary::Reader in(bytes.data(), bytes.size(), "checkpoint");
  if (in.str(kMagicSize) != std::string(kMagic, kMagicSize)) in.fail("bad magic");
  std::map<std::string, Tensor> targets;
  for (ParameterStore* store : stores) {
    for (const auto& e : store->entries()) targets.emplace(e.name, e.tensor);
  }
  while (in.remaining() > 0) {
    const std::uint32_t name_len = in.u32();
    if (name_len == 0 || name_len > 4096) in.fail("implausible name length");
    const std::string name = in.str(name_len);
    const std::uint32_t rank = in.u32();
    if (rank > 8) in.fail("implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    auto it = targets.find(name);
    if (it == targets.end()) in.fail("unexpected tensor '" + name + "'");
    if (it->second.shape() != shape) {
      in.fail("tensor '" + name + "' has shape " + shape_to_string(shape) + ", model expects " +
              shape_to_string(it->second.shape()));
    }
    auto dst = it->second.mutable_data();
    for (double& v : dst) v = static_cast<double>(in.f32());
    targets.erase(it);
  }
  if (!targets.empty()) {
    throw IoError("checkpoint: missing tensor '" + targets.begin()->first + "' (" +
                  std::to_string(targets.size()) + " missing)");
  }
}

void load_checkpoint(const std::filesystem::path& path,
                     const std::vector<ParameterStore*>& stores) {
  decode_checkpoint(binary::read_file(path), stores);
}

}  // namespace talkface
