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

#include "talkface/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "binary_io.hpp"
#include "talkface/error.hpp"

namespace talkface::image {

std::vector<std::uint8_t> encode_pnm(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("encode_pnm: expected 1 x H x W or 3 x H x W, got " +
                     shape_to_string(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> out;
  binary::put_bytes(out, (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " +
                             std::to_string(h) + "\n255\n");
  const auto v = image.data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        const double x = std::clamp(v[(k * h + i) * w + j], 0.0, 1.0);
        out.push_back(static_cast<std::uint8_t>(std::lround(x * 255.0)));
      }
    }
  }
  return out;
}

Tensor decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  binary::Reader in(bytes.data(), bytes.size(), what);
  const std::string magic = in.str(2);
  if (magic != "P5" && magic != "P6") in.fail("not a binary PGM/PPM (magic '" + magic + "')");
  // Header: three whitespace-separated integers, '#' comments allowed.
  auto next_int = [&]() -> std::size_t {
    for (;;) {
      const char ch = static_cast<char>(*in.take(1));
      if (ch == '#') {
        while (static_cast<char>(*in.take(1)) != '\n') {
        }
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        in.seek(in.position() - 1);
        break;
      }
    }
    std::size_t v = 0, digits = 0;
    while (in.remaining() > 0 && std::isdigit(static_cast<unsigned char>(*(bytes.data() + in.position())))) {
      v = v * 10 + static_cast<std::size_t>(*in.take(1) - '0');
      if (++digits > 9) in.fail("header value too large");
    }
    if (digits == 0) in.fail("malformed header");
    return v;
  };
  const std::size_t w = next_int(), h = next_int(), maxval = next_int();
  in.take(1);  // single whitespace before the raster
  if (w == 0 || h == 0) in.fail("zero extent");
  if (maxval == 0 || maxval > 65535) in.fail("unsupported maxval " + std::to_string(maxval));
  const std::size_t c = magic == "P5" ? 1 : 3;
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::uint8_t* raster = in.take(w * h * c * bytes_per);
  std::vector<double> v(c * h * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t s = (i * w + j) * c + k;
        // 16-bit samples are big-endian.
        const double raw = bytes_per == 1 ? raster[s] : (raster[2 * s] << 8) | raster[2 * s + 1];
        v[(k * h + i) * w + j] = std::min(raw / static_cast<double>(maxval), 1.0);
      }
    }
  }
  return Tensor::from({c, h, w}, std::move(v));
}

void save_pnm(const std::filesystem::path& path, const Tensor& image) {
  binary::write_file(path, encode_pnm(image));
}

Tensor load_pnm(const std::filesystem::path& path) {
  return decode_pnm(binary::read_file(path), path.string());
}

std::string frame_file_name(std::size_t index, std::size_t channels) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.%s", index, channels == 1 ? "pgm" : "ppm");
  return buf;
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("'" + dir.string() + "' is not a directory");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace talkface::image
