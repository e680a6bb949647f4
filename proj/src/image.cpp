// SPDX-License-Identifier: Apache-2.0
#include "camforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <fmt/format.h>

#include "camforge/error.hpp"

namespace camforge {

ImageF to_gray(const ImageF& img) {
  if (img.channels() == 1) return img;
  ImageF out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
  return out;
}

namespace {

std::ofstream open_binary(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path.string());
  return os;
}

void put16(std::ofstream& os, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
  os.write(bytes, 2);
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const ImageF& img) {
  auto os = open_binary(path);
  os << fmt::format("P6\n{} {}\n255\n", img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src = img.channels() == 3 ? c : 0;
        const double v = std::clamp(img.at(x, y, src), 0.0, 1.0);
        os.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
      }
    }
  }
}

void write_pgm16(const std::filesystem::path& path, const ImageF& img, double scale) {
  auto os = open_binary(path);
  os << fmt::format("P5\n# scale {:.9g}\n{} {}\n65535\n", scale, img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double v = img.at(x, y);
      std::uint16_t q = 65535;
      if (std::isfinite(v)) q = static_cast<std::uint16_t>(std::clamp(std::lround(v / scale), 0L, 65534L));
      put16(os, q);
    }
  }
}

void write_pgm16(const std::filesystem::path& path, const ImageI& ids) {
  auto os = open_binary(path);
  os << fmt::format("P5\n{} {}\n65535\n", ids.width(), ids.height());
  for (int y = 0; y < ids.height(); ++y)
    for (int x = 0; x < ids.width(); ++x)
      put16(os, static_cast<std::uint16_t>(std::clamp(ids.at(x, y), 0, 65535)));
}

}  // namespace camforge
