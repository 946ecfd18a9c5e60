// Minimal 8-bit image containers.
//
// Binary images use a single channel with values in {0, 1} in memory; the
// I/O layer maps them to 0/255 grey PNG on disk. Multi-channel images are
// row-major interleaved with channel order R, G, B.
#pragma once

#include <cstdint>
#include <vector>

#include "mbul/common.hpp"

namespace mbul {

struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;  // row-major, interleaved; size = w*h*c

  static ImageU8 zeros(int width, int height, int channels = 1) {
    check_config(width > 0 && height > 0 && channels > 0,
                 "ImageU8: dimensions must be positive");
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.assign(static_cast<std::size_t>(width) * height * channels, 0);
    return img;
  }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint8_t& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const std::uint8_t& at(int x, int y, int c = 0) const {
    return data[index(x, y, c)];
  }

  bool same_shape(const ImageU8& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Single-channel image whose pixels are all 0 or 1.
using BinaryImage = ImageU8;

inline bool is_binary(const ImageU8& img) {
  if (img.channels != 1) return false;
  for (std::uint8_t v : img.data)
    if (v > 1) return false;
  return true;
}

inline std::size_t count_nonzero(const ImageU8& img) {
  std::size_t n = 0;
  for (std::uint8_t v : img.data) n += (v != 0);
  return n;
}

}  // namespace mbul
