#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "mosaic/core/errors.hpp"

namespace mosaic {

// 8-bit RGB image, row-major, channels interleaved.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;  // height * width * 3

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, 0) {}

  uint8_t* px(int y, int x) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const uint8_t* px(int y, int x) const {
    return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
  }

  void fill(uint8_t r, uint8_t g, uint8_t b) {
    for (size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = r;
      pixels[i + 1] = g;
      pixels[i + 2] = b;
    }
  }

  bool operator==(const Image& o) const {
    return height == o.height && width == o.width && pixels == o.pixels;
  }
  bool operator!=(const Image& o) const { return !(*this == o); }
};

inline int count_differing_pixels(const Image& a, const Image& b) {
  check(a.height == b.height && a.width == b.width, "image size mismatch");
  int n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      if (std::memcmp(a.px(y, x), b.px(y, x), 3) != 0) ++n;
  return n;
}

}  // namespace mosaic
