#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcdc/tensor.hpp"

namespace tcdc {

// Row-major interleaved RGB, 8 bits per channel.
struct ImageU8 {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> data;  // h * w * 3

  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * w + x) * 3 +
                static_cast<std::size_t>(c)];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * w + x) * 3 +
                static_cast<std::size_t>(c)];
  }
};

// PNG in either direction; grayscale/palette/alpha inputs are expanded to
// plain 8-bit RGB on load.
ImageU8 load_png(const std::string& path);
void save_png(const std::string& path, const ImageU8& img);

ImageU8 resize_bilinear(const ImageU8& src, int out_h, int out_w);

// (3,H,W) scaled to [0,1] <-> interleaved bytes. from_tensor01 clamps and
// rounds to the nearest byte.
Tensor to_tensor01(const ImageU8& img);
ImageU8 from_tensor01(const Tensor& chw);

}  // namespace tcdc
