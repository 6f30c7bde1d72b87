#include "tcdc/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace tcdc {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 load_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  require(f != nullptr, "cannot open image: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, "png reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("png info allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("png decode error: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  // Normalize every input variant to 8-bit RGB.
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);
  require(png_get_rowbytes(png, info) == static_cast<std::size_t>(w) * 3,
          "unexpected png row layout: " + path);

  ImageU8 img;
  img.h = static_cast<int>(h);
  img.w = static_cast<int>(w);
  img.data.resize(static_cast<std::size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.data.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png(const std::string& path, const ImageU8& img) {
  require(img.h > 0 && img.w > 0 &&
              img.data.size() == static_cast<std::size_t>(img.h) * img.w * 3,
          "malformed image buffer");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  require(f != nullptr, "cannot write image: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  require(png != nullptr, "png writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    fail("png info allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("png encode error: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w),
               static_cast<png_uint_32>(img.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.h));
  for (int y = 0; y < img.h; ++y)
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(img.data.data() +
                              static_cast<std::size_t>(y) * img.w * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageU8 resize_bilinear(const ImageU8& src, int out_h, int out_w) {
  require(src.h > 0 && src.w > 0, "resize of an empty image");
  require(out_h > 0 && out_w > 0, "resize target must be positive");
  if (src.h == out_h && src.w == out_w) return src;
  ImageU8 dst;
  dst.h = out_h;
  dst.w = out_w;
  dst.data.resize(static_cast<std::size_t>(out_h) * out_w * 3);
  const real sy = static_cast<real>(src.h) / out_h;
  const real sx = static_cast<real>(src.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // Pixel centers; clamped edges.
    const real fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::max(0, std::min(src.h - 1, static_cast<int>(std::floor(fy))));
    const int y1 = std::min(src.h - 1, y0 + 1);
    const real wy = std::min(1.0, std::max(0.0, fy - y0));
    for (int x = 0; x < out_w; ++x) {
      const real fx = (x + 0.5) * sx - 0.5;
      const int x0 =
          std::max(0, std::min(src.w - 1, static_cast<int>(std::floor(fx))));
      const int x1 = std::min(src.w - 1, x0 + 1);
      const real wx = std::min(1.0, std::max(0.0, fx - x0));
      for (int c = 0; c < 3; ++c) {
        const real top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const real bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        const real v = (1.0 - wy) * top + wy * bot;
        dst.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return dst;
}

Tensor to_tensor01(const ImageU8& img) {
  Tensor t({3, img.h, img.w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        t[(static_cast<std::int64_t>(c) * img.h + y) * img.w + x] =
            img.at(y, x, c) / 255.0;
  return t;
}

ImageU8 from_tensor01(const Tensor& chw) {
  require(chw.ndim() == 3 && chw.dim(0) == 3, "expected a (3,H,W) tensor");
  ImageU8 img;
  img.h = chw.dim(1);
  img.w = chw.dim(2);
  img.data.resize(static_cast<std::size_t>(img.h) * img.w * 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        real v = chw[(static_cast<std::int64_t>(c) * img.h + y) * img.w + x];
        v = std::min(1.0, std::max(0.0, v));
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

}  // namespace tcdc
