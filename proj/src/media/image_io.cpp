#include "vamark/media/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace vamark {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

}  // namespace

float quantize_8bit(float v) {
  v = std::min(1.0f, std::max(0.0f, v));
  return std::round(v * 255.0f) / 255.0f;
}

Tensor quantize_8bit(const Tensor& t) {
  Tensor out = t;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = quantize_8bit(out[i]);
  return out;
}

Tensor load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail("cannot open image", path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("libpng init failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("libpng init failed", path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("failed to decode PNG", path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("unsupported PNG channel count", path);
  }

  std::vector<png_byte> rowbuf(static_cast<size_t>(w) * static_cast<size_t>(channels));
  Tensor out({channels, static_cast<int>(h), static_cast<int>(w)});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        out[c * hw + static_cast<std::int64_t>(y) * w + x] = rowbuf[x * channels + c] / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void save_image(const std::string& path, const Tensor& image) {
  if (image.ndim() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw std::invalid_argument("save_image: expects [1|3,H,W]");
  const int C = image.dim(0), H = image.dim(1), W = image.dim(2);

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail("cannot open image for writing", path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("libpng init failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("libpng init failed", path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("failed to encode PNG", path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
               C == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> rowbuf(static_cast<size_t>(W) * static_cast<size_t>(C));
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        float v = image[c * hw + static_cast<std::int64_t>(y) * W + x];
        v = std::min(1.0f, std::max(0.0f, v));
        rowbuf[static_cast<size_t>(x) * C + c] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor load_mask(const std::string& path) {
  Tensor img = load_image(path);
  const int H = img.dim(1), W = img.dim(2);
  Tensor mask({H, W});
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;
  for (std::int64_t i = 0; i < hw; ++i) mask[i] = img[i] >= 0.5f ? 1.0f : 0.0f;
  return mask;
}

void save_mask(const std::string& path, const Tensor& mask) {
  if (mask.ndim() != 2) throw std::invalid_argument("save_mask: expects [H,W]");
  Tensor img({1, mask.dim(0), mask.dim(1)});
  for (std::int64_t i = 0; i < mask.numel(); ++i) img[i] = mask[i] >= 0.5f ? 1.0f : 0.0f;
  save_image(path, img);
}

}  // namespace vamark
