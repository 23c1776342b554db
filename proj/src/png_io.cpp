#include "pixmix/png_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include "pixmix/errors.hpp"

namespace pixmix {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  // Jump back to the caller's setjmp; the message is recovered there.
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg ? msg : "png error";
  std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

ImageTensor load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    throw IoError("cannot open PNG file: " + path.string());
  }
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DecodeError("not a PNG file: " + path.string());
  }

  std::string err_msg;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err_msg,
                                           png_error_handler,
                                           png_warning_handler);
  if (!png) throw DecodeError("libpng init failed: " + path.string());
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("libpng init failed: " + path.string());
  }

  std::vector<png_bytep> row_ptrs;
  std::vector<unsigned char> pixels;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("malformed PNG " + path.string() + ": " + err_msg);
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr,
               nullptr, nullptr);

  // Normalize every input to 8- or 16-bit RGB or RGBA samples.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * height);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    row_ptrs[y] = pixels.data() + y * rowbytes;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 3 && channels != 4) {
    throw DecodeError("unsupported PNG layout in " + path.string());
  }

  const bool has_alpha = channels == 4;
  const float max_val = bit_depth == 16 ? 65535.0f : 255.0f;
  ImageTensor img(static_cast<Eigen::Index>(height),
                  static_cast<Eigen::Index>(width));
  for (png_uint_32 y = 0; y < height; ++y) {
    const unsigned char* row = row_ptrs[y];
    for (png_uint_32 x = 0; x < width; ++x) {
      float rgba[4] = {0.0f, 0.0f, 0.0f, 1.0f};
      for (int c = 0; c < channels; ++c) {
        std::uint32_t v;
        if (bit_depth == 16) {
          // PNG stores 16-bit samples big-endian.
          const std::size_t i = (x * channels + c) * 2;
          v = (static_cast<std::uint32_t>(row[i]) << 8) | row[i + 1];
        } else {
          v = row[x * channels + c];
        }
        rgba[c] = static_cast<float>(v) / max_val;
      }
      const float alpha = has_alpha ? rgba[3] : 1.0f;
      for (int c = 0; c < 3; ++c) {
        img(y, x, c) = rgba[c] * alpha;  // composite on black
      }
    }
  }
  return img;
}

void save_png(const ImageTensor& img, const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) {
    throw IoError("cannot write PNG file: " + path.string());
  }

  std::string err_msg;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err_msg,
                                            png_error_handler,
                                            png_warning_handler);
  if (!png) throw IoError("libpng init failed: " + path.string());
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed: " + path.string());
  }

  const Eigen::Index h = img.height();
  const Eigen::Index w = img.width();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(h) * w * 3);
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const float v = img.array()[i];
    const float scaled = std::floor(v * 255.0f + 0.5f);
    bytes[i] = static_cast<unsigned char>(
        std::min(255.0f, std::max(0.0f, scaled)));
  }
  std::vector<png_bytep> row_ptrs(h);
  for (Eigen::Index y = 0; y < h; ++y) {
    row_ptrs[y] = bytes.data() + static_cast<std::size_t>(y) * w * 3;
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed for " + path.string() + ": " + err_msg);
  }

  png_init_io(png, file.get());
  // Fixed compression settings keep output bytes reproducible run to run.
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace pixmix
