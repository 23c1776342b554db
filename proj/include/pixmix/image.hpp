#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>

#include "pixmix/rng.hpp"

namespace pixmix {

// H x W x 3 raster of float values in [0, 1], row-major with interleaved RGB.
// The flat array() view is what the elementwise pipeline (mixing, clipping)
// operates on; (y, x, c) indexing serves the geometric resamplers.
class ImageTensor {
 public:
  static constexpr int kChannels = 3;

  ImageTensor() = default;
  ImageTensor(Eigen::Index height, Eigen::Index width)
      : height_(height), width_(width) {
    check_dims(height, width);
    data_ = Eigen::ArrayXf::Zero(height * width * kChannels);
  }
  ImageTensor(Eigen::Index height, Eigen::Index width, Eigen::ArrayXf data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != height_ * width_ * kChannels) {
      throw std::invalid_argument("ImageTensor: data length != h*w*3");
    }
  }

  Eigen::Index height() const { return height_; }
  Eigen::Index width() const { return width_; }
  Eigen::Index size() const { return data_.size(); }

  float& operator()(Eigen::Index y, Eigen::Index x, int c) {
    return data_[(y * width_ + x) * kChannels + c];
  }
  float operator()(Eigen::Index y, Eigen::Index x, int c) const {
    return data_[(y * width_ + x) * kChannels + c];
  }

  Eigen::ArrayXf& array() { return data_; }
  const Eigen::ArrayXf& array() const { return data_; }

  // Strided view of one color channel, for per-channel remaps.
  auto channel(int c) {
    return Eigen::Map<Eigen::ArrayXf, 0, Eigen::InnerStride<kChannels>>(
        data_.data() + c, height_ * width_);
  }
  auto channel(int c) const {
    return Eigen::Map<const Eigen::ArrayXf, 0, Eigen::InnerStride<kChannels>>(
        data_.data() + c, height_ * width_);
  }

  bool same_dims(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  static void check_dims(Eigen::Index height, Eigen::Index width) {
    if (height < 1 || width < 1) {
      throw std::invalid_argument("ImageTensor: dimensions must be >= 1");
    }
  }

  Eigen::Index height_ = 1;
  Eigen::Index width_ = 1;
  Eigen::ArrayXf data_ = Eigen::ArrayXf::Zero(kChannels);
};

// Elementwise clamp to [0, 1]. NaN anywhere is a numeric error.
ImageTensor clip01(const ImageTensor& img);

// Bilinear resize with half-pixel-centered coordinates; source taps are
// clamped to the image border. Resizing to the same dimensions is exact.
ImageTensor resize_bilinear(const ImageTensor& img, Eigen::Index out_h,
                            Eigen::Index out_w);

struct CropConfig {
  std::pair<double, double> area_fraction_range = {0.3, 1.0};
  std::pair<double, double> aspect_ratio_range = {3.0 / 4.0, 4.0 / 3.0};
  int max_attempts = 10;
};

// Random crop of a random area fraction and aspect ratio, resized to a
// square out_size. Falls back to the largest centered square crop when no
// sampled rectangle fits within max_attempts.
ImageTensor random_resized_crop(const ImageTensor& img, RngStream& stream,
                                Eigen::Index out_size,
                                const CropConfig& config = CropConfig{});

}  // namespace pixmix
