#include "pixmix/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pixmix {

ImageTensor clip01(const ImageTensor& img) {
  if (img.array().isNaN().any()) {
    throw std::domain_error("clip01: input contains NaN");
  }
  ImageTensor out(img.height(), img.width(),
                  img.array().min(1.0f).max(0.0f));
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& img, Eigen::Index out_h,
                            Eigen::Index out_w) {
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("resize_bilinear: output dims must be >= 1");
  }
  const Eigen::Index in_h = img.height();
  const Eigen::Index in_w = img.width();
  if (out_h == in_h && out_w == in_w) return img;

  ImageTensor out(out_h, out_w);
  const double scale_y = static_cast<double>(in_h) / out_h;
  const double scale_x = static_cast<double>(in_w) / out_w;
  for (Eigen::Index y = 0; y < out_h; ++y) {
    double sy = (y + 0.5) * scale_y - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(in_h - 1));
    const Eigen::Index y0 = static_cast<Eigen::Index>(sy);
    const Eigen::Index y1 = std::min(y0 + 1, in_h - 1);
    const float fy = static_cast<float>(sy - y0);
    for (Eigen::Index x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * scale_x - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(in_w - 1));
      const Eigen::Index x0 = static_cast<Eigen::Index>(sx);
      const Eigen::Index x1 = std::min(x0 + 1, in_w - 1);
      const float fx = static_cast<float>(sx - x0);
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        const float top = img(y0, x0, c) + fx * (img(y0, x1, c) - img(y0, x0, c));
        const float bot = img(y1, x0, c) + fx * (img(y1, x1, c) - img(y1, x0, c));
        out(y, x, c) = top + fy * (bot - top);
      }
    }
  }
  return out;
}

namespace {

ImageTensor crop(const ImageTensor& img, Eigen::Index top, Eigen::Index left,
                 Eigen::Index h, Eigen::Index w) {
  ImageTensor out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        out(y, x, c) = img(top + y, left + x, c);
      }
    }
  }
  return out;
}

}  // namespace

ImageTensor random_resized_crop(const ImageTensor& img, RngStream& stream,
                                Eigen::Index out_size,
                                const CropConfig& config) {
  if (out_size < 1) {
    throw std::invalid_argument("random_resized_crop: out_size must be >= 1");
  }
  const auto [min_area, max_area] = config.area_fraction_range;
  if (!(min_area > 0.0) || min_area > max_area || max_area > 1.0) {
    throw std::invalid_argument(
        "random_resized_crop: area_fraction_range must be within (0, 1]");
  }
  const Eigen::Index in_h = img.height();
  const Eigen::Index in_w = img.width();
  const double full_area = static_cast<double>(in_h) * in_w;
  const double log_min_ar = std::log(config.aspect_ratio_range.first);
  const double log_max_ar = std::log(config.aspect_ratio_range.second);

  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    const double area =
        full_area * (min_area + (max_area - min_area) * stream.next_uniform());
    const double aspect = std::exp(
        log_min_ar + (log_max_ar - log_min_ar) * stream.next_uniform());
    const auto w =
        static_cast<Eigen::Index>(std::lround(std::sqrt(area * aspect)));
    const auto h =
        static_cast<Eigen::Index>(std::lround(std::sqrt(area / aspect)));
    if (w < 1 || h < 1 || w > in_w || h > in_h) continue;
    const Eigen::Index left =
        static_cast<Eigen::Index>(stream.choose_uniform(in_w - w + 1));
    const Eigen::Index top =
        static_cast<Eigen::Index>(stream.choose_uniform(in_h - h + 1));
    return resize_bilinear(crop(img, top, left, h, w), out_size, out_size);
  }

  // Center-crop fallback.
  const Eigen::Index side = std::min(in_h, in_w);
  const Eigen::Index top = (in_h - side) / 2;
  const Eigen::Index left = (in_w - side) / 2;
  return resize_bilinear(crop(img, top, left, side, side), out_size, out_size);
}

}  // namespace pixmix
