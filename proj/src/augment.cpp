#include "pixmix/augment.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pixmix {

namespace {

// Inverse-mapping affine warp: every output pixel p samples the source at
// A * (p - center) + center + offset, bilinearly, with zero fill outside.
ImageTensor warp_affine(const ImageTensor& img, const Eigen::Matrix2d& lin,
                        const Eigen::Vector2d& offset) {
  const Eigen::Index h = img.height();
  const Eigen::Index w = img.width();
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  ImageTensor out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    const double dy = y - cy;
    for (Eigen::Index x = 0; x < w; ++x) {
      const double dx = x - cx;
      const double sx = lin(0, 0) * dx + lin(0, 1) * dy + cx + offset.x();
      const double sy = lin(1, 0) * dx + lin(1, 1) * dy + cy + offset.y();
      const auto x0 = static_cast<Eigen::Index>(std::floor(sx));
      const auto y0 = static_cast<Eigen::Index>(std::floor(sy));
      const float fx = static_cast<float>(sx - x0);
      const float fy = static_cast<float>(sy - y0);
      const float w00 = (1 - fx) * (1 - fy);
      const float w10 = fx * (1 - fy);
      const float w01 = (1 - fx) * fy;
      const float w11 = fx * fy;
      const bool x0_in = x0 >= 0 && x0 < w;
      const bool x1_in = x0 + 1 >= 0 && x0 + 1 < w;
      const bool y0_in = y0 >= 0 && y0 < h;
      const bool y1_in = y0 + 1 >= 0 && y0 + 1 < h;
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        float v = 0.0f;
        if (y0_in) {
          if (x0_in && w00 != 0.0f) v += w00 * img(y0, x0, c);
          if (x1_in && w10 != 0.0f) v += w10 * img(y0, x0 + 1, c);
        }
        if (y1_in) {
          if (x0_in && w01 != 0.0f) v += w01 * img(y0 + 1, x0, c);
          if (x1_in && w11 != 0.0f) v += w11 * img(y0 + 1, x0 + 1, c);
        }
        out(y, x, c) = v;
      }
    }
  }
  return out;
}

}  // namespace

ImageTensor rotate(const ImageTensor& img, double degrees) {
  if (std::abs(degrees) > 180.0) {
    throw std::invalid_argument("rotate: |degrees| must be <= 180");
  }
  if (degrees == 0.0) return img;
  const double theta = degrees * std::numbers::pi / 180.0;
  // Content rotates by +theta; sampling uses the inverse rotation.
  Eigen::Matrix2d lin;
  lin << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
  return warp_affine(img, lin, Eigen::Vector2d::Zero());
}

ImageTensor shear_x(const ImageTensor& img, double factor) {
  if (std::abs(factor) > 1.0) {
    throw std::invalid_argument("shear_x: |factor| must be <= 1");
  }
  Eigen::Matrix2d lin;
  lin << 1.0, factor, 0.0, 1.0;
  return warp_affine(img, lin, Eigen::Vector2d::Zero());
}

ImageTensor shear_y(const ImageTensor& img, double factor) {
  if (std::abs(factor) > 1.0) {
    throw std::invalid_argument("shear_y: |factor| must be <= 1");
  }
  Eigen::Matrix2d lin;
  lin << 1.0, 0.0, factor, 1.0;
  return warp_affine(img, lin, Eigen::Vector2d::Zero());
}

ImageTensor translate_x(const ImageTensor& img, double pixels) {
  if (std::abs(pixels) > static_cast<double>(img.width())) {
    throw std::invalid_argument("translate_x: |pixels| must be <= width");
  }
  return warp_affine(img, Eigen::Matrix2d::Identity(),
                     Eigen::Vector2d(pixels, 0.0));
}

ImageTensor translate_y(const ImageTensor& img, double pixels) {
  if (std::abs(pixels) > static_cast<double>(img.height())) {
    throw std::invalid_argument("translate_y: |pixels| must be <= height");
  }
  return warp_affine(img, Eigen::Matrix2d::Identity(),
                     Eigen::Vector2d(0.0, pixels));
}

ImageTensor posterize(const ImageTensor& img, int keep_bits) {
  if (keep_bits < 1 || keep_bits > 8) {
    throw std::invalid_argument("posterize: keep_bits must be in 1..8");
  }
  const int mask = 0xff << (8 - keep_bits);
  ImageTensor out(img.height(), img.width());
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const int byte =
        static_cast<int>(std::floor(static_cast<double>(img.array()[i]) * 255.0));
    out.array()[i] = static_cast<float>(byte & mask) / 255.0f;
  }
  return out;
}

ImageTensor solarize(const ImageTensor& img, float threshold) {
  if (threshold < 0.0f || threshold > 1.0f) {
    throw std::invalid_argument("solarize: threshold must be in [0,1]");
  }
  ImageTensor out(img.height(), img.width(),
                  (img.array() >= threshold).select(1.0f - img.array(),
                                                    img.array()));
  return out;
}

ImageTensor autocontrast(const ImageTensor& img) {
  ImageTensor out = img;
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    auto chan = out.channel(c);
    const float lo = chan.minCoeff();
    const float hi = chan.maxCoeff();
    if (hi > lo) {
      chan = (chan - lo) / (hi - lo);
    }
  }
  return out;
}

ImageTensor equalize(const ImageTensor& img) {
  ImageTensor out = img;
  const Eigen::Index n = img.height() * img.width();
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    auto chan = out.channel(c);
    std::array<std::int64_t, 256> hist{};
    for (Eigen::Index i = 0; i < n; ++i) {
      const int byte = static_cast<int>(
          std::floor(static_cast<double>(chan[i]) * 255.0 + 0.5));
      ++hist[std::clamp(byte, 0, 255)];
    }
    std::array<std::int64_t, 256> cdf{};
    std::int64_t running = 0;
    std::int64_t cdf_min = 0;
    for (int i = 0; i < 256; ++i) {
      running += hist[i];
      cdf[i] = running;
      if (cdf_min == 0 && hist[i] > 0) cdf_min = running;
    }
    if (cdf_min == n) continue;  // single occupied bin: leave unchanged
    std::array<float, 256> lut{};
    const double denom = static_cast<double>(n - cdf_min);
    for (int i = 0; i < 256; ++i) {
      const double level =
          std::floor(static_cast<double>(cdf[i] - cdf_min) * 255.0 / denom + 0.5);
      lut[i] = static_cast<float>(std::clamp(level, 0.0, 255.0)) / 255.0f;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const int byte = static_cast<int>(
          std::floor(static_cast<double>(chan[i]) * 255.0 + 0.5));
      chan[i] = lut[std::clamp(byte, 0, 255)];
    }
  }
  return out;
}

ImageTensor random_augment(const ImageTensor& img, RngStream& stream,
                           const AugConfig& config) {
  if (config.severity < 1 || config.severity > 5) {
    throw std::invalid_argument("random_augment: severity must be in 1..5");
  }
  const double scale = config.severity / 5.0;
  const auto op = static_cast<AugOpKind>(stream.choose_uniform(kAugOpCount));
  // Every op draws a magnitude so the stream advances uniformly.
  const double u = 2.0 * stream.next_uniform() - 1.0;
  switch (op) {
    case AugOpKind::kRotate:
      return rotate(img, u * 30.0 * scale);
    case AugOpKind::kShearX:
      return shear_x(img, u * 0.3 * scale);
    case AugOpKind::kShearY:
      return shear_y(img, u * 0.3 * scale);
    case AugOpKind::kTranslateX:
      return translate_x(img, u * (img.width() / 3.0) * scale);
    case AugOpKind::kTranslateY:
      return translate_y(img, u * (img.height() / 3.0) * scale);
    case AugOpKind::kPosterize: {
      const int dropped =
          static_cast<int>(std::floor(std::abs(u) * 4.0 * scale + 0.5));
      return posterize(img, 8 - dropped);
    }
    case AugOpKind::kSolarize:
      return solarize(img, static_cast<float>(1.0 - std::abs(u) * scale));
    case AugOpKind::kAutocontrast:
      return autocontrast(img);
    case AugOpKind::kEqualize:
      return equalize(img);
  }
  throw std::logic_error("random_augment: unreachable");
}

}  // namespace pixmix
