#pragma once

#include "pixmix/image.hpp"
#include "pixmix/rng.hpp"

namespace pixmix {

// The augmentation op family. Deliberately excludes contrast, brightness,
// color and sharpness style ops, which overlap the corruption families the
// harness evaluates against.
enum class AugOpKind {
  kRotate,
  kShearX,
  kShearY,
  kTranslateX,
  kTranslateY,
  kPosterize,
  kSolarize,
  kAutocontrast,
  kEqualize,
};
inline constexpr int kAugOpCount = 9;

struct AugConfig {
  // 1..5; op magnitudes scale linearly with severity. At severity 5 the
  // ranges are: rotate +/-30 deg, shear +/-0.3, translate +/-side/3,
  // posterize down to 4 dropped bits, solarize threshold down to 0.
  int severity = 3;
};

// Geometric ops: bilinear sampling, out-of-bounds filled with zero.
ImageTensor rotate(const ImageTensor& img, double degrees);
ImageTensor shear_x(const ImageTensor& img, double factor);
ImageTensor shear_y(const ImageTensor& img, double factor);
ImageTensor translate_x(const ImageTensor& img, double pixels);
ImageTensor translate_y(const ImageTensor& img, double pixels);

// Quantize each channel to keep_bits significant bits on the 255 scale:
// floor(v*255) masked to the top bits, divided by 255.
ImageTensor posterize(const ImageTensor& img, int keep_bits);

// Pixels with v >= threshold become 1 - v.
ImageTensor solarize(const ImageTensor& img, float threshold);

// Per channel, affine remap of [min, max] onto [0, 1]. Constant channels
// pass through unchanged.
ImageTensor autocontrast(const ImageTensor& img);

// Per-channel histogram equalization on the 256-bin byte grid.
ImageTensor equalize(const ImageTensor& img);

// One op kind chosen uniformly, magnitude uniform in [-max, +max] at the
// configured severity. Output has the input's dimensions and stays in [0,1].
ImageTensor random_augment(const ImageTensor& img, RngStream& stream,
                           const AugConfig& config);

}  // namespace pixmix
