#pragma once

#include <filesystem>

#include "pixmix/image.hpp"

namespace pixmix {

// Decodes an 8- or 16-bit PNG. Grayscale and palette images are promoted to
// RGB; an alpha channel is composited onto black. Sample values are divided
// by (2^bitdepth - 1). Missing file -> IoError, malformed file -> DecodeError;
// both messages carry the path.
ImageTensor load_png(const std::filesystem::path& path);

// Writes an 8-bit RGB PNG, quantizing with round-half-up: byte = floor(v*255 + 0.5).
// Loading the result back reproduces any tensor already on the 255-grid exactly.
void save_png(const ImageTensor& img, const std::filesystem::path& path);

}  // namespace pixmix
