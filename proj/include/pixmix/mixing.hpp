#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pixmix/augment.hpp"
#include "pixmix/image.hpp"
#include "pixmix/manifest.hpp"
#include "pixmix/rng.hpp"

namespace pixmix {

// Conic (not convex) mixing coefficients: nonnegative, independent, and not
// constrained to sum to 1.
struct MixCoefficients {
  double a = 1.0;
  double b = 0.0;
};

enum class MixMode {
  kFull,        // mix with augmented clean copies and mixing-set pictures
  kInputOnly,   // mix only with augmented copies of the input
  kMixsetOnly,  // mix only with mixing-set pictures
};

MixMode parse_mix_mode(std::string_view name);
std::string_view mix_mode_name(MixMode mode);

struct PixMixConfig {
  int k = 4;          // maximum mixing rounds
  double beta = 3.0;  // Beta-distribution parameter for the coefficients
  MixMode mode = MixMode::kFull;
  AugConfig aug;
  Eigen::Index target_size = 32;
};

// Named hyperparameter presets: "cifar" -> k=4, beta=3, 32px;
// "imagenet" -> k=4, beta=4, 224px.
PixMixConfig preset(std::string_view name);

// a ~ Beta(beta, 1) and b ~ Beta(1, beta), drawn independently in that
// order. Larger beta pushes weight toward the running image.
MixCoefficients sample_conic_coeffs(RngStream& stream, double beta);

// Weighted sum in the signed domain: with u_i = 2*x_i - 1,
// out = clip01((a*u1 + b*u2 + 1) / 2). Exact for (a,b) = (1,0) and (0,1).
ImageTensor mix_additive(const ImageTensor& x1, const ImageTensor& x2,
                         const MixCoefficients& coeffs);

// Weighted geometric mean in the doubled domain: with
// v_i = max(2*x_i, 1e-6), out = clip01((v1^a * v2^b) / 2).
ImageTensor mix_multiplicative(const ImageTensor& x1, const ImageTensor& x2,
                               const MixCoefficients& coeffs);

// Per-run instrumentation counters.
struct PixmixTrace {
  bool initial_augment = false;
  int rounds = 0;
  int additive_rounds = 0;
  int multiplicative_rounds = 0;
  int manifest_samples = 0;
  int loop_augment_calls = 0;
};

// The mixing pipeline:
//   1. with probability 1/2 start from a randomly augmented copy of x_orig;
//   2. draw the round count uniformly from {0, ..., k};
//   3. each round mixes the running image, additively or multiplicatively
//      (1/2 each), with either a fresh augmentation of x_orig or a sampled
//      mixing picture (mode-dependent), using freshly drawn conic
//      coefficients.
// x_orig must be square at config.target_size. The manifest may only be
// empty in kInputOnly mode.
ImageTensor pixmix(const ImageTensor& x_orig, const MixingManifest& manifest,
                   const PixMixConfig& config, RngStream& stream,
                   PictureCache* cache = nullptr,
                   PixmixTrace* trace = nullptr);

struct FileError {
  std::string path;
  std::string message;
};

struct DatasetSummary {
  std::size_t count = 0;  // images written
  double seconds = 0.0;
  std::vector<FileError> errors;
};

// Applies pixmix to every .png under input_dir (resized to the target size
// first), mirroring relative names below out_dir. Each file draws from
// split(stream, relative_path), so the output tree is byte-identical for
// any worker count.
DatasetSummary augment_dataset(const std::filesystem::path& input_dir,
                               const MixingManifest& manifest,
                               const PixMixConfig& config,
                               const RngStream& stream,
                               const std::filesystem::path& out_dir,
                               int workers = 1);

}  // namespace pixmix
