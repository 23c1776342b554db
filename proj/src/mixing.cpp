#include "pixmix/mixing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "pixmix/errors.hpp"
#include "pixmix/parallel.hpp"
#include "pixmix/png_io.hpp"

namespace pixmix {

namespace fs = std::filesystem;

MixMode parse_mix_mode(std::string_view name) {
  if (name == "full") return MixMode::kFull;
  if (name == "input_only") return MixMode::kInputOnly;
  if (name == "mixset_only") return MixMode::kMixsetOnly;
  throw std::invalid_argument("unknown mix mode '" + std::string(name) +
                              "' (expected full, input_only or mixset_only)");
}

std::string_view mix_mode_name(MixMode mode) {
  switch (mode) {
    case MixMode::kFull:
      return "full";
    case MixMode::kInputOnly:
      return "input_only";
    case MixMode::kMixsetOnly:
      return "mixset_only";
  }
  return "?";
}

PixMixConfig preset(std::string_view name) {
  PixMixConfig config;
  if (name == "cifar") {
    config.k = 4;
    config.beta = 3.0;
    config.target_size = 32;
    return config;
  }
  if (name == "imagenet") {
    config.k = 4;
    config.beta = 4.0;
    config.target_size = 224;
    return config;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) +
                              "' (expected cifar or imagenet)");
}

MixCoefficients sample_conic_coeffs(RngStream& stream, double beta) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("sample_conic_coeffs: beta must be > 0");
  }
  MixCoefficients coeffs;
  coeffs.a = stream.sample_beta(beta, 1.0);
  coeffs.b = stream.sample_beta(1.0, beta);
  return coeffs;
}

namespace {

void check_coeffs(const MixCoefficients& coeffs) {
  if (!(coeffs.a >= 0.0) || !(coeffs.b >= 0.0) ||
      !std::isfinite(coeffs.a) || !std::isfinite(coeffs.b)) {
    throw std::invalid_argument("mix coefficients must be finite and >= 0");
  }
}

void check_dims(const ImageTensor& x1, const ImageTensor& x2) {
  if (!x1.same_dims(x2)) {
    throw std::invalid_argument("mix: images must have identical dimensions");
  }
}

// v^e with the exponent cases that must be bit-exact handled directly.
Eigen::ArrayXf pow_elementwise(const Eigen::ArrayXf& v, double e) {
  if (e == 1.0) return v;
  if (e == 0.0) return Eigen::ArrayXf::Ones(v.size());
  return v.pow(static_cast<float>(e));
}

}  // namespace

ImageTensor mix_additive(const ImageTensor& x1, const ImageTensor& x2,
                         const MixCoefficients& coeffs) {
  check_dims(x1, x2);
  check_coeffs(coeffs);
  const float a = static_cast<float>(coeffs.a);
  const float b = static_cast<float>(coeffs.b);
  // (a*(2*x1-1) + b*(2*x2-1) + 1)/2 rearranged so the identity coefficient
  // pairs (1,0) and (0,1) are exact.
  Eigen::ArrayXf mixed =
      a * x1.array() + b * x2.array() + 0.5f * (1.0f - a - b);
  return clip01(ImageTensor(x1.height(), x1.width(), std::move(mixed)));
}

ImageTensor mix_multiplicative(const ImageTensor& x1, const ImageTensor& x2,
                               const MixCoefficients& coeffs) {
  check_dims(x1, x2);
  check_coeffs(coeffs);
  constexpr float kFloor = 1e-6f;
  const Eigen::ArrayXf v1 = (2.0f * x1.array()).max(kFloor);
  const Eigen::ArrayXf v2 = (2.0f * x2.array()).max(kFloor);
  Eigen::ArrayXf mixed =
      0.5f * pow_elementwise(v1, coeffs.a) * pow_elementwise(v2, coeffs.b);
  return clip01(ImageTensor(x1.height(), x1.width(), std::move(mixed)));
}

ImageTensor pixmix(const ImageTensor& x_orig, const MixingManifest& manifest,
                   const PixMixConfig& config, RngStream& stream,
                   PictureCache* cache, PixmixTrace* trace) {
  if (config.k < 0) throw std::invalid_argument("pixmix: k must be >= 0");
  if (!(config.beta > 0.0)) {
    throw std::invalid_argument("pixmix: beta must be > 0");
  }
  if (x_orig.height() != config.target_size ||
      x_orig.width() != config.target_size) {
    throw std::invalid_argument("pixmix: input must be square at target_size");
  }
  if (config.mode != MixMode::kInputOnly && manifest.entries.empty()) {
    throw std::invalid_argument(
        "pixmix: empty mixing manifest (only allowed in input_only mode)");
  }

  const bool initial_augment = stream.choose_uniform(2) == 0;
  ImageTensor x = initial_augment ? random_augment(x_orig, stream, config.aug)
                                  : x_orig;
  const int rounds = static_cast<int>(
      stream.choose_uniform(static_cast<std::uint64_t>(config.k) + 1));
  if (trace != nullptr) {
    trace->initial_augment = initial_augment;
    trace->rounds = rounds;
  }

  for (int round = 0; round < rounds; ++round) {
    bool augment_branch = false;
    switch (config.mode) {
      case MixMode::kFull:
        augment_branch = stream.choose_uniform(2) == 0;
        break;
      case MixMode::kInputOnly:
        augment_branch = true;
        break;
      case MixMode::kMixsetOnly:
        augment_branch = false;
        break;
    }
    ImageTensor mix_image;
    if (augment_branch) {
      // Always re-augments the original, not the running image.
      mix_image = random_augment(x_orig, stream, config.aug);
      if (trace != nullptr) ++trace->loop_augment_calls;
    } else {
      mix_image = sample_picture(manifest, stream, config.target_size, cache);
      if (trace != nullptr) ++trace->manifest_samples;
    }
    const bool additive = stream.choose_uniform(2) == 0;
    const MixCoefficients coeffs = sample_conic_coeffs(stream, config.beta);
    if (additive) {
      x = mix_additive(x, mix_image, coeffs);
      if (trace != nullptr) ++trace->additive_rounds;
    } else {
      x = mix_multiplicative(x, mix_image, coeffs);
      if (trace != nullptr) ++trace->multiplicative_rounds;
    }
  }
  return x;
}

DatasetSummary augment_dataset(const fs::path& input_dir,
                               const MixingManifest& manifest,
                               const PixMixConfig& config,
                               const RngStream& stream, const fs::path& out_dir,
                               int workers) {
  if (!fs::is_directory(input_dir)) {
    throw IoError("augment_dataset: not a directory: " + input_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& item : fs::recursive_directory_iterator(input_dir)) {
    if (item.is_regular_file() && item.path().extension() == ".png") {
      files.push_back(item.path().lexically_relative(input_dir));
    }
  }
  std::sort(files.begin(), files.end());
  fs::create_directories(out_dir);

  const auto start = std::chrono::steady_clock::now();
  PictureCache cache;
  std::mutex err_mu;
  DatasetSummary summary;
  std::atomic<std::size_t> written{0};

  parallel_for(files.size(), workers, [&](std::size_t i) {
    const fs::path& rel = files[i];
    try {
      RngStream file_stream = stream.split(rel.generic_string());
      ImageTensor img = load_png(input_dir / rel);
      if (img.height() != config.target_size ||
          img.width() != config.target_size) {
        img = resize_bilinear(img, config.target_size, config.target_size);
      }
      const ImageTensor out =
          pixmix(img, manifest, config, file_stream, &cache);
      const fs::path dest = out_dir / rel;
      if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
      save_png(out, dest);
      written.fetch_add(1);
    } catch (const std::exception& e) {
      std::lock_guard lock(err_mu);
      summary.errors.push_back({rel.generic_string(), e.what()});
    }
  });

  std::sort(summary.errors.begin(), summary.errors.end(),
            [](const FileError& a, const FileError& b) { return a.path < b.path; });
  summary.count = written.load();
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return summary;
}

}  // namespace pixmix
