#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "pixmix/metrics.hpp"
#include "pixmix/png_io.hpp"

namespace pixmix {

namespace fs = std::filesystem;

AnomalyKind parse_anomaly_kind(std::string_view name) {
  if (name == "gaussian") return AnomalyKind::kGaussian;
  if (name == "rademacher") return AnomalyKind::kRademacher;
  if (name == "blobs") return AnomalyKind::kBlobs;
  throw std::invalid_argument("unknown anomaly kind '" + std::string(name) +
                              "' (expected gaussian, rademacher or blobs)");
}

std::string_view anomaly_kind_name(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kGaussian:
      return "gaussian";
    case AnomalyKind::kRademacher:
      return "rademacher";
    case AnomalyKind::kBlobs:
      return "blobs";
  }
  return "?";
}

namespace {

ImageTensor gaussian_noise(RngStream& stream, Eigen::Index size) {
  ImageTensor img(size, size);
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double v = 0.5 + 0.25 * stream.next_normal();
    img.array()[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return img;
}

ImageTensor rademacher_noise(RngStream& stream, Eigen::Index size) {
  ImageTensor img(size, size);
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    img.array()[i] = static_cast<float>(stream.choose_uniform(2));
  }
  return img;
}

// Separable box blur with clamp-to-edge padding, applied in place.
void box_blur(std::vector<double>& grid, Eigen::Index size,
              Eigen::Index radius) {
  std::vector<double> tmp(grid.size());
  auto at = [size](Eigen::Index y, Eigen::Index x) -> Eigen::Index {
    return y * size + x;
  };
  const double norm = 1.0 / (2 * radius + 1);
  for (Eigen::Index y = 0; y < size; ++y) {
    for (Eigen::Index x = 0; x < size; ++x) {
      double sum = 0.0;
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        sum += grid[at(y, std::clamp<Eigen::Index>(x + k, 0, size - 1))];
      }
      tmp[at(y, x)] = sum * norm;
    }
  }
  for (Eigen::Index x = 0; x < size; ++x) {
    for (Eigen::Index y = 0; y < size; ++y) {
      double sum = 0.0;
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        sum += tmp[at(std::clamp<Eigen::Index>(y + k, 0, size - 1), x)];
      }
      grid[at(y, x)] = sum * norm;
    }
  }
}

ImageTensor blobs(RngStream& stream, Eigen::Index size) {
  std::vector<double> grid(static_cast<std::size_t>(size) * size);
  for (double& v : grid) v = stream.next_uniform();
  const Eigen::Index radius = std::max<Eigen::Index>(1, size / 16);
  for (int pass = 0; pass < 4; ++pass) box_blur(grid, size, radius);

  // Binarize at the lower median: strictly greater values become foreground.
  std::vector<double> sorted = grid;
  const std::size_t mid = (sorted.size() - 1) / 2;
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  const double median = sorted[mid];

  ImageTensor img(size, size);
  for (Eigen::Index y = 0; y < size; ++y) {
    for (Eigen::Index x = 0; x < size; ++x) {
      const float v = grid[static_cast<std::size_t>(y) * size + x] > median
                          ? 1.0f
                          : 0.0f;
      for (int c = 0; c < ImageTensor::kChannels; ++c) img(y, x, c) = v;
    }
  }
  return img;
}

}  // namespace

ImageTensor synth_anomaly(AnomalyKind kind, RngStream& stream,
                          Eigen::Index size) {
  if (size < 1) throw std::invalid_argument("synth_anomaly: size must be >= 1");
  switch (kind) {
    case AnomalyKind::kGaussian:
      return gaussian_noise(stream, size);
    case AnomalyKind::kRademacher:
      return rademacher_noise(stream, size);
    case AnomalyKind::kBlobs:
      return blobs(stream, size);
  }
  throw std::logic_error("synth_anomaly: unreachable");
}

void gen_synthetic_anomalies(AnomalyKind kind, const RngStream& stream,
                             int count, Eigen::Index size,
                             const fs::path& out_dir) {
  if (count < 1) {
    throw std::invalid_argument("gen_synthetic_anomalies: count must be >= 1");
  }
  fs::create_directories(out_dir);
  const std::string prefix(anomaly_kind_name(kind));
  for (int i = 0; i < count; ++i) {
    RngStream sub = stream.split(static_cast<std::uint64_t>(i));
    char name[48];
    std::snprintf(name, sizeof name, "%s_%06d.png", prefix.c_str(), i);
    save_png(synth_anomaly(kind, sub, size), out_dir / name);
  }
}

}  // namespace pixmix
