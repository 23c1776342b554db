#include "pixmix/ifs.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "pixmix/errors.hpp"
#include "pixmix/png_io.hpp"
#include "pixmix/sha256.hpp"

namespace pixmix {

namespace fs = std::filesystem;

namespace {

constexpr int kBurnIn = 20;
constexpr double kMaxSingular = 0.99;
constexpr double kWeightFloor = 0.01;
constexpr double kEscapeRadius = 1e6;

Eigen::Matrix2d sample_matrix(RngStream& stream) {
  Eigen::Matrix2d m;
  for (int i = 0; i < 4; ++i) {
    m(i / 2, i % 2) = 2.0 * stream.next_uniform() - 1.0;
  }
  return m;
}

}  // namespace

double max_singular_value(const Eigen::Matrix2d& m) {
  return Eigen::JacobiSVD<Eigen::Matrix2d>(m).singularValues()(0);
}

IfsSystem sample_ifs(RngStream& stream, int map_count) {
  if (map_count < 2 || map_count > 8) {
    throw std::invalid_argument("sample_ifs: map_count must be in 2..8");
  }
  IfsSystem system;
  system.maps.reserve(map_count);
  for (int m = 0; m < map_count; ++m) {
    AffineMap2D map;
    bool accepted = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      map.linear = sample_matrix(stream);
      if (max_singular_value(map.linear) < kMaxSingular) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      map.linear *= (kMaxSingular - 0.01) / max_singular_value(map.linear);
    }
    map.translation.x() = 2.0 * stream.next_uniform() - 1.0;
    map.translation.y() = 2.0 * stream.next_uniform() - 1.0;
    system.maps.push_back(map);
  }
  double total = 0.0;
  system.selection_weights.reserve(map_count);
  for (const auto& map : system.maps) {
    const double w =
        std::max(std::abs(map.linear.determinant()), kWeightFloor);
    system.selection_weights.push_back(w);
    total += w;
  }
  for (double& w : system.selection_weights) w /= total;
  return system;
}

std::vector<Eigen::Vector2d> chaos_game_points(const IfsSystem& system,
                                               RngStream& stream,
                                               std::int64_t points) {
  if (system.maps.empty()) {
    throw std::invalid_argument("chaos_game_points: empty system");
  }
  if (points < 1000) {
    throw std::invalid_argument("chaos_game_points: points must be >= 1000");
  }
  std::vector<Eigen::Vector2d> retained;
  retained.reserve(static_cast<std::size_t>(points - kBurnIn));
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  for (std::int64_t i = 0; i < points; ++i) {
    const double u = stream.next_uniform();
    std::size_t idx = 0;
    double acc = 0.0;
    for (; idx + 1 < system.maps.size(); ++idx) {
      acc += system.selection_weights[idx];
      if (u < acc) break;
    }
    const auto& map = system.maps[idx];
    z = map.linear * z + map.translation;
    if (z.cwiseAbs().maxCoeff() > kEscapeRadius) {
      throw std::runtime_error(
          "chaos game orbit escaped: contractivity invariant violated");
    }
    if (i >= kBurnIn) retained.push_back(z);
  }
  return retained;
}

Eigen::ArrayXXd render_chaos_game(const IfsSystem& system, RngStream& stream,
                                  std::int64_t points, Eigen::Index size) {
  if (size < 1) {
    throw std::invalid_argument("render_chaos_game: size must be >= 1");
  }
  const auto retained = chaos_game_points(system, stream, points);

  Eigen::Vector2d lo = retained.front();
  Eigen::Vector2d hi = retained.front();
  for (const auto& p : retained) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double ex = hi.x() - lo.x();
  const double ey = hi.y() - lo.y();

  Eigen::ArrayXXd density = Eigen::ArrayXXd::Zero(size, size);
  for (const auto& p : retained) {
    Eigen::Index px = 0;
    Eigen::Index py = 0;
    if (ex > 0.0) {
      px = std::min<Eigen::Index>(
          size - 1,
          static_cast<Eigen::Index>((p.x() - lo.x()) / ex * size));
    }
    if (ey > 0.0) {
      py = std::min<Eigen::Index>(
          size - 1,
          static_cast<Eigen::Index>((p.y() - lo.y()) / ey * size));
    }
    density(py, px) += 1.0;
  }
  return density;
}

ImageTensor colorize(const Eigen::ArrayXXd& density, RngStream& stream) {
  if ((density < 0.0).any()) {
    throw std::invalid_argument("colorize: density must be nonnegative");
  }
  const Eigen::Index size_y = density.rows();
  const Eigen::Index size_x = density.cols();

  // Three palette stops, sampled before inspecting the density so the
  // palette consumes a fixed number of draws.
  float stops[3][3];
  for (auto& stop : stops) {
    for (float& c : stop) c = static_cast<float>(stream.next_uniform());
  }

  ImageTensor img(size_y, size_x);  // zero-initialized: background is black
  const double max_d = density.maxCoeff();
  if (max_d <= 0.0) return img;
  const double log_max = std::log1p(max_d);

  for (Eigen::Index y = 0; y < size_y; ++y) {
    for (Eigen::Index x = 0; x < size_x; ++x) {
      const double d = density(y, x);
      if (d <= 0.0) continue;
      const float t = static_cast<float>(std::log1p(d) / log_max);
      const float* a;
      const float* b;
      float local;
      if (t <= 0.5f) {
        a = stops[0];
        b = stops[1];
        local = 2.0f * t;
      } else {
        a = stops[1];
        b = stops[2];
        local = 2.0f * t - 1.0f;
      }
      for (int c = 0; c < 3; ++c) {
        img(y, x, c) = a[c] * (1.0f - local) + b[c] * local;
      }
    }
  }
  return img;
}

double occupancy(const Eigen::ArrayXXd& density) {
  return static_cast<double>((density > 0.0).count()) /
         static_cast<double>(density.size());
}

namespace {

struct Candidate {
  ImageTensor image;
  bool accepted = false;
};

Candidate render_candidate(const RngStream& root, std::uint64_t index,
                           Eigen::Index size, const FractalGenConfig& config) {
  RngStream stream = root.split(index);
  const int map_count = 2 + static_cast<int>(stream.choose_uniform(7));
  const IfsSystem system = sample_ifs(stream, map_count);
  const Eigen::ArrayXXd density =
      render_chaos_game(system, stream, config.points, size);
  Candidate candidate;
  candidate.accepted = occupancy(density) >= config.min_occupancy;
  if (candidate.accepted) {
    candidate.image = colorize(density, stream);
  }
  return candidate;
}

}  // namespace

MixingManifest generate_mixing_set(const RngStream& stream, int count,
                                   Eigen::Index size, const fs::path& out_dir,
                                   const FractalGenConfig& config) {
  if (count < 1) {
    throw std::invalid_argument("generate_mixing_set: count must be >= 1");
  }
  fs::create_directories(out_dir);

  MixingManifest manifest;
  manifest.root_dir = out_dir;

  const int workers = std::max(1, config.workers);
  const std::uint64_t block = workers == 1
                                  ? 1
                                  : static_cast<std::uint64_t>(workers) * 4;
  std::uint64_t next_candidate = 0;
  std::int64_t rejections = 0;
  int accepted = 0;

  const std::int64_t rejection_limit = static_cast<std::int64_t>(50) * count;
  while (accepted < count) {
    // Candidates are evaluated in blocks but accepted strictly in candidate
    // order, so any worker count produces the same files.
    std::vector<Candidate> batch(block);
    if (workers == 1) {
      batch[0] = render_candidate(stream, next_candidate, size, config);
    } else {
      std::vector<std::thread> pool;
      std::atomic<std::uint64_t> cursor{0};
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::uint64_t i = cursor.fetch_add(1); i < block;
               i = cursor.fetch_add(1)) {
            batch[i] = render_candidate(stream, next_candidate + i, size, config);
          }
        });
      }
      for (auto& t : pool) t.join();
    }
    for (std::uint64_t i = 0; i < block && accepted < count; ++i) {
      if (!batch[i].accepted) {
        if (++rejections > rejection_limit) {
          throw std::runtime_error(
              "fractal generation stalled: occupancy filter rejected more "
              "than 50x the requested count");
        }
        continue;
      }
      char name[32];
      std::snprintf(name, sizeof name, "fractal_%06d.png", accepted);
      const fs::path file = out_dir / name;
      save_png(batch[i].image, file);
      ManifestEntry entry;
      entry.path = name;
      entry.source = "fractal";
      entry.sha256 = sha256_file(file);
      entry.width = static_cast<int>(size);
      entry.height = static_cast<int>(size);
      manifest.entries.push_back(std::move(entry));
      ++accepted;
    }
    next_candidate += block;
  }

  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace pixmix
