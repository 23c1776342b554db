#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pixmix/image.hpp"
#include "pixmix/manifest.hpp"
#include "pixmix/rng.hpp"

namespace pixmix {

struct AffineMap2D {
  Eigen::Matrix2d linear = Eigen::Matrix2d::Zero();
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
};

// Iterated function system: 2..8 contractive affine maps with selection
// weights proportional to |det| (floored at 0.01) and normalized to 1.
struct IfsSystem {
  std::vector<AffineMap2D> maps;
  std::vector<double> selection_weights;
};

double max_singular_value(const Eigen::Matrix2d& m);

// Samples linear coefficients uniformly in [-1,1], rejecting until the top
// singular value is below 0.99 (rescaled deterministically after 1000
// tries); translations uniform in [-1,1].
IfsSystem sample_ifs(RngStream& stream, int map_count);

// Chaos game orbit from z0 = (0,0); the first 20 iterates are burn-in and
// discarded. Throws if the orbit escapes (|z| > 1e6), which contractive
// systems cannot do.
std::vector<Eigen::Vector2d> chaos_game_points(const IfsSystem& system,
                                               RngStream& stream,
                                               std::int64_t points);

// Visit-count density over the attractor's bounding box. Total mass is
// exactly points - 20.
Eigen::ArrayXXd render_chaos_game(const IfsSystem& system, RngStream& stream,
                                  std::int64_t points, Eigen::Index size);

// Log-scaled density through a randomly sampled 3-stop linear RGB palette;
// zero-density pixels stay black.
ImageTensor colorize(const Eigen::ArrayXXd& density, RngStream& stream);

// Fraction of pixels with nonzero density.
double occupancy(const Eigen::ArrayXXd& density);

struct FractalGenConfig {
  std::int64_t points = 200000;
  double min_occupancy = 0.05;
  int workers = 1;
};

// Renders fractals until `count` pass the occupancy filter, writing
// fractal_%06d.png plus manifest.json under out_dir. Candidate systems come
// from split(stream, candidate_index), so parallel generation is
// byte-identical to serial. Throws when rejections exceed 50x count.
MixingManifest generate_mixing_set(const RngStream& stream, int count,
                                   Eigen::Index size,
                                   const std::filesystem::path& out_dir,
                                   const FractalGenConfig& config = {});

}  // namespace pixmix
