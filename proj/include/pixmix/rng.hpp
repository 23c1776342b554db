#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pixmix {

namespace detail {

// Philox4x32-10 counter-based block cipher (Salmon et al., Random123).
// Chosen over a stateful engine so that split streams can be replayed from
// (key, counter) alone, identically on every platform.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

// SplitMix64 finalizer, used to derive substream keys from label hashes.
std::uint64_t mix64(std::uint64_t z);

}  // namespace detail

// Deterministic seeded random stream with labeled substreams.
//
// A stream is identified by (seed, label_path). Two streams constructed with
// the same seed and split along the same labels produce bit-identical draw
// sequences; streams with different label paths are statistically
// independent. split() never advances the parent, so per-item parallel work
// that owns split(stream, item_key) reproduces the serial result exactly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  RngStream split(std::string_view label) const;
  RngStream split(std::uint64_t label) const;

  // Uniform in [0, 1), 53-bit resolution. Advances the stream by one draw.
  double next_uniform();

  // Raw 64-bit draw.
  std::uint64_t next_u64();

  // Uniform over {0, ..., n-1}; rejection-sampled so every outcome is
  // exactly equiprobable. Throws std::invalid_argument for n == 0.
  std::uint64_t choose_uniform(std::uint64_t n);

  // Standard normal via Box-Muller (cosine branch; two uniforms per draw).
  double next_normal();

  // Gamma(shape, scale=1) via Marsaglia-Tsang; shape < 1 boosted through the
  // power-of-uniform transform. Throws std::invalid_argument for shape <= 0.
  double sample_gamma(double shape);

  // Beta(alpha, beta) as g1/(g1+g2) with endpoints clamped away from {0,1}
  // by 1e-12 so downstream exponentiation never sees 0^0.
  double sample_beta(double alpha, double beta);

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& label_path() const { return label_path_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t key,
            std::vector<std::string> label_path);

  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::vector<std::string> label_path_;
};

}  // namespace pixmix
