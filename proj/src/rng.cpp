#include "pixmix/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pixmix {

namespace detail {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox_round(
    const std::array<std::uint32_t, 4>& ctr,
    const std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
  const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
          static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
          static_cast<std::uint32_t>(p0)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    ctr = philox_round(ctr, key);
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

namespace {

// FNV-1a over the label bytes, salted with a type tag and the length so that
// split(s, "x") then "y" can never coincide with split(s, "xy").
std::uint64_t hash_label(char tag, const void* data, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  h ^= static_cast<std::uint64_t>(tag);
  h *= 1099511628211ull;
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  h ^= static_cast<std::uint64_t>(n);
  return detail::mix64(h);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed)
    : seed_(seed), key_(detail::mix64(seed)) {}

RngStream::RngStream(std::uint64_t seed, std::uint64_t key,
                     std::vector<std::string> label_path)
    : seed_(seed), key_(key), label_path_(std::move(label_path)) {}

RngStream RngStream::split(std::string_view label) const {
  const std::uint64_t h = hash_label('s', label.data(), label.size());
  auto path = label_path_;
  path.emplace_back(label);
  return RngStream(seed_, detail::mix64(key_ ^ h), std::move(path));
}

RngStream RngStream::split(std::uint64_t label) const {
  std::uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(label >> (8 * i));
  const std::uint64_t h = hash_label('i', bytes, sizeof bytes);
  auto path = label_path_;
  path.push_back(std::to_string(label));
  return RngStream(seed_, detail::mix64(key_ ^ h), std::move(path));
}

std::uint64_t RngStream::next_u64() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_),
      static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
  ++counter_;
  const auto block = detail::philox4x32(ctr, key);
  return static_cast<std::uint64_t>(block[0]) |
         (static_cast<std::uint64_t>(block[1]) << 32);
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::choose_uniform(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("choose_uniform: n must be >= 1");
  if (n == 1) return 0;
  // Reject draws above the largest multiple of n so outcomes stay exact.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() / n * n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double RngStream::next_normal() {
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::sample_gamma(double shape) {
  if (!(shape > 0.0)) {
    throw std::invalid_argument("sample_gamma: shape must be > 0");
  }
  if (shape < 1.0) {
    double u = next_uniform();
    while (u == 0.0) u = next_uniform();
    return sample_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia & Tsang (2000) squeeze method, valid for shape >= 1.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = next_normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = next_uniform();
    const double xx = x * x;
    if (u < 1.0 - 0.0331 * xx * xx) return d * v;
    if (std::log(u) < 0.5 * xx + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::sample_beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("sample_beta: parameters must be > 0");
  }
  const double g1 = sample_gamma(alpha);
  const double g2 = sample_gamma(beta);
  const double sum = g1 + g2;
  double x = sum > 0.0 ? g1 / sum : 0.5;
  constexpr double kEps = 1e-12;
  if (x < kEps) x = kEps;
  if (x > 1.0 - kEps) x = 1.0 - kEps;
  return x;
}

}  // namespace pixmix
