#include <doctest.h>

#include <array>
#include <cmath>

#include "pixmix/augment.hpp"
#include "test_support.hpp"

using pixmix::AugConfig;
using pixmix::ImageTensor;
using pixmix::RngStream;

namespace {

ImageTensor snap_to_byte_grid(ImageTensor img) {
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    img.array()[i] =
        std::floor(img.array()[i] * 255.0f + 0.5f) / 255.0f;
  }
  return img;
}

}  // namespace

TEST_CASE("geometric identity parameters reproduce the input exactly") {
  RngStream s(1);
  auto img = testsup::random_image(s, 9, 11);
  CHECK((pixmix::rotate(img, 0.0).array() == img.array()).all());
  CHECK((pixmix::shear_x(img, 0.0).array() == img.array()).all());
  CHECK((pixmix::shear_y(img, 0.0).array() == img.array()).all());
  CHECK((pixmix::translate_x(img, 0.0).array() == img.array()).all());
  CHECK((pixmix::translate_y(img, 0.0).array() == img.array()).all());
}

TEST_CASE("rotate 90 degrees matches the index-permutation oracle") {
  RngStream s(2);
  const Eigen::Index n = 8;
  auto img = testsup::random_image(s, n, n);
  auto rotated = pixmix::rotate(img, 90.0);
  // Inverse mapping with theta=90: src_x = y, src_y = (n-1) - x.
  for (Eigen::Index y = 0; y < n; ++y) {
    for (Eigen::Index x = 0; x < n; ++x) {
      for (int c = 0; c < 3; ++c) {
        CHECK(rotated(y, x, c) ==
              doctest::Approx(img(n - 1 - x, y, c)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("rotate fills uncovered corners with zero") {
  auto img = testsup::constant_image(17, 17, 0.8f);
  auto out = pixmix::rotate(img, 45.0);
  // Center remains at the constant value; extreme corners fall outside.
  CHECK(out(8, 8, 0) == doctest::Approx(0.8f).epsilon(1e-6));
  CHECK(out(0, 0, 0) == 0.0f);
  CHECK(out(16, 16, 0) == 0.0f);
}

TEST_CASE("integer translate matches the index-shift oracle") {
  RngStream s(3);
  const Eigen::Index h = 6, w = 7;
  auto img = testsup::random_image(s, h, w);
  auto out = pixmix::translate_x(img, 2.0);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const float expected = (x + 2 < w) ? img(y, x + 2, 0) : 0.0f;
      CHECK(out(y, x, 0) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("translate by the full width clears the image") {
  RngStream s(4);
  auto img = testsup::random_image(s, 5, 5);
  auto out = pixmix::translate_x(img, 5.0);
  CHECK((out.array() == 0.0f).all());
  auto out2 = pixmix::translate_x(img, -5.0);
  CHECK((out2.array() == 0.0f).all());
}

TEST_CASE("posterize") {
  SUBCASE("keep_bits=8 leaves byte-grid images unchanged") {
    RngStream s(5);
    auto img = snap_to_byte_grid(testsup::random_image(s, 4, 4));
    auto out = pixmix::posterize(img, 8);
    CHECK((out.array() == img.array()).all());
  }
  SUBCASE("keep_bits=1 masks 0.9 to 128/255") {
    auto img = testsup::constant_image(2, 2, 0.9f);
    auto out = pixmix::posterize(img, 1);
    CHECK(out(0, 0, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-7));
  }
  SUBCASE("zero stays zero") {
    auto img = testsup::constant_image(2, 2, 0.0f);
    CHECK((pixmix::posterize(img, 3).array() == 0.0f).all());
  }
  SUBCASE("out-of-range bits rejected") {
    auto img = testsup::constant_image(1, 1, 0.5f);
    CHECK_THROWS_AS(pixmix::posterize(img, 0), std::invalid_argument);
    CHECK_THROWS_AS(pixmix::posterize(img, 9), std::invalid_argument);
  }
}

TEST_CASE("solarize") {
  auto low = testsup::constant_image(2, 2, 0.2f);
  CHECK((pixmix::solarize(low, 0.5f).array() == low.array()).all());
  auto high = testsup::constant_image(2, 2, 0.8f);
  auto out = pixmix::solarize(high, 0.5f);
  CHECK(out(0, 0, 0) == doctest::Approx(0.2f).epsilon(1e-6));
  // Threshold 0 inverts everything.
  auto inv = pixmix::solarize(low, 0.0f);
  CHECK(inv(0, 0, 0) == doctest::Approx(0.8f).epsilon(1e-6));
}

TEST_CASE("autocontrast") {
  SUBCASE("full-range channel unchanged") {
    ImageTensor img(2, 1);
    for (int c = 0; c < 3; ++c) {
      img(0, 0, c) = 0.0f;
      img(1, 0, c) = 1.0f;
    }
    CHECK((pixmix::autocontrast(img).array() == img.array()).all());
  }
  SUBCASE("[0.25, 0.75] stretches to [0, 1]") {
    ImageTensor img(3, 1);
    for (int c = 0; c < 3; ++c) {
      img(0, 0, c) = 0.25f;
      img(1, 0, c) = 0.5f;
      img(2, 0, c) = 0.75f;
    }
    auto out = pixmix::autocontrast(img);
    CHECK(out(0, 0, 0) == doctest::Approx(0.0f));
    CHECK(out(1, 0, 0) == doctest::Approx(0.5f).epsilon(1e-6));
    CHECK(out(2, 0, 0) == doctest::Approx(1.0f));
  }
  SUBCASE("constant channel unchanged") {
    auto img = testsup::constant_image(4, 4, 0.3f);
    CHECK((pixmix::autocontrast(img).array() == img.array()).all());
  }
}

TEST_CASE("equalize") {
  SUBCASE("constant image unchanged") {
    auto img = testsup::constant_image(4, 4, 0.42f);
    CHECK((pixmix::equalize(img).array() == img.array()).all());
  }
  SUBCASE("balanced two-level image keeps two distinct levels") {
    ImageTensor img(2, 1);
    for (int c = 0; c < 3; ++c) {
      img(0, 0, c) = 0.0f;
      img(1, 0, c) = 1.0f;
    }
    auto out = pixmix::equalize(img);
    CHECK(out(0, 0, 0) == 0.0f);
    CHECK(out(1, 0, 0) == 1.0f);
  }
  SUBCASE("flattens the byte CDF of a skewed ramp") {
    const Eigen::Index n = 64;
    ImageTensor img(n, n);
    for (Eigen::Index y = 0; y < n; ++y) {
      for (Eigen::Index x = 0; x < n; ++x) {
        const float t = static_cast<float>(y * n + x) / (n * n - 1);
        for (int c = 0; c < 3; ++c) img(y, x, c) = t * t * t;
      }
    }
    auto out = pixmix::equalize(img);
    auto cdf_sup_distance = [&](const ImageTensor& im) {
      std::array<double, 256> hist{};
      const auto chan = im.channel(0);
      for (Eigen::Index i = 0; i < chan.size(); ++i) {
        const int byte = static_cast<int>(
            std::floor(static_cast<double>(chan[i]) * 255.0 + 0.5));
        hist[std::clamp(byte, 0, 255)] += 1.0;
      }
      double acc = 0.0, sup = 0.0;
      const double total = static_cast<double>(chan.size());
      for (int i = 0; i < 256; ++i) {
        acc += hist[i] / total;
        sup = std::max(sup, std::abs(acc - (i + 1) / 256.0));
      }
      return sup;
    };
    CHECK(cdf_sup_distance(out) < cdf_sup_distance(img));
  }
}

TEST_CASE("random_augment selects ops uniformly and preserves shape") {
  RngStream s(123);
  auto img = testsup::random_image(s, 8, 8);
  AugConfig cfg;
  auto stream = RngStream(9).split("aug");
  std::array<int, pixmix::kAugOpCount> counts{};
  const int trials = 9000;
  for (int i = 0; i < trials; ++i) {
    // Count the op draw the same way random_augment does.
    auto probe = stream;
    counts[probe.choose_uniform(pixmix::kAugOpCount)]++;
    auto out = pixmix::random_augment(img, stream, cfg);
    REQUIRE(out.height() == img.height());
    REQUIRE(out.width() == img.width());
  }
  for (int k = 0; k < pixmix::kAugOpCount; ++k) {
    CHECK(std::abs(counts[k] / static_cast<double>(trials) - 1.0 / 9) < 0.02);
  }
}

TEST_CASE("random_augment is deterministic and range-preserving") {
  RngStream src(55);
  auto img = testsup::random_image(src, 10, 10);
  AugConfig cfg;
  cfg.severity = 5;
  auto s1 = RngStream(4).split("a");
  auto s2 = RngStream(4).split("a");
  for (int i = 0; i < 50; ++i) {
    auto a = pixmix::random_augment(img, s1, cfg);
    auto b = pixmix::random_augment(img, s2, cfg);
    CHECK((a.array() == b.array()).all());
    CHECK(a.array().minCoeff() >= 0.0f);
    CHECK(a.array().maxCoeff() <= 1.0f);
  }
}

TEST_CASE("random_augment severity validation") {
  auto img = testsup::constant_image(2, 2, 0.5f);
  RngStream s(1);
  AugConfig cfg;
  cfg.severity = 0;
  CHECK_THROWS_AS(pixmix::random_augment(img, s, cfg), std::invalid_argument);
  cfg.severity = 6;
  CHECK_THROWS_AS(pixmix::random_augment(img, s, cfg), std::invalid_argument);
}
