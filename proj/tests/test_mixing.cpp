#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pixmix/errors.hpp"
#include "pixmix/mixing.hpp"
#include "pixmix/sha256.hpp"
#include "test_support.hpp"

using pixmix::ImageTensor;
using pixmix::MixCoefficients;
using pixmix::MixingManifest;
using pixmix::PixMixConfig;
using pixmix::RngStream;
using testsup::TempDir;

TEST_CASE("conic coefficients follow Beta(beta,1) and Beta(1,beta)") {
  auto stream = RngStream(1).split("coeffs");
  const double beta = 3.0;
  const int n = 100000;
  double sum_a = 0.0, sum_b = 0.0;
  int over_one = 0, under_one = 0;
  for (int i = 0; i < n; ++i) {
    auto c = pixmix::sample_conic_coeffs(stream, beta);
    REQUIRE(c.a > 0.0);
    REQUIRE(c.a < 1.0);
    REQUIRE(c.b > 0.0);
    REQUIRE(c.b < 1.0);
    sum_a += c.a;
    sum_b += c.b;
    if (i < 1000) {
      if (c.a + c.b > 1.0) ++over_one;
      if (c.a + c.b < 1.0) ++under_one;
    }
  }
  CHECK(std::abs(sum_a / n - 0.75) < 0.01);
  CHECK(std::abs(sum_b / n - 0.25) < 0.01);
  // Conic, not convex: both a+b > 1 and a+b < 1 occur.
  CHECK(over_one > 0);
  CHECK(under_one > 0);
  CHECK_THROWS_AS(pixmix::sample_conic_coeffs(stream, 0.0),
                  std::invalid_argument);
}

TEST_CASE("mix_additive") {
  RngStream s(2);
  auto x1 = testsup::random_image(s, 6, 6);
  auto x2 = testsup::random_image(s, 6, 6);
  SUBCASE("identity coefficients are exact") {
    auto keep_first = pixmix::mix_additive(x1, x2, {1.0, 0.0});
    CHECK((keep_first.array() == x1.array()).all());
    auto keep_second = pixmix::mix_additive(x1, x2, {0.0, 1.0});
    CHECK((keep_second.array() == x2.array()).all());
  }
  SUBCASE("hand example: 0.75/0.25 at a=b=0.5 gives 0.5") {
    auto a = testsup::constant_image(2, 2, 0.75f);
    auto b = testsup::constant_image(2, 2, 0.25f);
    auto out = pixmix::mix_additive(a, b, {0.5, 0.5});
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      CHECK(out.array()[i] == doctest::Approx(0.5f).epsilon(1e-6));
    }
  }
  SUBCASE("dimension mismatch rejected") {
    auto small = testsup::constant_image(3, 3, 0.5f);
    CHECK_THROWS_AS(pixmix::mix_additive(x1, small, {0.5, 0.5}),
                    std::invalid_argument);
  }
  SUBCASE("negative coefficients rejected") {
    CHECK_THROWS_AS(pixmix::mix_additive(x1, x2, {-0.1, 0.5}),
                    std::invalid_argument);
  }
}

TEST_CASE("mix_multiplicative") {
  RngStream s(3);
  auto x1 = testsup::random_image(s, 6, 6);
  auto x2 = testsup::random_image(s, 6, 6);
  SUBCASE("identity coefficients are exact above the epsilon floor") {
    // random_image values are uniform in [0,1); push them above 5e-7.
    x1.array() = x1.array().max(1e-3f);
    x2.array() = x2.array().max(1e-3f);
    auto keep_first = pixmix::mix_multiplicative(x1, x2, {1.0, 0.0});
    CHECK((keep_first.array() == x1.array()).all());
    auto keep_second = pixmix::mix_multiplicative(x1, x2, {0.0, 1.0});
    CHECK((keep_second.array() == x2.array()).all());
  }
  SUBCASE("hand example: v1=1, v2=2, a=0, b=1 gives 1.0") {
    auto a = testsup::constant_image(2, 2, 0.5f);
    auto b = testsup::constant_image(2, 2, 1.0f);
    auto out = pixmix::mix_multiplicative(a, b, {0.0, 1.0});
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      CHECK(out.array()[i] == doctest::Approx(1.0f).epsilon(1e-6));
    }
  }
  SUBCASE("equal inputs with a+b=1 reproduce the input") {
    auto x = testsup::constant_image(3, 3, 0.6f);
    auto out = pixmix::mix_multiplicative(x, x, {0.3, 0.7});
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      CHECK(out.array()[i] == doctest::Approx(0.6f).epsilon(1e-6));
    }
  }
  SUBCASE("fuzzed mixes stay in [0,1]") {
    auto coeff_stream = RngStream(4).split("f");
    for (int i = 0; i < 500; ++i) {
      MixCoefficients c{coeff_stream.next_uniform() * 2.0,
                        coeff_stream.next_uniform() * 2.0};
      auto m1 = pixmix::mix_multiplicative(x1, x2, c);
      auto m2 = pixmix::mix_additive(x1, x2, c);
      CHECK(m1.array().minCoeff() >= 0.0f);
      CHECK(m1.array().maxCoeff() <= 1.0f);
      CHECK(m2.array().minCoeff() >= 0.0f);
      CHECK(m2.array().maxCoeff() <= 1.0f);
    }
  }
}

TEST_CASE("repeated mixing with (1,0) degenerates to the initial branch") {
  RngStream s(5);
  auto x = testsup::random_image(s, 8, 8);
  auto other = testsup::random_image(s, 8, 8);
  auto running = x;
  for (int i = 0; i < 10; ++i) {
    running = i % 2 == 0 ? pixmix::mix_additive(running, other, {1.0, 0.0})
                         : pixmix::mix_multiplicative(running, other, {1.0, 0.0});
  }
  CHECK((running.array() == x.array()).all());
}

namespace {

struct PipelineFixture {
  TempDir tmp{"pipeline"};
  MixingManifest manifest;
  PipelineFixture() {
    const auto dir = tmp.path() / "mixset";
    testsup::write_png_corpus(dir, 4, 16, 99);
    manifest = pixmix::build_manifest({{dir, "fractal"}}, tmp.path()).manifest;
  }
};

}  // namespace

TEST_CASE("pixmix control flow") {
  PipelineFixture fx;
  RngStream src(6);
  auto img = testsup::random_image(src, 16, 16);
  PixMixConfig cfg;
  cfg.target_size = 16;

  SUBCASE("k=0 forces zero rounds") {
    PixMixConfig zero = cfg;
    zero.k = 0;
    auto stream = RngStream(7).split("p");
    for (int i = 0; i < 50; ++i) {
      pixmix::PixmixTrace trace;
      auto out = pixmix::pixmix(img, fx.manifest, zero, stream, nullptr, &trace);
      CHECK(trace.rounds == 0);
      REQUIRE(out.height() == 16);
    }
  }
  SUBCASE("round count is uniform over {0..4}") {
    auto stream = RngStream(8).split("p");
    pixmix::PictureCache cache;
    int zero_rounds = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      pixmix::PixmixTrace trace;
      (void)pixmix::pixmix(img, fx.manifest, cfg, stream, &cache, &trace);
      if (trace.rounds == 0) ++zero_rounds;
    }
    CHECK(std::abs(zero_rounds / static_cast<double>(n) - 0.2) < 0.015);
  }
  SUBCASE("input_only mode never touches the manifest") {
    PixMixConfig mode_cfg = cfg;
    mode_cfg.mode = pixmix::MixMode::kInputOnly;
    auto stream = RngStream(9).split("p");
    MixingManifest empty;  // also allowed to be empty in this mode
    for (int i = 0; i < 200; ++i) {
      pixmix::PixmixTrace trace;
      (void)pixmix::pixmix(img, empty, mode_cfg, stream, nullptr, &trace);
      CHECK(trace.manifest_samples == 0);
    }
  }
  SUBCASE("mixset_only mode never augments inside the loop") {
    PixMixConfig mode_cfg = cfg;
    mode_cfg.mode = pixmix::MixMode::kMixsetOnly;
    auto stream = RngStream(10).split("p");
    pixmix::PictureCache cache;
    for (int i = 0; i < 200; ++i) {
      pixmix::PixmixTrace trace;
      (void)pixmix::pixmix(img, fx.manifest, mode_cfg, stream, &cache, &trace);
      CHECK(trace.loop_augment_calls == 0);
      CHECK(trace.manifest_samples == trace.rounds);
    }
  }
  SUBCASE("empty manifest rejected outside input_only") {
    MixingManifest empty;
    auto stream = RngStream(11).split("p");
    CHECK_THROWS_AS(pixmix::pixmix(img, empty, cfg, stream),
                    std::invalid_argument);
  }
  SUBCASE("wrong input size rejected") {
    auto small = testsup::random_image(src, 8, 8);
    auto stream = RngStream(12).split("p");
    CHECK_THROWS_AS(pixmix::pixmix(small, fx.manifest, cfg, stream),
                    std::invalid_argument);
  }
  SUBCASE("deterministic under a fixed stream") {
    auto s1 = RngStream(13).split("p");
    auto s2 = RngStream(13).split("p");
    for (int i = 0; i < 20; ++i) {
      auto a = pixmix::pixmix(img, fx.manifest, cfg, s1);
      auto b = pixmix::pixmix(img, fx.manifest, cfg, s2);
      CHECK((a.array() == b.array()).all());
    }
  }
  SUBCASE("output in range over fuzzed runs") {
    auto stream = RngStream(14).split("p");
    pixmix::PictureCache cache;
    for (int i = 0; i < 300; ++i) {
      auto out = pixmix::pixmix(img, fx.manifest, cfg, stream, &cache);
      REQUIRE(out.height() == img.height());
      REQUIRE(out.width() == img.width());
      CHECK(out.array().minCoeff() >= 0.0f);
      CHECK(out.array().maxCoeff() <= 1.0f);
    }
  }
}

TEST_CASE("presets carry the published hyperparameters") {
  auto cifar = pixmix::preset("cifar");
  CHECK(cifar.k == 4);
  CHECK(cifar.beta == 3.0);
  CHECK(cifar.target_size == 32);
  auto imagenet = pixmix::preset("imagenet");
  CHECK(imagenet.k == 4);
  CHECK(imagenet.beta == 4.0);
  CHECK(imagenet.target_size == 224);
  CHECK(imagenet.k == cifar.k);
  CHECK_THROWS_AS(pixmix::preset("mnist"), std::invalid_argument);
}

TEST_CASE("augment_dataset mirrors names and reproduces bit-identically") {
  PipelineFixture fx;
  const auto input = fx.tmp.path() / "input";
  testsup::write_png_corpus(input, 10, 16, 123);
  PixMixConfig cfg;
  cfg.target_size = 16;

  auto checksum_tree = [](const std::filesystem::path& dir) {
    std::vector<std::string> sums;
    for (const auto& item :
         std::filesystem::recursive_directory_iterator(dir)) {
      if (item.is_regular_file()) {
        sums.push_back(item.path().filename().string() + ":" +
                       pixmix::sha256_file(item.path()));
      }
    }
    std::sort(sums.begin(), sums.end());
    return sums;
  };

  const auto out_a = fx.tmp.path() / "out_a";
  auto summary = pixmix::augment_dataset(input, fx.manifest, cfg, RngStream(0),
                                         out_a, 1);
  CHECK(summary.count == 10);
  CHECK(summary.errors.empty());
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%03d.png", i);
    CHECK(std::filesystem::exists(out_a / name));
  }

  const auto out_b = fx.tmp.path() / "out_b";
  pixmix::augment_dataset(input, fx.manifest, cfg, RngStream(0), out_b, 1);
  CHECK(checksum_tree(out_a) == checksum_tree(out_b));

  const auto out_c = fx.tmp.path() / "out_c";
  pixmix::augment_dataset(input, fx.manifest, cfg, RngStream(0), out_c, 8);
  CHECK(checksum_tree(out_a) == checksum_tree(out_c));

  // A different seed changes the tree.
  const auto out_d = fx.tmp.path() / "out_d";
  pixmix::augment_dataset(input, fx.manifest, cfg, RngStream(1), out_d, 1);
  CHECK(checksum_tree(out_a) != checksum_tree(out_d));
}

TEST_CASE("augment_dataset collects per-file errors") {
  PipelineFixture fx;
  const auto input = fx.tmp.path() / "input_bad";
  testsup::write_png_corpus(input, 3, 16, 5);
  testsup::write_bytes(input / "broken.png", "nope");
  PixMixConfig cfg;
  cfg.target_size = 16;
  auto summary = pixmix::augment_dataset(input, fx.manifest, cfg, RngStream(0),
                                         fx.tmp.path() / "out_bad", 2);
  CHECK(summary.count == 3);
  REQUIRE(summary.errors.size() == 1);
  CHECK(summary.errors[0].path == "broken.png");
}
