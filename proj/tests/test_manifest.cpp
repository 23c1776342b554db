#include <doctest.h>

#include <array>
#include <filesystem>

#include "pixmix/errors.hpp"
#include "pixmix/manifest.hpp"
#include "pixmix/sha256.hpp"
#include "test_support.hpp"

using pixmix::MixingManifest;
using pixmix::RngStream;
using testsup::TempDir;

TEST_CASE("sha256 known vectors") {
  CHECK(pixmix::sha256_hex("", 0) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  CHECK(pixmix::sha256_hex(abc.data(), abc.size()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("build_manifest scans, sorts and checksums") {
  TempDir tmp("manifest");
  const auto dir = tmp.path() / "pics";
  testsup::write_png_corpus(dir, 3, 4, 7);
  auto result = pixmix::build_manifest({{dir, "fractal"}}, tmp.path());
  REQUIRE(result.manifest.entries.size() == 3);
  CHECK(result.errors.empty());
  for (std::size_t i = 1; i < result.manifest.entries.size(); ++i) {
    CHECK(result.manifest.entries[i - 1].path <
          result.manifest.entries[i].path);
  }
  for (const auto& e : result.manifest.entries) {
    CHECK(e.source == "fractal");
    CHECK(e.width == 4);
    CHECK(e.height == 4);
    CHECK(e.sha256 == pixmix::sha256_file(result.manifest.resolve(e)));
  }
}

TEST_CASE("build_manifest on an empty directory fails") {
  TempDir tmp("empty");
  const auto dir = tmp.path() / "pics";
  std::filesystem::create_directories(dir);
  CHECK_THROWS_AS(pixmix::build_manifest({{dir, "other"}}, tmp.path()),
                  pixmix::SchemaError);
}

TEST_CASE("one corrupt file among many is reported, not fatal") {
  TempDir tmp("corrupt");
  const auto dir = tmp.path() / "pics";
  testsup::write_png_corpus(dir, 150, 4, 11);
  testsup::write_bytes(dir / "zz_broken.png", "not a png at all");
  auto result = pixmix::build_manifest({{dir, "feature_vis"}}, tmp.path());
  CHECK(result.manifest.entries.size() == 150);
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].path.find("zz_broken.png") != std::string::npos);
}

TEST_CASE("more than 1% corrupt files fails the build") {
  TempDir tmp("corrupt2");
  const auto dir = tmp.path() / "pics";
  testsup::write_png_corpus(dir, 10, 4, 13);
  testsup::write_bytes(dir / "zz_broken.png", "not a png");
  CHECK_THROWS_AS(pixmix::build_manifest({{dir, "fractal"}}, tmp.path()),
                  pixmix::SchemaError);
}

TEST_CASE("manifest save/load round trip is byte-stable") {
  TempDir tmp("roundtrip");
  const auto dir = tmp.path() / "pics";
  testsup::write_png_corpus(dir, 5, 4, 17);
  auto result = pixmix::build_manifest({{dir, "fractal"}}, tmp.path());
  const auto file_a = tmp.path() / "a.json";
  const auto file_b = tmp.path() / "b.json";
  pixmix::save_manifest(result.manifest, file_a);
  auto loaded = pixmix::load_manifest(file_a);
  REQUIRE(loaded.entries.size() == result.manifest.entries.size());
  for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
    CHECK(loaded.entries[i].path == result.manifest.entries[i].path);
    CHECK(loaded.entries[i].sha256 == result.manifest.entries[i].sha256);
  }
  pixmix::save_manifest(loaded, file_b);
  CHECK(pixmix::sha256_file(file_a) == pixmix::sha256_file(file_b));
}

TEST_CASE("load_manifest rejects bad documents") {
  TempDir tmp("badmanifest");
  const auto file = tmp.path() / "m.json";
  testsup::write_bytes(file, "{ this is not json");
  CHECK_THROWS_AS(pixmix::load_manifest(file), pixmix::DecodeError);
  testsup::write_bytes(file, R"({"version": 99, "entries": []})");
  CHECK_THROWS_AS(pixmix::load_manifest(file), pixmix::SchemaError);
  CHECK_THROWS_AS(pixmix::load_manifest(tmp.path() / "missing.json"),
                  pixmix::IoError);
}

TEST_CASE("sample_picture") {
  TempDir tmp("sample");
  const auto dir = tmp.path() / "pics";
  testsup::write_png_corpus(dir, 10, 8, 19);
  auto manifest = pixmix::build_manifest({{dir, "fractal"}}, tmp.path()).manifest;

  SUBCASE("single entry is always chosen") {
    MixingManifest single;
    single.root_dir = manifest.root_dir;
    single.entries = {manifest.entries[0]};
    auto stream = RngStream(1).split("s");
    for (int i = 0; i < 20; ++i) {
      CHECK(pixmix::sample_entry_index(single, stream) == 0);
    }
  }
  SUBCASE("entry choice is uniform") {
    auto stream = RngStream(2).split("s");
    std::array<int, 10> counts{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      counts[pixmix::sample_entry_index(manifest, stream)]++;
    }
    for (int k = 0; k < 10; ++k) {
      CHECK(std::abs(counts[k] / static_cast<double>(n) - 0.1) < 0.01);
    }
  }
  SUBCASE("output dims and range") {
    auto stream = RngStream(3).split("s");
    pixmix::PictureCache cache;
    for (int i = 0; i < 25; ++i) {
      auto img = pixmix::sample_picture(manifest, stream, 6, &cache);
      REQUIRE(img.height() == 6);
      REQUIRE(img.width() == 6);
      CHECK(img.array().minCoeff() >= 0.0f);
      CHECK(img.array().maxCoeff() <= 1.0f);
    }
  }
  SUBCASE("vanished file raises an io error naming the entry") {
    MixingManifest gone = manifest;
    gone.entries.resize(1);
    std::filesystem::remove(gone.resolve(gone.entries[0]));
    auto stream = RngStream(4).split("s");
    CHECK_THROWS_WITH_AS(pixmix::sample_picture(gone, stream, 6),
                         doctest::Contains(gone.entries[0].path.c_str()),
                         pixmix::IoError);
  }
  SUBCASE("empty manifest rejected") {
    MixingManifest empty;
    auto stream = RngStream(5).split("s");
    CHECK_THROWS_AS(pixmix::sample_picture(empty, stream, 6),
                    std::invalid_argument);
  }
}
