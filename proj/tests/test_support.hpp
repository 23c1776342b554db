#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include "pixmix/image.hpp"
#include "pixmix/png_io.hpp"
#include "pixmix/rng.hpp"

namespace testsup {

// Unique scratch directory, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("pixmix_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

inline pixmix::ImageTensor random_image(pixmix::RngStream& stream,
                                        Eigen::Index h, Eigen::Index w) {
  pixmix::ImageTensor img(h, w);
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    img.array()[i] = static_cast<float>(stream.next_uniform());
  }
  return img;
}

inline pixmix::ImageTensor constant_image(Eigen::Index h, Eigen::Index w,
                                          float value) {
  pixmix::ImageTensor img(h, w);
  img.array().setConstant(value);
  return img;
}

// Writes `count` small random PNGs into dir, named img_000.png etc.
inline void write_png_corpus(const std::filesystem::path& dir, int count,
                             Eigen::Index size, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  pixmix::RngStream root(seed);
  for (int i = 0; i < count; ++i) {
    auto stream = root.split(static_cast<std::uint64_t>(i));
    char name[32];
    std::snprintf(name, sizeof name, "img_%03d.png", i);
    pixmix::save_png(random_image(stream, size, size), dir / name);
  }
}

inline void write_bytes(const std::filesystem::path& path,
                        const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace testsup
