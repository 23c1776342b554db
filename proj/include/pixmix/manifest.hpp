#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "pixmix/image.hpp"
#include "pixmix/rng.hpp"

namespace pixmix {

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string path;  // relative to root_dir when possible
  std::string source;  // "fractal", "feature_vis" or "other"
  std::string sha256;
  int width = 0;
  int height = 0;
};

// Catalog of mixing pictures. Entries are kept sorted by path so the file is
// a pure function of the scanned directory trees.
struct MixingManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path root_dir;

  std::filesystem::path resolve(const ManifestEntry& entry) const {
    std::filesystem::path p(entry.path);
    return p.is_absolute() ? p : root_dir / p;
  }
};

struct ManifestFileError {
  std::string path;
  std::string message;
};

struct ManifestBuildResult {
  MixingManifest manifest;
  std::vector<ManifestFileError> errors;
};

// Recursively scans each directory for .png files, decoding every one to
// verify it and record its dimensions. Entry paths are stored relative to
// base_dir (where the manifest file will live). Throws SchemaError when no
// entries remain or more than 1% of the scanned files fail.
ManifestBuildResult build_manifest(
    const std::vector<std::pair<std::filesystem::path, std::string>>& dirs,
    const std::filesystem::path& base_dir);

void save_manifest(const MixingManifest& manifest,
                   const std::filesystem::path& file);
MixingManifest load_manifest(const std::filesystem::path& file);

// Decode-once cache so repeated sampling does not re-read files. Safe for
// concurrent use; decoded tensors are immutable.
class PictureCache {
 public:
  std::shared_ptr<const ImageTensor> get(const std::filesystem::path& path);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const ImageTensor>> cache_;
};

// Uniform choice over manifest entries. Throws std::invalid_argument on an
// empty manifest.
std::size_t sample_entry_index(const MixingManifest& manifest,
                               RngStream& stream);

// Uniformly samples an entry, loads it and random-resized-crops it to
// target_size x target_size with area fraction in [0.3, 1.0].
ImageTensor sample_picture(const MixingManifest& manifest, RngStream& stream,
                           Eigen::Index target_size,
                           PictureCache* cache = nullptr);

}  // namespace pixmix
