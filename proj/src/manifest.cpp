#include "pixmix/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "pixmix/errors.hpp"
#include "pixmix/png_io.hpp"
#include "pixmix/sha256.hpp"

namespace pixmix {

namespace fs = std::filesystem;
using nlohmann::json;

ManifestBuildResult build_manifest(
    const std::vector<std::pair<fs::path, std::string>>& dirs,
    const fs::path& base_dir) {
  ManifestBuildResult result;
  result.manifest.root_dir = base_dir;

  std::size_t scanned = 0;
  for (const auto& [dir, source] : dirs) {
    if (source != "fractal" && source != "feature_vis" && source != "other") {
      throw std::invalid_argument("build_manifest: unknown source tag '" +
                                  source + "'");
    }
    if (!fs::is_directory(dir)) {
      throw IoError("build_manifest: not a directory: " + dir.string());
    }
    for (const auto& item : fs::recursive_directory_iterator(dir)) {
      if (!item.is_regular_file() || item.path().extension() != ".png") {
        continue;
      }
      ++scanned;
      const fs::path stored = item.path().lexically_proximate(base_dir);
      try {
        const ImageTensor img = load_png(item.path());
        ManifestEntry entry;
        entry.path = stored.generic_string();
        entry.source = source;
        entry.sha256 = sha256_file(item.path());
        entry.width = static_cast<int>(img.width());
        entry.height = static_cast<int>(img.height());
        result.manifest.entries.push_back(std::move(entry));
      } catch (const std::exception& e) {
        result.errors.push_back({stored.generic_string(), e.what()});
      }
    }
  }

  std::sort(result.manifest.entries.begin(), result.manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.path < b.path;
            });
  std::sort(result.errors.begin(), result.errors.end(),
            [](const ManifestFileError& a, const ManifestFileError& b) {
              return a.path < b.path;
            });

  if (result.manifest.entries.empty()) {
    throw SchemaError("build_manifest: no usable .png entries found");
  }
  if (result.errors.size() * 100 > scanned) {
    throw SchemaError("build_manifest: " + std::to_string(result.errors.size()) +
                      " of " + std::to_string(scanned) +
                      " files failed to decode (limit is 1%); first failure: " +
                      result.errors.front().path);
  }
  return result;
}

void save_manifest(const MixingManifest& manifest, const fs::path& file) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"path", e.path},
                       {"source", e.source},
                       {"sha256", e.sha256},
                       {"w", e.width},
                       {"h", e.height}});
  }
  const json doc = {{"version", kManifestVersion}, {"entries", entries}};
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + file.string());
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("manifest write failed: " + file.string());
}

MixingManifest load_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + file.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DecodeError("malformed manifest " + file.string() + ": " + e.what());
  }
  if (!doc.contains("version") || doc["version"] != kManifestVersion) {
    throw SchemaError("manifest " + file.string() +
                      ": unsupported or missing version");
  }
  MixingManifest manifest;
  manifest.root_dir = file.has_parent_path() ? file.parent_path() : ".";
  for (const auto& e : doc.at("entries")) {
    ManifestEntry entry;
    entry.path = e.at("path").get<std::string>();
    entry.source = e.at("source").get<std::string>();
    entry.sha256 = e.at("sha256").get<std::string>();
    entry.width = e.at("w").get<int>();
    entry.height = e.at("h").get<int>();
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::shared_ptr<const ImageTensor> PictureCache::get(const fs::path& path) {
  const std::string key = path.string();
  std::lock_guard lock(mu_);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto img = std::make_shared<const ImageTensor>(load_png(path));
  cache_.emplace(key, img);
  return img;
}

std::size_t sample_entry_index(const MixingManifest& manifest,
                               RngStream& stream) {
  if (manifest.entries.empty()) {
    throw std::invalid_argument("sample from empty mixing manifest");
  }
  return static_cast<std::size_t>(
      stream.choose_uniform(manifest.entries.size()));
}

ImageTensor sample_picture(const MixingManifest& manifest, RngStream& stream,
                           Eigen::Index target_size, PictureCache* cache) {
  const auto& entry = manifest.entries[sample_entry_index(manifest, stream)];
  const fs::path path = manifest.resolve(entry);
  ImageTensor img;
  if (cache != nullptr) {
    img = *cache->get(path);
  } else {
    img = load_png(path);
  }
  CropConfig crop;
  crop.area_fraction_range = {0.3, 1.0};
  return random_resized_crop(img, stream, target_size, crop);
}

}  // namespace pixmix
