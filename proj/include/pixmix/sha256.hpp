#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

namespace pixmix {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace pixmix
