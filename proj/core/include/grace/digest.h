#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace grace {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

// First 8 bytes of SHA-256, big-endian.
std::uint64_t digest64(std::string_view data);

}  // namespace grace
