#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eim::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

std::string base64_encode(const std::uint8_t* data, std::size_t n);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Doubles <-> little-endian byte stream, for checkpoint payloads.
std::string encode_doubles_base64(const std::vector<double>& values);
std::vector<double> decode_doubles_base64(const std::string& text);

// Fixed-precision decimal formatting used by canonical serializers.
std::string format_fixed(double v, int decimals = 6);

// FNV-1a 64-bit over raw bytes; chainable via the `h` parameter.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = kFnvOffset);

// 1-based line number of a byte offset in `text`, for parse diagnostics.
int line_of_offset(const std::string& text, std::size_t offset);

}  // namespace eim::io
