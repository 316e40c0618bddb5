#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace uni {

using Json = nlohmann::json;
using Bytes = std::vector<std::uint8_t>;

std::string to_hex(std::span<const std::uint8_t> data);
/// Strict lowercase hex; throws Error(Malformed) on anything else.
Bytes from_hex(std::string_view hex);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws Error(Malformed) on invalid input.
Bytes base64_decode(std::string_view text);

Bytes to_bytes(std::string_view text);
std::string to_string(std::span<const std::uint8_t> data);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);
std::uint32_t crc32(std::string_view text);
std::string crc32_hex(std::string_view text);

/// Canonical text of a JSON value: sorted object keys, no whitespace.
std::string canonical(const Json& value);

namespace fsutil {

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling, fsyncs, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
void fsync_dir(const std::filesystem::path& dir);

/// Append-only file handle; every append is followed by fdatasync when
/// `durable` is set.
class AppendFile {
 public:
  AppendFile() = default;
  AppendFile(const std::filesystem::path& path, bool durable);
  ~AppendFile();
  AppendFile(AppendFile&& other) noexcept;
  AppendFile& operator=(AppendFile&& other) noexcept;
  AppendFile(const AppendFile&) = delete;
  AppendFile& operator=(const AppendFile&) = delete;

  bool is_open() const noexcept { return fd_ >= 0; }
  void append(std::string_view data);
  void close();

 private:
  int fd_ = -1;
  bool durable_ = true;
};

}  // namespace fsutil
}  // namespace uni
