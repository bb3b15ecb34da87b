#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trojanq::detail {

template <typename T>
T load_le(std::span<const std::byte> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(std::to_integer<std::uint8_t>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

template <typename T>
void store_le(std::vector<std::byte>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFF));
  }
}

// dim0 * dim1 elements of item_size bytes, or MalformedHeader at `offset`
// if the product overflows.
std::size_t checked_count(std::size_t dim0, std::size_t dim1, std::size_t item_size,
                          std::size_t offset);

// Little-endian IEEE floats (4 or 8 bytes wide) widened to double.
std::vector<double> decode_floats(std::span<const std::byte> bytes, std::size_t item_size);

std::vector<std::byte> read_file(const std::filesystem::path& path);

// Writes to a temporary sibling then renames over `path`.
void atomic_write(const std::filesystem::path& path, std::span<const std::byte> bytes);
void atomic_write(const std::filesystem::path& path, std::string_view text);

}  // namespace trojanq::detail
