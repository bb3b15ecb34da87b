#include "byte_io.hpp"

#include <atomic>
#include <fstream>
#include <system_error>
#include <thread>

#include "trojanq/atomic_file.hpp"
#include "trojanq/error.hpp"

namespace trojanq::detail {

std::size_t checked_count(std::size_t dim0, std::size_t dim1, std::size_t item_size,
                          std::size_t offset) {
  if (dim0 != 0 && dim1 > SIZE_MAX / dim0) {
    throw Error(ErrorCode::MalformedHeader, "tensor shape overflows", offset);
  }
  const std::size_t count = dim0 * dim1;
  if (item_size != 0 && count > SIZE_MAX / item_size) {
    throw Error(ErrorCode::MalformedHeader, "tensor byte size overflows", offset);
  }
  return count;
}

std::vector<double> decode_floats(std::span<const std::byte> bytes, std::size_t item_size) {
  std::vector<double> out(bytes.size() / item_size);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (item_size == 8) {
      out[i] = std::bit_cast<double>(load_le<std::uint64_t>(bytes, i * 8));
    } else {
      out[i] = static_cast<double>(std::bit_cast<float>(load_le<std::uint32_t>(bytes, i * 4)));
    }
  }
  return out;
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw Error(ErrorCode::IoError, "short read on " + path.string());
  }
  return bytes;
}

namespace {

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  static std::atomic<unsigned> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  auto name = path.filename().string() + ".tmp." + std::to_string(tid % 1000000) + "." +
              std::to_string(counter.fetch_add(1));
  return path.parent_path() / name;
}

}  // namespace

void atomic_write(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw Error(ErrorCode::IoError, "write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot move into place: " + path.string());
  }
}

void atomic_write(const std::filesystem::path& path, std::string_view text) {
  atomic_write(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

}  // namespace trojanq::detail

namespace trojanq {

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  detail::atomic_write(path, text);
}

}  // namespace trojanq
