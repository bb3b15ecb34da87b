#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

#include "byte_io.hpp"
#include "trojanq/error.hpp"
#include "trojanq/tensor_formats.hpp"

namespace trojanq {

namespace {

constexpr std::array<unsigned char, 6> kMagic = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreambleSize = 10;  // magic, 2 version bytes, u16 length

[[noreturn]] void malformed(const std::string& what, std::size_t offset) {
  throw Error(ErrorCode::MalformedHeader, "npy: " + what, offset);
}

// Just enough of a Python literal parser to read the NPY header dict.
class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::size_t base) : text_(text), base_(base) {}

  struct Fields {
    std::optional<std::string> descr;
    std::optional<bool> fortran_order;
    std::optional<std::vector<std::size_t>> shape;
    std::size_t descr_offset = 0;
    std::size_t shape_offset = 0;
  };

  Fields parse() {
    Fields fields;
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::size_t key_pos = pos_;
      std::string key = parse_string();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        fields.descr_offset = offset();
        fields.descr = parse_string();
      } else if (key == "fortran_order") {
        fields.fortran_order = parse_bool();
      } else if (key == "shape") {
        fields.shape_offset = offset();
        fields.shape = parse_tuple();
      } else {
        malformed("unexpected header key '" + key + "'", base_ + key_pos);
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      expect('}');
      break;
    }
    return fields;
  }

  std::size_t offset() const { return base_ + pos_; }

 private:
  char peek() const {
    if (pos_ >= text_.size()) malformed("header dict truncated", base_ + pos_);
    return text_[pos_];
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) malformed(std::string("expected '") + c + "'", base_ + pos_);
    ++pos_;
  }

  std::string parse_string() {
    const char quote = peek();
    if (quote != '\'' && quote != '"') malformed("expected quoted string", base_ + pos_);
    ++pos_;
    const std::size_t start = pos_;
    while (peek() != quote) ++pos_;
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    malformed("expected True or False", base_ + pos_);
  }

  std::vector<std::size_t> parse_tuple() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (peek() < '0' || peek() > '9') malformed("expected shape dimension", base_ + pos_);
      std::size_t value = 0;
      while (peek() >= '0' && peek() <= '9') {
        const std::size_t digit = static_cast<std::size_t>(peek() - '0');
        if (value > (SIZE_MAX - digit) / 10) malformed("shape dimension overflows", base_ + pos_);
        value = value * 10 + digit;
        ++pos_;
      }
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') ++pos_;
    }
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace

RawTensor parse_npy(std::span<const std::byte> bytes) {
  if (bytes.size() < kPreambleSize) malformed("file shorter than the preamble", bytes.size());
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (std::to_integer<unsigned char>(bytes[i]) != kMagic[i]) malformed("bad magic string", i);
  }
  const auto major = std::to_integer<unsigned>(bytes[6]);
  const auto minor = std::to_integer<unsigned>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw Error(ErrorCode::UnsupportedFormat,
                "npy: version " + std::to_string(major) + "." + std::to_string(minor) +
                    " (only 1.0 is supported)",
                6);
  }
  const std::size_t header_len = detail::load_le<std::uint16_t>(bytes, 8);
  const std::size_t data_start = kPreambleSize + header_len;
  if (data_start > bytes.size()) malformed("header length exceeds file size", 8);

  std::string_view header(reinterpret_cast<const char*>(bytes.data()) + kPreambleSize, header_len);
  HeaderParser parser(header, kPreambleSize);
  const auto fields = parser.parse();
  if (!fields.descr) malformed("header lacks 'descr'", kPreambleSize);
  if (!fields.fortran_order) malformed("header lacks 'fortran_order'", kPreambleSize);
  if (!fields.shape) malformed("header lacks 'shape'", kPreambleSize);

  std::size_t item_size = 0;
  if (*fields.descr == "<f8") {
    item_size = 8;
  } else if (*fields.descr == "<f4") {
    item_size = 4;
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "npy: dtype '" + *fields.descr + "'",
                fields.descr_offset);
  }
  if (*fields.fortran_order) {
    throw Error(ErrorCode::UnsupportedFormat, "npy: fortran_order arrays", kPreambleSize);
  }
  if (fields.shape->size() != 2) {
    throw Error(ErrorCode::UnsupportedFormat,
                "npy: expected a 2-D array, got " + std::to_string(fields.shape->size()) + "-D",
                fields.shape_offset);
  }

  RawTensor tensor;
  tensor.dim0 = (*fields.shape)[0];
  tensor.dim1 = (*fields.shape)[1];
  const std::size_t count = detail::checked_count(tensor.dim0, tensor.dim1, item_size,
                                                  fields.shape_offset);
  if (bytes.size() - data_start < count * item_size) {
    malformed("data section holds " + std::to_string(bytes.size() - data_start) +
                  " bytes, shape needs " + std::to_string(count * item_size),
              data_start);
  }
  tensor.data = detail::decode_floats(bytes.subspan(data_start, count * item_size), item_size);
  return tensor;
}

std::vector<std::byte> encode_npy(std::size_t dim0, std::size_t dim1,
                                  std::span<const double> data) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(dim0) + ", " + std::to_string(dim1) + "), }";
  // Pad with spaces so the data section starts on a 64-byte boundary.
  const std::size_t unpadded = kPreambleSize + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<std::byte> out;
  out.reserve(kPreambleSize + header.size() + data.size() * 8);
  for (unsigned char c : kMagic) out.push_back(std::byte{c});
  out.push_back(std::byte{1});
  out.push_back(std::byte{0});
  detail::store_le<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  for (double v : data) detail::store_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

}  // namespace trojanq
