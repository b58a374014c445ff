#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ause {

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

/// Little-endian, fixed-width encoder.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(std::string_view s);
  /// u32 length prefix followed by the raw bytes.
  void str(std::string_view s);

  const std::vector<std::uint8_t>& data() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  /// Appends fnv1a64 of everything written so far.
  void append_checksum() { u64(fnv1a64(buf_)); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Decoder matching ByteWriter. Every read past the end raises FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string bytes(std::size_t n);
  std::string str();

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// Checks the trailing checksum and returns the payload without it.
std::span<const std::uint8_t> verify_checksum(std::span<const std::uint8_t> data, std::string_view what);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace ause
