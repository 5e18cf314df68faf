#pragma once

// Little-endian byte buffers, CRC32 trailers and atomic file replacement used
// by every on-disk format.

#include <bit>
#include <type_traits>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ilts/common.hpp"

namespace ilts::bin {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian and written with memcpy");

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

class Writer {
 public:
  template <class T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  template <class T>
  void put_array(std::span<const T> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    buf_.insert(buf_.end(), p, p + values.size_bytes());
  }
  void put_magic(std::string_view magic) {
    buf_.insert(buf_.end(), magic.begin(), magic.end());
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  // Appends CRC32 of everything written so far.
  void seal() { put<std::uint32_t>(crc32(buf_)); }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> bytes, std::string what);

  // Verifies and strips the CRC32 trailer.
  void verify_seal();

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  template <class T>
  void get_array(std::span<T> out) {
    need(out.size_bytes());
    std::memcpy(out.data(), buf_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }
  void expect_magic(std::string_view magic);
  std::string get_string();
  bool at_end() const { return pos_ == end_; }
  std::size_t remaining() const { return end_ - pos_; }
  [[noreturn]] void fail(const std::string& why) const;

 private:
  void need(std::size_t n) const;

  std::vector<std::uint8_t> buf_;
  std::string what_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes to `path.tmp` then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace ilts::bin
