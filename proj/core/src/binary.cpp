#include "ilts/binary.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

#include <zlib.h>

namespace ilts::bin {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(chunk));
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

Reader::Reader(std::vector<std::uint8_t> bytes, std::string what)
    : buf_(std::move(bytes)), what_(std::move(what)), end_(buf_.size()) {}

void Reader::verify_seal() {
  if (buf_.size() < sizeof(std::uint32_t)) fail("file too short for checksum");
  end_ = buf_.size() - sizeof(std::uint32_t);
  std::uint32_t stored;
  std::memcpy(&stored, buf_.data() + end_, sizeof(stored));
  const std::uint32_t actual = crc32(std::span(buf_.data(), end_));
  if (stored != actual) fail("checksum mismatch");
}

void Reader::expect_magic(std::string_view magic) {
  need(magic.size());
  if (std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0) {
    fail("bad magic, expected '" + std::string(magic) + "'");
  }
  pos_ += magic.size();
}

std::string Reader::get_string() {
  const auto n = get<std::uint32_t>();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

void Reader::fail(const std::string& why) const {
  throw Error(Errc::CorruptFile, what_ + ": " + why);
}

void Reader::need(std::size_t n) const {
  if (pos_ + n > end_) fail("truncated");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::Io, "rename to " + path.string() + " failed: " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace ilts::bin
