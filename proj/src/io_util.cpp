#include "actgen/io_util.hpp"

#include <cstring>

namespace actgen {

namespace {

const std::uint32_t* crc_table() {
  static std::uint32_t table[256];
  static bool built = false;
  if (!built) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    built = true;
  }
  return table;
}

}  // namespace

std::uint32_t crc32_update(std::uint32_t crc, const void* data, size_t n) {
  const std::uint32_t* tbl = crc_table();
  const unsigned char* p = static_cast<const unsigned char*>(data);
  crc ^= 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) crc = tbl[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

BinWriter::BinWriter(const std::string& path) : out_(path, std::ios::binary), crc_(0), path_(path) {
  if (!out_) throw IoError("cannot open for writing: " + path);
}

void BinWriter::bytes(const void* p, size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed: " + path_);
  crc_ = crc32_update(crc_, p, n);
}

void BinWriter::u8(std::uint8_t v) { bytes(&v, 1); }

void BinWriter::u32(std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  bytes(b, 4);
}

void BinWriter::u64(std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b, 8);
}

void BinWriter::i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

void BinWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

void BinWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  if (!s.empty()) bytes(s.data(), s.size());
}

void BinWriter::finish() {
  if (finished_) return;
  const std::uint32_t crc = crc_;
  u32(crc);  // updates crc_, harmless after capture
  out_.close();
  if (!out_) throw IoError("close failed: " + path_);
  finished_ = true;
}

BinReader::BinReader(const std::string& path) : in_(path, std::ios::binary), crc_(0), path_(path) {
  if (!in_) throw IoError("cannot open for reading: " + path);
}

void BinReader::bytes(void* p, size_t n) {
  in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in_.gcount()) != n)
    throw TruncationError("truncated file: " + path_);
  crc_ = crc32_update(crc_, p, n);
}

std::uint8_t BinReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint32_t BinReader::u32() {
  unsigned char b[4];
  bytes(b, 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t BinReader::u64() {
  unsigned char b[8];
  bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::int64_t BinReader::i64() { return static_cast<std::int64_t>(u64()); }

double BinReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string BinReader::str(size_t max_len) {
  const std::uint32_t n = u32();
  if (n > max_len) throw IoError("string too long in " + path_);
  std::string s(n, '\0');
  if (n) bytes(s.data(), n);
  return s;
}

void BinReader::verify_crc() {
  const std::uint32_t computed = crc_;
  const std::uint32_t stored = u32();
  if (computed != stored) throw ChecksumError("checksum mismatch: " + path_);
}

}  // namespace actgen
