#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace actgen {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VersionError : IoError {
  using IoError::IoError;
};
struct TruncationError : IoError {
  using IoError::IoError;
};
struct ChecksumError : IoError {
  using IoError::IoError;
};

/// Little-endian binary writer with a running CRC-32 (IEEE reflected,
/// polynomial 0xEDB88320) over every byte written. finish() appends the CRC.
class BinWriter {
 public:
  explicit BinWriter(const std::string& path);
  void bytes(const void* p, size_t n);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void str(const std::string& s);  // u32 length + bytes
  void finish();                   // writes CRC and closes

 private:
  std::ofstream out_;
  std::uint32_t crc_;
  std::string path_;
  bool finished_ = false;
};

/// Counterpart reader; verify_crc() checks the trailing CRC against all bytes
/// read so far. Reads past end raise TruncationError.
class BinReader {
 public:
  explicit BinReader(const std::string& path);
  void bytes(void* p, size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string str(size_t max_len = 1 << 20);
  void verify_crc();

 private:
  std::ifstream in_;
  std::uint32_t crc_;
  std::string path_;
};

std::uint32_t crc32_update(std::uint32_t crc, const void* data, size_t n);

}  // namespace actgen
