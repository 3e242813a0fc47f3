#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace actgen {

/// Raised for unreadable files, unknown keys, type errors and range
/// violations; the message names the offending key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value configuration with dotted sections (guidance.rho=200).
/// Every key has a schema entry with a type, default and range; unknown keys
/// are rejected. '#' starts a comment; blank lines are ignored.
class Config {
 public:
  /// Defaults only.
  Config();
  /// Defaults overridden by the file.
  static Config from_file(const std::string& path);
  /// Parse one "key=value" override (used by both file lines and callers).
  void set(const std::string& key, const std::string& value);

  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;  // string/enum keys

  bool known(const std::string& key) const;
  /// All keys with their resolved values, sorted; the manifest echo.
  std::vector<std::pair<std::string, std::string>> entries() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace actgen
