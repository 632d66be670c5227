#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ardm {

// Flat key-value configuration: one "key = value" per line, '#' comments,
// no sections or nesting. Values are typed at access time so a bad value
// reports the key it belongs to.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text);
  static Config load_file(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  const std::string& get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys not in the permitted list, sorted; used to reject typos wholesale.
  std::vector<std::string> unknown_keys(
      std::span<const std::string> permitted) const;

  // Canonical text: keys sorted, "key = value" lines.
  std::string to_text() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ardm
