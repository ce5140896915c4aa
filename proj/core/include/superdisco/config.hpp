#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace superdisco {

/// Flat "key = value" text. Lines starting with '#' are comments. Values are typed on access:
/// integers, floats, booleans (true/false) and tuples written "(4, 8, 16)" or "()".
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, std::string value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_tuple(const std::string& key) const;
  std::vector<std::size_t> get_tuple(const std::string& key, const std::vector<std::size_t>& fallback) const;

  /// Keys not in `known`; callers reject these so typos do not pass silently.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  std::string to_text() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

 private:
  const std::string* find(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_tuple(const std::vector<std::size_t>& values);

}  // namespace superdisco
