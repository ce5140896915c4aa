#include "superdisco/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "superdisco/errors.hpp"

namespace superdisco {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (cfg.find(key) != nullptr) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.entries_.emplace_back(std::move(key), std::move(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const std::string* KeyValueConfig::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

bool KeyValueConfig::has(const std::string& key) const { return find(key) != nullptr; }

void KeyValueConfig::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

std::string KeyValueConfig::get_string(const std::string& key) const {
  const auto* v = find(key);
  if (v == nullptr) throw ConfigError("missing required key '" + key + "'");
  return *v;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v == nullptr ? fallback : *v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("key '" + key + "' is not an integer: " + v);
  return out;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "' is not a non-negative integer: " + v);
  }
  return out;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw ConfigError("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is not a number: " + v);
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "' is not a boolean: " + v);
}

std::vector<std::size_t> KeyValueConfig::get_tuple(const std::string& key) const {
  std::string v = get_string(key);
  if (v.size() < 2 || v.front() != '(' || v.back() != ')') {
    throw ConfigError("key '" + key + "' must be a tuple like (4, 8): " + v);
  }
  v = trim(v.substr(1, v.size() - 2));
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      throw ConfigError("key '" + key + "' has a non-integer tuple entry '" + item + "'");
    }
    out.push_back(n);
  }
  return out;
}

std::vector<std::size_t> KeyValueConfig::get_tuple(const std::string& key,
                                                   const std::vector<std::size_t>& fallback) const {
  return has(key) ? get_tuple(key) : fallback;
}

std::vector<std::string> KeyValueConfig::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
  }
  return out;
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::string format_tuple(const std::vector<std::size_t>& values) {
  std::string out = "(";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != 0) out += ", ";
    out += std::to_string(values[i]);
  }
  return out + ")";
}

}  // namespace superdisco
