#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "superdisco/errors.hpp"
#include "superdisco/tensor.hpp"

namespace superdisco::detail {

static_assert(std::endian::native == std::endian::little, "containers are written in host order, which must be little-endian");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
  }
  void magic(std::string_view tag) { bytes(tag.data(), tag.size()); }
  template <typename T>
  void pod(T value) { bytes(&value, sizeof(T)); }
  void doubles(std::span<const double> values) { bytes(values.data(), values.size() * sizeof(double)); }
  void string(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const Tensor& t) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) pod<std::uint64_t>(e);
    doubles(t.data());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open '" + path.string() + "' for reading");
  }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("unexpected end of '" + path_.string() + "'");
  }
  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    bytes(got.data(), got.size());
    if (got != tag) throw FormatError("'" + path_.string() + "' is not a " + std::string(tag.substr(0, 7)) + " container");
  }
  template <typename T>
  T pod() {
    T value{};
    bytes(&value, sizeof(T));
    return value;
  }
  std::vector<double> doubles(std::size_t n) {
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 24)) throw FormatError("implausible string length in '" + path_.string() + "'");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Tensor tensor() {
    const auto rank = pod<std::uint32_t>();
    if (rank == 0 || rank > 4) throw FormatError("implausible tensor rank in '" + path_.string() + "'");
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(pod<std::uint64_t>());
    const std::size_t n = shape_size(shape);
    if (n == 0 || n > (std::size_t{1} << 32)) throw FormatError("implausible tensor size in '" + path_.string() + "'");
    return Tensor(std::move(shape), doubles(n));
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace superdisco::detail
