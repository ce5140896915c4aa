#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "superdisco/dataset.hpp"
#include "superdisco/errors.hpp"

namespace superdisco {

namespace {

constexpr std::size_t kCifarPixels = 3 * 32 * 32;
constexpr std::size_t kCifarRecord = 2 + kCifarPixels;
constexpr std::size_t kCifarFine = 100;
constexpr std::size_t kCifarCoarse = 20;
constexpr std::string_view kDataMagic{"SDDATA1\0", 8};

}  // namespace

LongTailDataset load_cifar100_binary(const std::filesystem::path& path, Split split,
                                     const std::optional<std::vector<std::size_t>>& keep_counts) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path.string() + "'");
  if (bytes % kCifarRecord != 0) {
    throw FormatError("'" + path.string() + "' holds " + std::to_string(bytes) + " bytes, not a multiple of " +
                      std::to_string(kCifarRecord));
  }
  if (keep_counts && keep_counts->size() != kCifarFine) throw ConfigError("keep_counts needs one entry per fine class");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  LongTailDataset ds;
  ds.split = split;
  ds.width = kCifarPixels;
  ds.num_classes = kCifarFine;
  ds.num_supers = kCifarCoarse;
  ds.class_counts.assign(kCifarFine, 0);
  std::array<unsigned char, kCifarRecord> record{};
  std::vector<double> pixels(kCifarPixels);
  const std::size_t n = bytes / kCifarRecord;
  for (std::size_t r = 0; r < n; ++r) {
    in.read(reinterpret_cast<char*>(record.data()), kCifarRecord);
    if (!in) throw FormatError("short read in '" + path.string() + "'");
    const int coarse = record[0];
    const int fine = record[1];
    if (fine >= static_cast<int>(kCifarFine) || coarse >= static_cast<int>(kCifarCoarse)) {
      throw FormatError("record " + std::to_string(r) + " has out-of-range labels");
    }
    if (keep_counts && ds.class_counts[static_cast<std::size_t>(fine)] >= (*keep_counts)[static_cast<std::size_t>(fine)]) {
      continue;
    }
    for (std::size_t k = 0; k < kCifarPixels; ++k) pixels[k] = record[2 + k] / 255.0;
    ds.push(pixels, fine, coarse);
  }
  return ds;
}

void save_cifar100_binary(const LongTailDataset& data, const std::filesystem::path& path) {
  if (data.width != kCifarPixels || !data.has_latent()) {
    throw DataError("only CIFAR-shaped datasets with coarse labels can be written as CIFAR binary");
  }
  detail::BinaryWriter out(path);
  std::array<unsigned char, kCifarRecord> record{};
  for (std::size_t r = 0; r < data.size(); ++r) {
    record[0] = static_cast<unsigned char>(data.supers[r]);
    record[1] = static_cast<unsigned char>(data.labels[r]);
    auto row = data.row(r);
    for (std::size_t k = 0; k < kCifarPixels; ++k) {
      record[2 + k] = static_cast<unsigned char>(std::lround(row[k] * 255.0));
    }
    out.bytes(record.data(), record.size());
  }
}

namespace {

void write_split(detail::BinaryWriter& out, const LongTailDataset& ds) {
  out.pod<std::uint64_t>(ds.size());
  out.doubles(ds.features);
  for (int y : ds.labels) out.pod<std::int32_t>(y);
  for (std::size_t i = 0; i < ds.size(); ++i) out.pod<std::int32_t>(ds.has_latent() ? ds.supers[i] : -1);
}

LongTailDataset read_split(detail::BinaryReader& in, Split split, std::size_t k, std::size_t c, std::size_t d) {
  LongTailDataset ds;
  ds.split = split;
  ds.width = d;
  ds.num_classes = c;
  ds.num_supers = k;
  const auto n = in.pod<std::uint64_t>();
  if (n > (std::uint64_t{1} << 32)) throw FormatError("implausible record count");
  ds.features = in.doubles(n * d);
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = in.pod<std::int32_t>();
  std::vector<int> supers(n);
  for (auto& s : supers) s = in.pod<std::int32_t>();
  if (k > 0) ds.supers = std::move(supers);
  for (int y : ds.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) throw FormatError("class id out of range in SDDATA1 container");
  }
  ds.recount();
  return ds;
}

}  // namespace

// Layout: magic | u32 K | u32 C | u32 d | u32 reserved | u64 counts[C] | train split | test split.
// Each split: u64 n | f64 features[n×d] | i32 labels[n] | i32 latent[n].
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& path) {
  const LongTailDataset& train = bundle.train;
  if (bundle.test.width != train.width || bundle.test.num_classes != train.num_classes) {
    throw DimensionError("train and test splits disagree on width or class count");
  }
  detail::BinaryWriter out(path);
  out.magic(kDataMagic);
  out.pod<std::uint32_t>(static_cast<std::uint32_t>(train.num_supers));
  out.pod<std::uint32_t>(static_cast<std::uint32_t>(train.num_classes));
  out.pod<std::uint32_t>(static_cast<std::uint32_t>(train.width));
  out.pod<std::uint32_t>(0);
  for (auto n : train.class_counts) out.pod<std::uint64_t>(n);
  write_split(out, train);
  write_split(out, bundle.test);
}

DatasetBundle load_dataset(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kDataMagic);
  const std::size_t k = in.pod<std::uint32_t>();
  const std::size_t c = in.pod<std::uint32_t>();
  const std::size_t d = in.pod<std::uint32_t>();
  in.pod<std::uint32_t>();
  if (c == 0 || d == 0) throw FormatError("SDDATA1 header declares an empty dataset");
  std::vector<std::size_t> counts(c);
  for (auto& n : counts) n = in.pod<std::uint64_t>();
  DatasetBundle bundle;
  bundle.train = read_split(in, Split::Train, k, c, d);
  bundle.test = read_split(in, Split::Test, k, c, d);
  if (bundle.train.class_counts != counts) throw FormatError("SDDATA1 header counts disagree with the records");
  if (!in.at_end()) throw FormatError("trailing bytes in '" + path.string() + "'");
  return bundle;
}

void write_meta_manifest(const LongTailDataset& meta, const std::filesystem::path& path) {
  if (meta.source_index.size() != meta.size()) throw DataError("meta-set does not reference its source records");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "class_id,sample_id\n";
  for (std::size_t i = 0; i < meta.size(); ++i) out << meta.labels[i] << ',' << meta.source_index[i] << '\n';
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

LongTailDataset read_meta_manifest(const LongTailDataset& train, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "class_id,sample_id") throw FormatError("manifest header must be class_id,sample_id");
  LongTailDataset meta;
  meta.split = Split::Meta;
  meta.width = train.width;
  meta.num_classes = train.num_classes;
  meta.num_supers = train.num_supers;
  meta.class_counts.assign(train.num_classes, 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    long long cls = -1, sample = -1;
    char comma = 0;
    if (!(row >> cls >> comma >> sample) || comma != ',' || sample < 0 ||
        static_cast<std::size_t>(sample) >= train.size()) {
      throw FormatError("bad manifest row '" + line + "'");
    }
    const auto i = static_cast<std::size_t>(sample);
    if (train.labels[i] != cls) throw DataError("manifest class does not match record " + std::to_string(i));
    meta.push(train.row(i), train.labels[i], train.has_latent() ? train.supers[i] : -1);
    meta.source_index.push_back(i);
  }
  return meta;
}

}  // namespace superdisco
