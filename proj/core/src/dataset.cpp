#include "superdisco/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "superdisco/errors.hpp"

namespace superdisco {

const char* split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Meta: return "meta";
  }
  return "unknown";
}

Tensor LongTailDataset::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DataError("cannot gather an empty batch");
  Tensor out({indices.size(), width});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) throw IndexError("record index " + std::to_string(indices[r]) + " out of range");
    std::copy_n(features.data() + indices[r] * width, width, out.data().data() + r * width);
  }
  return out;
}

Tensor LongTailDataset::all_features() const {
  if (size() == 0) throw DataError("dataset is empty");
  return Tensor({size(), width}, features);
}

std::vector<int> LongTailDataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

void LongTailDataset::push(std::span<const double> x, int label, int super) {
  if (x.size() != width) throw DimensionError("record width " + std::to_string(x.size()) + " != " + std::to_string(width));
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes) throw IndexError("class id out of range");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  if (super >= 0) supers.push_back(super);
  if (class_counts.size() < num_classes) class_counts.resize(num_classes, 0);
  ++class_counts[static_cast<std::size_t>(label)];
}

void LongTailDataset::recount() {
  class_counts.assign(num_classes, 0);
  for (int y : labels) ++class_counts.at(static_cast<std::size_t>(y));
}

void LongTailDataset::validate() const {
  if (features.size() != labels.size() * width) throw DataError("feature storage does not match record count");
  if (!supers.empty() && supers.size() != labels.size()) throw DataError("latent labels do not cover every record");
  std::vector<std::size_t> actual(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw IndexError("class id out of range");
    ++actual[static_cast<std::size_t>(y)];
  }
  if (actual != class_counts) throw DataError("class_counts disagree with the records");
  if (split == Split::Train && !std::is_sorted(class_counts.begin(), class_counts.end(), std::greater<>{})) {
    throw DataError("training class counts must be non-increasing in class id");
  }
}

double exponential_decay(std::size_t num_classes, double factor) {
  if (num_classes <= 1) return 1.0;
  return std::pow(factor, -1.0 / static_cast<double>(num_classes - 1));
}

std::vector<std::size_t> make_exponential_counts(std::size_t n0, std::size_t num_classes, double factor) {
  if (n0 == 0 || num_classes == 0) throw ConfigError("head count and class count must be positive");
  if (!(factor >= 1.0) || !std::isfinite(factor)) throw ConfigError("imbalance factor must be >= 1");
  if (num_classes == 1 && factor != 1.0) throw ConfigError("a single class cannot have imbalance factor != 1");
  if (static_cast<double>(n0) < factor) {
    throw ConfigError("head count " + std::to_string(n0) + " is smaller than the imbalance factor");
  }
  const double mu = exponential_decay(num_classes, factor);
  std::vector<std::size_t> counts(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    const double n = std::round(static_cast<double>(n0) * std::pow(mu, static_cast<double>(i)));
    if (n < 1.0) throw ConfigError("class " + std::to_string(i) + " rounds to zero samples");
    counts[i] = static_cast<std::size_t>(n);
  }
  return counts;
}

double imbalance_factor(std::span<const std::size_t> counts) {
  if (counts.empty()) throw DataError("imbalance factor of an empty count list");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == 0) throw DataError("imbalance factor undefined with an empty class");
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

DatasetBundle synth_hierarchy_dataset(const SyntheticSpec& spec) {
  if (spec.num_supers == 0 || spec.num_classes == 0 || spec.width == 0) {
    throw ConfigError("synthetic dataset needs positive super, class and width counts");
  }
  if (spec.num_classes % spec.num_supers != 0) {
    throw ConfigError("class count " + std::to_string(spec.num_classes) + " is not divisible by super count " +
                      std::to_string(spec.num_supers));
  }
  if (spec.counts.size() != spec.num_classes) throw ConfigError("one count per class required");
  if (std::any_of(spec.counts.begin(), spec.counts.end(), [](auto c) { return c == 0; })) {
    throw ConfigError("every class needs at least one training sample");
  }
  if (spec.test_per_class == 0) throw ConfigError("test split needs at least one sample per class");
  if (!(spec.separation >= 0.0)) throw ConfigError("separation must be non-negative");

  const std::size_t d = spec.width;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> super_centroids(spec.num_supers * d);
  for (auto& v : super_centroids) v = spec.separation * normal(rng);
  std::vector<double> class_centroids(spec.num_classes * d);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const std::size_t s = c % spec.num_supers;
    for (std::size_t k = 0; k < d; ++k) class_centroids[c * d + k] = super_centroids[s * d + k] + normal(rng);
  }

  auto make_split = [&](Split split, auto count_of) {
    LongTailDataset ds;
    ds.split = split;
    ds.width = d;
    ds.num_classes = spec.num_classes;
    ds.num_supers = spec.num_supers;
    ds.class_counts.assign(spec.num_classes, 0);
    std::vector<double> x(d);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      for (std::size_t i = 0; i < count_of(c); ++i) {
        for (std::size_t k = 0; k < d; ++k) x[k] = class_centroids[c * d + k] + normal(rng);
        ds.push(x, static_cast<int>(c), static_cast<int>(c % spec.num_supers));
      }
    }
    return ds;
  };

  DatasetBundle out;
  out.train = make_split(Split::Train, [&](std::size_t c) { return spec.counts[c]; });
  out.test = make_split(Split::Test, [&](std::size_t) { return spec.test_per_class; });
  return out;
}

LongTailDataset sample_meta_set(const LongTailDataset& train, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw ConfigError("meta-set needs at least one sample per class");
  std::vector<std::vector<std::size_t>> by_class(train.num_classes);
  for (std::size_t i = 0; i < train.size(); ++i) by_class[static_cast<std::size_t>(train.labels[i])].push_back(i);
  std::mt19937_64 rng(seed);
  LongTailDataset meta;
  meta.split = Split::Meta;
  meta.width = train.width;
  meta.num_classes = train.num_classes;
  meta.num_supers = train.num_supers;
  meta.class_counts.assign(train.num_classes, 0);
  for (std::size_t c = 0; c < train.num_classes; ++c) {
    auto& pool = by_class[c];
    if (pool.size() < per_class) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                      " samples, meta-set needs " + std::to_string(per_class));
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(per_class);
    std::sort(pool.begin(), pool.end());
    for (auto i : pool) {
      meta.push(train.row(i), train.labels[i], train.has_latent() ? train.supers[i] : -1);
      meta.source_index.push_back(i);
    }
  }
  return meta;
}

LongTailDataset exclude_records(const LongTailDataset& train, const LongTailDataset& meta) {
  std::vector<bool> drop(train.size(), false);
  for (auto i : meta.source_index) drop.at(i) = true;
  LongTailDataset out;
  out.split = train.split;
  out.width = train.width;
  out.num_classes = train.num_classes;
  out.num_supers = train.num_supers;
  out.class_counts.assign(train.num_classes, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (drop[i]) continue;
    out.push(train.row(i), train.labels[i], train.has_latent() ? train.supers[i] : -1);
    out.source_index.push_back(i);
  }
  return out;
}

InstanceBalancedSampler::InstanceBalancedSampler(std::size_t num_records, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), order_(num_records), seed_(seed) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

std::vector<std::vector<std::size_t>> InstanceBalancedSampler::next_epoch() {
  // Epoch order is a function of (seed, epoch) only.
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(epoch_), static_cast<std::uint32_t>(epoch_ >> 32)};
  std::mt19937_64 rng(seq);
  ++epoch_;
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order_.size(); start += batch_size_) {
    const std::size_t end = std::min(order_.size(), start + batch_size_);
    batches.emplace_back(order_.begin() + static_cast<std::ptrdiff_t>(start),
                         order_.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace superdisco
