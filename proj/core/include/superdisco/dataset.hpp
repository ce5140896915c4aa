#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "superdisco/tensor.hpp"

namespace superdisco {

enum class Split { Train, Test, Meta };

const char* split_name(Split split);

/// Labelled records stored column-wise. Class ids are dense in [0, num_classes).
struct LongTailDataset {
  Split split = Split::Train;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::size_t num_supers = 0;  ///< 0 when no latent super-class labels are known
  std::vector<double> features;  ///< size() × width, row-major
  std::vector<int> labels;
  std::vector<int> supers;  ///< empty or one latent id per record
  std::vector<std::size_t> class_counts;
  std::vector<std::size_t> source_index;  ///< for derived subsets, record index in the parent dataset

  std::size_t size() const noexcept { return labels.size(); }
  bool has_latent() const noexcept { return num_supers > 0 && supers.size() == labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * width, width}; }

  /// Rows `indices` as a [n×width] tensor.
  Tensor gather(std::span<const std::size_t> indices) const;
  Tensor all_features() const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

  /// Appends a record and bumps its class count.
  void push(std::span<const double> x, int label, int super = -1);
  void recount();
  /// Throws DataError when counts, labels or the sorted-head convention are violated.
  void validate() const;
};

/// Exponentially decaying class sizes n_i = round(n0 * mu^i), mu = factor^(-1/(C-1)).
std::vector<std::size_t> make_exponential_counts(std::size_t n0, std::size_t num_classes, double factor);
double exponential_decay(std::size_t num_classes, double factor);

/// max(counts) / min(counts).
double imbalance_factor(std::span<const std::size_t> counts);

struct SyntheticSpec {
  std::size_t num_supers = 8;
  std::size_t num_classes = 40;
  std::size_t width = 32;
  std::vector<std::size_t> counts;  ///< per class, non-increasing
  double separation = 6.0;
  std::size_t test_per_class = 100;
  std::uint64_t seed = 0;
};

struct DatasetBundle {
  LongTailDataset train;
  LongTailDataset test;
};

/// Gaussian hierarchy: super centroids ~ sep·N(0, I), class centroids = super + N(0, I),
/// samples = class + N(0, I). Class j belongs to latent super-class j mod K.
DatasetBundle synth_hierarchy_dataset(const SyntheticSpec& spec);

/// CIFAR-100 binary records (coarse byte, fine byte, 3072 pixel bytes). When `keep_counts` is
/// given, only the first keep_counts[c] records of each fine class are kept.
LongTailDataset load_cifar100_binary(const std::filesystem::path& path, Split split = Split::Train,
                                     const std::optional<std::vector<std::size_t>>& keep_counts = std::nullopt);
void save_cifar100_binary(const LongTailDataset& data, const std::filesystem::path& path);

/// Exactly `per_class` random records of every class, drawn from `train`.
LongTailDataset sample_meta_set(const LongTailDataset& train, std::size_t per_class, std::uint64_t seed);
/// `train` without the records referenced by `meta.source_index`.
LongTailDataset exclude_records(const LongTailDataset& train, const LongTailDataset& meta);

/// Epoch-wise uniform shuffles over all records; the final short batch is kept.
class InstanceBalancedSampler {
 public:
  InstanceBalancedSampler(std::size_t num_records, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::vector<std::size_t>> next_epoch();

 private:
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
};

// "SDDATA1" container holding a train and a test split.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& path);
DatasetBundle load_dataset(const std::filesystem::path& path);

/// Meta-set manifest, CSV "class_id,sample_id" with sample ids indexing the train split.
void write_meta_manifest(const LongTailDataset& meta, const std::filesystem::path& path);
LongTailDataset read_meta_manifest(const LongTailDataset& train, const std::filesystem::path& path);

}  // namespace superdisco
