#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superdisco/tensor.hpp"

namespace superdisco {

/// 100 · correct / total. Throws DataError on empty or mismatched input.
double top1_accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Per-class accuracy in percent and the number of evaluated samples of each class.
struct PerClassAccuracy {
  std::vector<double> accuracy;
  std::vector<std::size_t> support;
};
PerClassAccuracy per_class_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                    std::size_t num_classes);

enum class ShotBucket { Many, Medium, Few };
/// >100 many, 20..100 medium, <20 few.
ShotBucket shot_bucket(std::size_t train_count);

struct ShotSplit {
  std::optional<double> many;
  std::optional<double> medium;
  std::optional<double> few;
  std::size_t many_samples = 0;
  std::size_t medium_samples = 0;
  std::size_t few_samples = 0;
};

/// Sample-weighted accuracy of each shot bucket; a bucket without classes stays empty.
ShotSplit split_accuracy(const PerClassAccuracy& per_class, std::span<const std::size_t> train_counts);

struct EvalReport {
  double top1_all = 0.0;
  std::optional<double> top1_many;
  std::optional<double> top1_medium;
  std::optional<double> top1_few;
  std::vector<double> per_class;
  std::size_t many_samples = 0;
  std::size_t medium_samples = 0;
  std::size_t few_samples = 0;

  std::string to_json() const;
};

EvalReport evaluate(std::span<const int> predictions, std::span<const int> labels,
                    std::span<const std::size_t> train_counts);

struct BalanceReport {
  std::vector<std::size_t> totals;  ///< summed training counts per super-class
  std::size_t populated = 0;        ///< super-classes with at least one class
  double imbalance = 1.0;           ///< max / min over populated super-classes

  std::string to_json() const;
};

/// Sums class counts per assigned super-class. Assignments index [0, num_supers).
BalanceReport superclass_balance_report(std::span<const int> assignments, std::span<const std::size_t> class_counts,
                                        std::size_t num_supers);

/// (1/C) Σ over discovered groups of the largest overlap with one latent group.
double recovery_purity(std::span<const int> assignments, std::span<const int> latent);

/// CSV "label,f0,...,f{d-1}" with 17 significant digits.
void export_features(const Tensor& features, std::span<const int> labels, const std::filesystem::path& path);

struct LabelledFeatures {
  Tensor features;
  std::vector<int> labels;
};
LabelledFeatures load_features(const std::filesystem::path& path);

}  // namespace superdisco
