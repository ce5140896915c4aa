#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superdisco/dataset.hpp"
#include "superdisco/model.hpp"

namespace superdisco {

struct TrainConfig {
  std::size_t stage1_epochs = 30;
  std::size_t stage2_epochs = 30;
  std::size_t batch_size = 128;
  double stage1_lr = 0.1;
  double stage2_lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::size_t meta_per_class = 10;
  bool exclude_meta = false;      ///< drop meta-set records from the stage-2 training stream
  bool update_extractor = false;  ///< let stage-2 gradients reach the extractor

  /// Throws ConfigError.
  void validate() const;
};

struct EpochLog {
  std::string stage;  ///< "stage1" or "stage2"
  std::size_t epoch = 0;
  std::string split = "train";
  double loss = 0.0;  ///< sample-weighted mean over the epoch's batches
  double top1 = 0.0;  ///< running training accuracy, percent
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct StageResult {
  std::vector<EpochLog> epochs;
  double final_loss() const { return epochs.empty() ? 0.0 : epochs.back().loss; }
};

/// Trains the extractor and a throwaway linear head with cross-entropy on instance-balanced batches.
StageResult train_stage1(Model& model, const LongTailDataset& train, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

/// Trains graph and classifier on extractor features. Meta mode needs `meta_set`; its prototypes
/// end up in model.meta_prototypes.
StageResult train_stage2(Model& model, const LongTailDataset& train, const LongTailDataset* meta_set,
                         const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Retrains the classifier only, on raw extractor features.
StageResult baseline_finetune(Model& model, const LongTailDataset& train, const TrainConfig& config,
                              const EpochCallback& on_epoch = {});

/// One meta forward pass: features of the batch and of the meta-set, prototype graph, super graph per
/// level, sample refinement and classification. Returns the mean cross-entropy. Throws DataError
/// when the meta-set is not balanced.
Var meta_refine_step(Tape& tape, Model& model, const Tensor& x, std::span<const int> labels,
                     const LongTailDataset& meta_set, bool track_extractor);

/// One-level graph whose frozen vertices are the per-latent-super mean features. Edge and
/// message-passing parameters are freshly drawn from `seed`.
SuperClassGraph oracle_superclass_graph(Model& model, const LongTailDataset& train, std::uint64_t seed);

struct TrainSummary {
  StageResult stage1;
  StageResult stage2;
  std::optional<LongTailDataset> meta_set;
};

/// Stage 1, mode-specific preparation (meta-set, oracle graph), then stage 2.
TrainSummary train_model(Model& model, const LongTailDataset& train, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

}  // namespace superdisco
