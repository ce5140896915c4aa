#include "superdisco/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "superdisco/errors.hpp"
#include "superdisco/ops.hpp"
#include "superdisco/optim.hpp"

namespace superdisco {

namespace {

enum TrainStream : std::uint64_t { kHeadSeed = 20, kStage1Order = 21, kStage2Order = 22, kMetaSample = 23, kOracleSeed = 24 };

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t d = x.dim(1);
  Tensor out({idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(x.data().data() + idx[r] * d, d, out.data().data() + r * d);
  }
  return out;
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const auto pred = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return hits;
}

struct EpochAccumulator {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t seen = 0;

  void add(double loss, std::size_t n, std::size_t hits) {
    loss_sum += loss * static_cast<double>(n);
    correct += hits;
    seen += n;
  }
  EpochLog finish(const char* stage, std::size_t epoch) const {
    EpochLog log;
    log.stage = stage;
    log.epoch = epoch;
    log.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    log.top1 = seen ? 100.0 * static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    return log;
  }
};

[[noreturn]] void diverged(const char* stage, std::size_t epoch, std::size_t step, const std::string& what) {
  throw TrainingError(std::string(stage) + " diverged at epoch " + std::to_string(epoch) + ", step " +
                      std::to_string(step) + ": " + what + " (try a smaller learning rate)");
}

void check_balanced(const LongTailDataset& meta_set) {
  if (meta_set.size() == 0) throw DataError("meta-set is empty");
  std::vector<std::size_t> counts(meta_set.num_classes, 0);
  for (int y : meta_set.labels) ++counts.at(static_cast<std::size_t>(y));
  if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>{}) != counts.end() || counts.front() == 0) {
    throw DataError("meta-set is not balanced: every class needs the same non-zero number of samples");
  }
}

Tensor features_in_chunks(Model& model, const LongTailDataset& data) {
  Tensor out({data.size(), model.config.feature_width});
  std::vector<std::size_t> idx;
  constexpr std::size_t kChunk = 1024;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) idx.push_back(i);
    const Tensor z = extract_features(model, data.gather(idx));
    std::copy(z.data().begin(), z.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * z.dim(1)));
  }
  return out;
}

void check_compatible(const Model& model, const LongTailDataset& data) {
  if (data.size() == 0) throw DataError("training split is empty");
  if (data.width != model.config.input_width) {
    throw DimensionError("dataset width " + std::to_string(data.width) + " does not match model input width " +
                         std::to_string(model.config.input_width));
  }
  if (data.num_classes != model.config.num_classes) {
    throw DimensionError("dataset has " + std::to_string(data.num_classes) + " classes, model has " +
                         std::to_string(model.config.num_classes));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(stage1_lr > 0.0) || !(stage2_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (meta_per_class == 0) throw ConfigError("meta_per_class must be positive");
}

StageResult train_stage1(Model& model, const LongTailDataset& train, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  config.validate();
  check_compatible(model, train);
  std::mt19937_64 rng(derive_seed(config.seed, kHeadSeed));
  Linear head = Linear::init("stage1_head", model.config.feature_width, model.config.num_classes,
                             1.0 / std::sqrt(static_cast<double>(model.config.feature_width)), rng);
  std::vector<Param*> params = model.extractor_params();
  params.push_back(&head.weight);
  params.push_back(&head.bias);
  Sgd opt(params, config.stage1_lr, config.momentum);
  InstanceBalancedSampler sampler(train.size(), config.batch_size, derive_seed(config.seed, kStage1Order));

  StageResult result;
  for (std::size_t epoch = 0; epoch < config.stage1_epochs; ++epoch) {
    EpochAccumulator acc;
    const auto batches = sampler.next_epoch();
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const auto labels = train.gather_labels(batches[step]);
      try {
        Tape tape;
        Var z = model.extractor.forward(tape, tape.constant(train.gather(batches[step])), true);
        Var logits = head.forward(tape, z, true);
        Var loss = ops::cross_entropy(logits, labels);
        tape.backward(loss);
        opt.step();
        acc.add(loss.value().item(), labels.size(), count_correct(logits.value(), labels));
      } catch (const NumericError& e) {
        diverged("stage 1", epoch, step, e.what());
      }
    }
    result.epochs.push_back(acc.finish("stage1", epoch));
    if (on_epoch) on_epoch(result.epochs.back());
  }
  return result;
}

namespace {

Var meta_step_logits(Tape& tape, Model& model, const Tensor& x, const LongTailDataset& meta_set, bool track_extractor) {
  if (model.config.mode != Mode::Meta) throw ContractError("meta_refine_step needs a meta-mode model");
  check_balanced(meta_set);
  if (meta_set.num_classes != model.config.num_classes) throw DimensionError("meta-set class count does not match model");
  Var z = model.extractor.forward(tape, tape.constant(x), track_extractor);
  Var meta_z = model.extractor.forward(tape, tape.constant(meta_set.all_features()), track_extractor);
  Var prototypes = ops::class_means(meta_z, meta_set.labels, meta_set.num_classes);
  model.meta_prototypes = prototypes.value();
  auto levels = bind_graph(tape, model.graph, true);
  auto meta = bind_meta(tape, model.meta, true);
  Var refined = meta_refine(z, prototypes, levels, meta);
  return model.classifier.forward(tape, refined, true);
}

}  // namespace

Var meta_refine_step(Tape& tape, Model& model, const Tensor& x, std::span<const int> labels,
                     const LongTailDataset& meta_set, bool track_extractor) {
  return ops::cross_entropy(meta_step_logits(tape, model, x, meta_set, track_extractor), labels);
}

StageResult train_stage2(Model& model, const LongTailDataset& train, const LongTailDataset* meta_set,
                         const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_compatible(model, train);
  const bool meta_mode = model.config.mode == Mode::Meta;
  if (meta_mode) {
    if (meta_set == nullptr) throw ConfigError("mode=meta requires a meta-set");
    check_balanced(*meta_set);
  }

  std::vector<Param*> params = model.stage2_params();
  if (config.update_extractor) {
    for (auto* p : model.extractor_params()) params.push_back(p);
  }
  Sgd opt(params, config.stage2_lr, config.momentum);
  InstanceBalancedSampler sampler(train.size(), config.batch_size, derive_seed(config.seed, kStage2Order));

  // With the extractor frozen, features and prototypes are fixed for the whole stage.
  Tensor cached;
  if (!config.update_extractor) {
    cached = features_in_chunks(model, train);
    if (meta_mode) model.meta_prototypes = compute_prototypes(features_in_chunks(model, *meta_set), meta_set->labels,
                                                              meta_set->num_classes);
  }

  StageResult result;
  for (std::size_t epoch = 0; epoch < config.stage2_epochs; ++epoch) {
    EpochAccumulator acc;
    const auto batches = sampler.next_epoch();
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const auto labels = train.gather_labels(batches[step]);
      try {
        Tape tape;
        Var logits;
        if (config.update_extractor && meta_mode) {
          logits = meta_step_logits(tape, model, train.gather(batches[step]), *meta_set, true);
        } else {
          Var z = config.update_extractor
                      ? model.extractor.forward(tape, tape.constant(train.gather(batches[step])), true)
                      : tape.constant(gather_rows(cached, batches[step]));
          logits = logits_from_features(tape, model, z, true);
        }
        Var loss = ops::cross_entropy(logits, labels);
        const std::size_t hits = count_correct(logits.value(), labels);
        tape.backward(loss);
        opt.step();
        acc.add(loss.value().item(), labels.size(), hits);
      } catch (const NumericError& e) {
        diverged("stage 2", epoch, step, e.what());
      }
    }
    result.epochs.push_back(acc.finish("stage2", epoch));
    if (on_epoch) on_epoch(result.epochs.back());
  }
  if (meta_mode && config.update_extractor) {
    model.meta_prototypes = compute_prototypes(features_in_chunks(model, *meta_set), meta_set->labels,
                                               meta_set->num_classes);
  }
  return result;
}

StageResult baseline_finetune(Model& model, const LongTailDataset& train, const TrainConfig& config,
                              const EpochCallback& on_epoch) {
  const Mode saved = model.config.mode;
  model.config.mode = Mode::Baseline;
  TrainConfig frozen = config;
  frozen.update_extractor = false;
  try {
    StageResult r = train_stage2(model, train, nullptr, frozen, on_epoch);
    model.config.mode = saved;
    return r;
  } catch (...) {
    model.config.mode = saved;
    throw;
  }
}

SuperClassGraph oracle_superclass_graph(Model& model, const LongTailDataset& train, std::uint64_t seed) {
  if (!train.has_latent()) throw DataError("oracle super-classes need latent super-class labels");
  const Tensor z = features_in_chunks(model, train);
  const Tensor means = compute_prototypes(z, train.supers, train.num_supers);
  LevelSpec spec{{train.num_supers}, model.config.feature_width, model.config.gnn_layers};
  SuperClassGraph graph = SuperClassGraph::init(spec, seed);
  GraphLevel& level = graph.level(0);
  level.vertices.value = means;
  level.vertices_frozen = true;
  if (model.config.gamma) {
    level.edge_scale = *model.config.gamma;
    level.attach_scale = *model.config.gamma;
  }
  return graph;
}

TrainSummary train_model(Model& model, const LongTailDataset& train, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  config.validate();
  TrainSummary summary;
  summary.stage1 = train_stage1(model, train, config, on_epoch);

  const LongTailDataset* stream = &train;
  LongTailDataset reduced;
  switch (model.config.mode) {
    case Mode::Meta:
      summary.meta_set = sample_meta_set(train, config.meta_per_class, derive_seed(config.seed, kMetaSample));
      if (config.exclude_meta) {
        reduced = exclude_records(train, *summary.meta_set);
        stream = &reduced;
      }
      break;
    case Mode::Oracle:
      if (model.config.levels != std::vector<std::size_t>{train.num_supers}) {
        throw ConfigError("oracle mode needs levels = (" + std::to_string(train.num_supers) +
                          "), one level with one vertex per latent super-class");
      }
      model.graph = oracle_superclass_graph(model, train, derive_seed(config.seed, kOracleSeed));
      break;
    default:
      break;
  }
  summary.stage2 = train_stage2(model, *stream, summary.meta_set ? &*summary.meta_set : nullptr, config, on_epoch);
  return summary;
}

}  // namespace superdisco
