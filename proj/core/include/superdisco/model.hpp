#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "superdisco/dataset.hpp"
#include "superdisco/graph.hpp"
#include "superdisco/meta.hpp"

namespace superdisco {

enum class Mode { Baseline, SuperDisco, Meta, Oracle };

const char* mode_name(Mode mode);
Mode parse_mode(const std::string& text);

/// Independent sub-seed for component `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct Linear {
  Param weight;  ///< [in×out]
  Param bias;    ///< [1×out]

  static Linear init(const std::string& name, std::size_t in, std::size_t out, double stddev, std::mt19937_64& rng);
  Var forward(Tape& tape, Var x, bool track);
  std::size_t in_width() const { return weight.value.dim(0); }
  std::size_t out_width() const { return weight.value.dim(1); }
};

/// Fully connected network with ReLU between layers and a linear output.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp init(const std::string& name, const std::vector<std::size_t>& widths, std::uint64_t seed);
  Var forward(Tape& tape, Var x, bool track);
  std::vector<Param*> params();
};

struct ModelConfig {
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden{128};
  std::size_t feature_width = 64;
  std::size_t num_classes = 0;
  std::vector<std::size_t> levels{4, 8, 16, 32};
  std::size_t gnn_layers = 2;
  std::optional<double> gamma;  ///< overrides every similarity temperature; default sqrt(d)
  Mode mode = Mode::SuperDisco;
  std::uint64_t seed = 0;

  LevelSpec level_spec() const;
  void validate() const;
  /// Flat "key = value" text, parseable by parse_model_config().
  std::string to_text() const;
};

ModelConfig parse_model_config(const std::string& text);

/// Feature extractor f, super-class graph g (plus prototype-graph parameters in meta mode) and
/// affine classifier h.
struct Model {
  ModelConfig config;
  Mlp extractor;
  SuperClassGraph graph;
  MetaParams meta;          ///< populated in meta mode only
  Linear classifier;        ///< [d×C]
  Tensor meta_prototypes;   ///< prototypes of the meta-set under the final extractor (meta mode)
  std::string run_config;   ///< free-form text of the configuration that produced the model

  static Model init(const ModelConfig& config);

  bool uses_graph() const { return config.mode != Mode::Baseline && graph.num_levels() > 0; }
  std::vector<Param*> extractor_params();
  /// Graph, prototype-graph and classifier parameters that stage 2 optimizes.
  std::vector<Param*> stage2_params();
  /// Every parameter in declaration order (extractor, graph, meta, classifier).
  std::vector<Param*> all_params();
};

/// Extractor output for every row of `x`.
Tensor extract_features(Model& model, const Tensor& x);

/// Logits of a batch of already-extracted features, with gradients recorded when `track`.
Var logits_from_features(Tape& tape, Model& model, Var features, bool track);

/// Features fed to the classifier (after refinement) for every row of `features`.
Tensor refined_features(Model& model, const Tensor& features);

std::vector<int> predict(Model& model, const LongTailDataset& data, std::size_t batch_size = 512);

/// "SDMODEL1": model config text, run config text, then named parameter tensors in declaration
/// order and the meta-set prototypes.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace superdisco
