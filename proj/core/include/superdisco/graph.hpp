#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "superdisco/tape.hpp"
#include "superdisco/tensor.hpp"

namespace superdisco {

/// Shape of a multi-level super-class graph.
struct LevelSpec {
  std::vector<std::size_t> counts;  ///< vertices per level, processed in order
  std::size_t width = 64;           ///< embedding width d
  std::size_t gnn_layers = 2;       ///< message-passing layers per level

  /// Throws ConfigError. An empty `counts` is allowed and makes refine() the identity.
  void validate() const;
  std::size_t num_levels() const noexcept { return counts.size(); }
  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

/// Learnable state of one super-class level.
struct GraphLevel {
  Param vertices;       ///< [C×d] super-class vertex representations
  Param edge_weight;    ///< [1×d] maps |h_i - h_j| to a scalar logit
  Param edge_bias;      ///< [1]
  double edge_scale;    ///< fixed temperature dividing |h_i - h_j|
  Param attach_weight;  ///< [1×d] maps |h_i - z| to a scalar logit
  Param attach_bias;    ///< [1]
  double attach_scale;  ///< fixed temperature dividing |h_i - z|
  std::vector<Param> layers;  ///< gnn_layers × [d×d]
  bool vertices_frozen = false;

  std::size_t size() const { return vertices.value.dim(0); }
};

class SuperClassGraph {
 public:
  SuperClassGraph() = default;

  /// H and W entries ~ Normal(0, 1/d), biases 0, scales sqrt(d). Deterministic in `seed`.
  static SuperClassGraph init(const LevelSpec& spec, std::uint64_t seed);

  const LevelSpec& spec() const noexcept { return spec_; }
  std::size_t num_levels() const noexcept { return levels_.size(); }
  std::size_t width() const noexcept { return spec_.width; }
  GraphLevel& level(std::size_t l);
  const GraphLevel& level(std::size_t l) const;

  /// Parameters that receive gradient updates (frozen vertices excluded), in declaration order.
  std::vector<Param*> trainable_params();
  /// Every parameter in declaration order.
  std::vector<Param*> all_params();
  std::vector<const Param*> all_params() const;

 private:
  LevelSpec spec_;
  std::vector<GraphLevel> levels_;
};

/// Tape bindings of one level's parameters.
struct BoundLevel {
  Var vertices;
  Var edge_weight;
  Var edge_bias;
  double edge_scale = 1.0;
  Var attach_weight;
  Var attach_bias;
  double attach_scale = 1.0;
  std::vector<Var> layers;
};

/// Records the graph's parameters on `tape`. With `track` false every parameter is a constant;
/// frozen vertices are always constants.
std::vector<BoundLevel> bind_graph(Tape& tape, SuperClassGraph& graph, bool track);

/// Edge weights shared by the super-class and prototype graphs:
/// A(i,j) = sigmoid(w · |x_i - x_j| / scale + b).
Var similarity_edges(Var nodes, Var weight, Var bias, double scale);

/// Sample-to-vertex weights [B×C]: sigmoid(w · |h_i - z_b| / scale + b).
Var attachment_weights(Var z, Var vertices, Var weight, Var bias, double scale);

/// Graph-convolution message passing over `adjacency` ([n×n] or [B×n×n]) and `vertices`
/// ([n×d] or [B×n×d]). Every layer multiplies by the symmetric-normalized adjacency with
/// self-loops and its weight matrix; ReLU follows every layer except the last.
Var message_pass(Var adjacency, Var vertices, std::span<const Var> layers);

/// Refines a batch of features Z [B×d] through every level: the sample is attached to the
/// level's vertices, messages are passed, and row 0 becomes the next level's input.
Var refine(Var z, std::span<const BoundLevel> levels);

/// Refinement with explicit per-level vertex activations (used by the prototype-guided variant).
Var refine_with_vertices(Var z, std::span<const BoundLevel> levels, std::span<const Var> vertices,
                         std::span<const Var> vertex_edges);

// Tensor-level conveniences (no gradients).

/// A^l_C for level `l`.
Tensor superclass_edge_weights(const SuperClassGraph& graph, std::size_t l);

/// Graph of a sample attached to a level: row 0 of `vertices` is z, rows 1.. the super-classes.
struct AttachedGraph {
  Tensor vertices;   ///< [(C+1)×d]
  Tensor adjacency;  ///< [(C+1)×(C+1)]
};
AttachedGraph attach_sample(const SuperClassGraph& graph, std::span<const double> z, std::size_t l);

Tensor message_pass(const Tensor& adjacency, const Tensor& vertices, std::span<const Tensor> layers);

/// Refined feature of a single sample.
Tensor refine(const SuperClassGraph& graph, std::span<const double> z);
/// Refined features of a batch [B×d].
Tensor refine_batch(const SuperClassGraph& graph, const Tensor& z);
/// Inputs to every level for a batch: element l is z^l [B×d]; element L is the final output.
std::vector<Tensor> level_inputs(const SuperClassGraph& graph, const Tensor& z);

/// Attachment weight of each class feature to each vertex of level `l` ([C×C^l]). Features are
/// first refined through levels 0..l-1.
Tensor similarity_heatmap(const SuperClassGraph& graph, const Tensor& class_features, std::size_t l);
/// Same, against explicit vertex activations.
Tensor similarity_heatmap(const GraphLevel& level, const Tensor& vertices, const Tensor& class_features);

/// Row-wise argmax of a heatmap; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& heatmap);
std::vector<int> assign_superclass(const SuperClassGraph& graph, const Tensor& class_features, std::size_t l);

// Persistence ("SDGRAPH1" container).
void save_graph(const SuperClassGraph& graph, const std::filesystem::path& path);
SuperClassGraph load_graph(const std::filesystem::path& path);

/// Heatmap CSV: header "class,<l>_v0,..,<l>_v{C-1}", one row per class.
void write_heatmap_csv(const Tensor& heatmap, std::size_t l, const std::filesystem::path& path);

}  // namespace superdisco
