#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "superdisco/graph.hpp"

namespace superdisco {

/// Parameters of the prototype graph and the prototype-to-super-class message passing.
struct MetaParams {
  Param proto_weight;                      ///< [1×d]
  Param proto_bias;                        ///< [1]
  double proto_scale = 1.0;                ///< fixed temperature on |c_i - c_j|
  std::vector<double> link_scales;         ///< per-level Gaussian link width
  std::vector<std::vector<Param>> layers;  ///< per level, gnn_layers × [d×d]

  static MetaParams init(const LevelSpec& spec, std::uint64_t seed);
  std::vector<Param*> params();
  std::vector<const Param*> params() const;
};

struct BoundMeta {
  Var proto_weight;
  Var proto_bias;
  double proto_scale = 1.0;
  std::vector<double> link_scales;
  std::vector<std::vector<Var>> layers;
};

BoundMeta bind_meta(Tape& tape, MetaParams& meta, bool track);

/// Row k = mean of the meta-set features of class k ([K×d]). Throws DataError on an empty class.
Tensor compute_prototypes(const Tensor& features, std::span<const int> labels, std::size_t num_classes);

Tensor prototype_edge_weights(const Tensor& prototypes, const MetaParams& meta);

/// Softmax over vertices j of -||(c_i - h_j)/scale||² / 2; rows sum to one.
Var super_link_weights(Var prototypes, Var vertices, double scale);
Tensor super_link_weights(const Tensor& prototypes, const Tensor& vertices, double scale);

/// Joint graph over K prototypes followed by C super-class vertices.
struct SuperGraph {
  Tensor adjacency;  ///< [(K+C)×(K+C)] = [[A_P, A_S], [A_Sᵀ, A_C]]
  Tensor vertices;   ///< [(K+C)×d] = [prototypes; super-class vertices]
  std::size_t num_prototypes = 0;

  std::size_t num_superclasses() const { return vertices.dim(0) - num_prototypes; }
  Tensor prototype_block() const;
  Tensor link_block() const;
  Tensor superclass_block() const;
  Tensor prototype_rows() const;
  Tensor superclass_rows() const;
};

SuperGraph assemble_super_graph(const Tensor& prototypes, const Tensor& prototype_edges, const Tensor& links,
                                const Tensor& superclass_vertices, const Tensor& superclass_edges);
SuperGraph assemble_super_graph(const Tensor& prototypes, const MetaParams& meta, const SuperClassGraph& graph,
                                std::size_t l);

struct MetaPassResult {
  Tensor prototypes;    ///< refined prototype rows, the next level's prototypes
  Tensor superclasses;  ///< refined super-class activations for this step
};
MetaPassResult meta_message_pass(const SuperGraph& graph, std::span<const Tensor> layers);

/// Per-level refined super-class activations and the super-class edges the samples attach with.
struct MetaVertices {
  std::vector<Var> vertices;
  std::vector<Var> edges;
};

/// Runs the prototype graph through every level of the super graph.
MetaVertices meta_vertices(Var prototypes, std::span<const BoundLevel> levels, const BoundMeta& meta);

/// Prototype-guided refinement of a batch Z [B×d].
Var meta_refine(Var z, Var prototypes, std::span<const BoundLevel> levels, const BoundMeta& meta);

}  // namespace superdisco
