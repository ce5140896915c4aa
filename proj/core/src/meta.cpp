#include "superdisco/meta.hpp"

#include <cmath>
#include <random>
#include <string>

#include "superdisco/errors.hpp"
#include "superdisco/ops.hpp"

namespace superdisco {

MetaParams MetaParams::init(const LevelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t d = spec.width;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  auto normal = [&](Shape shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.storage()) v = dist(rng);
    return t;
  };
  MetaParams m;
  m.proto_weight = Param("meta.proto_weight", normal({1, d}));
  m.proto_bias = Param("meta.proto_bias", Tensor({1}, 0.0));
  m.proto_scale = std::sqrt(static_cast<double>(d));
  for (std::size_t l = 0; l < spec.counts.size(); ++l) {
    m.link_scales.push_back(std::sqrt(static_cast<double>(d)));
    std::vector<Param> stack;
    for (std::size_t k = 0; k < spec.gnn_layers; ++k) {
      stack.emplace_back("meta.level" + std::to_string(l) + ".layer" + std::to_string(k), normal({d, d}));
    }
    m.layers.push_back(std::move(stack));
  }
  return m;
}

std::vector<Param*> MetaParams::params() {
  std::vector<Param*> out{&proto_weight, &proto_bias};
  for (auto& stack : layers)
    for (auto& w : stack) out.push_back(&w);
  return out;
}

std::vector<const Param*> MetaParams::params() const {
  std::vector<const Param*> out;
  for (auto* p : const_cast<MetaParams*>(this)->params()) out.push_back(p);
  return out;
}

BoundMeta bind_meta(Tape& tape, MetaParams& meta, bool track) {
  auto bind = [&](Param& p) { return track ? tape.param(p) : tape.constant(p.value); };
  BoundMeta b;
  b.proto_weight = bind(meta.proto_weight);
  b.proto_bias = bind(meta.proto_bias);
  b.proto_scale = meta.proto_scale;
  b.link_scales = meta.link_scales;
  for (auto& stack : meta.layers) {
    std::vector<Var> vs;
    for (auto& w : stack) vs.push_back(bind(w));
    b.layers.push_back(std::move(vs));
  }
  return b;
}

Tensor compute_prototypes(const Tensor& features, std::span<const int> labels, std::size_t num_classes) {
  Tape tape;
  return ops::class_means(tape.constant(features), labels, num_classes).value();
}

Tensor prototype_edge_weights(const Tensor& prototypes, const MetaParams& meta) {
  Tape tape;
  return similarity_edges(tape.constant(prototypes), tape.constant(meta.proto_weight.value),
                          tape.constant(meta.proto_bias.value), meta.proto_scale)
      .value();
}

Var super_link_weights(Var prototypes, Var vertices, double scale) {
  if (!(scale > 0.0)) throw ConfigError("link scale must be positive");
  Var sq = ops::pairwise_sq_dist(prototypes, vertices);
  return ops::row_softmax(ops::scale(sq, -0.5 / (scale * scale)));
}

Tensor super_link_weights(const Tensor& prototypes, const Tensor& vertices, double scale) {
  Tape tape;
  return super_link_weights(tape.constant(prototypes), tape.constant(vertices), scale).value();
}

namespace {

Tensor block(const Tensor& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  Tensor out({r1 - r0, c1 - c0});
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) out(i - r0, j - c0) = a(i, j);
  return out;
}

}  // namespace

Tensor SuperGraph::prototype_block() const { return block(adjacency, 0, num_prototypes, 0, num_prototypes); }
Tensor SuperGraph::link_block() const {
  return block(adjacency, 0, num_prototypes, num_prototypes, adjacency.dim(0));
}
Tensor SuperGraph::superclass_block() const {
  return block(adjacency, num_prototypes, adjacency.dim(0), num_prototypes, adjacency.dim(0));
}
Tensor SuperGraph::prototype_rows() const { return block(vertices, 0, num_prototypes, 0, vertices.dim(1)); }
Tensor SuperGraph::superclass_rows() const {
  return block(vertices, num_prototypes, vertices.dim(0), 0, vertices.dim(1));
}

SuperGraph assemble_super_graph(const Tensor& prototypes, const Tensor& prototype_edges, const Tensor& links,
                                const Tensor& superclass_vertices, const Tensor& superclass_edges) {
  if (prototypes.rank() != 2 || superclass_vertices.rank() != 2 || prototypes.dim(1) != superclass_vertices.dim(1)) {
    throw DimensionError("assemble_super_graph: prototype width " + shape_string(prototypes.shape()) +
                         " does not match super-class width " + shape_string(superclass_vertices.shape()));
  }
  Tape tape;
  Var adjacency = ops::block_adjacency(tape.constant(prototype_edges), tape.constant(links),
                                       tape.constant(superclass_edges));
  Var vertices = ops::concat_rows(tape.constant(prototypes), tape.constant(superclass_vertices));
  return SuperGraph{adjacency.value(), vertices.value(), prototypes.dim(0)};
}

SuperGraph assemble_super_graph(const Tensor& prototypes, const MetaParams& meta, const SuperClassGraph& graph,
                                std::size_t l) {
  const GraphLevel& lv = graph.level(l);
  if (l >= meta.link_scales.size()) throw IndexError("meta parameters have no level " + std::to_string(l));
  if (prototypes.rank() != 2 || prototypes.dim(1) != graph.width()) {
    throw DimensionError("assemble_super_graph: prototypes " + shape_string(prototypes.shape()) +
                         " do not match graph width " + std::to_string(graph.width()));
  }
  return assemble_super_graph(prototypes, prototype_edge_weights(prototypes, meta),
                              super_link_weights(prototypes, lv.vertices.value, meta.link_scales[l]),
                              lv.vertices.value, superclass_edge_weights(graph, l));
}

MetaPassResult meta_message_pass(const SuperGraph& graph, std::span<const Tensor> layers) {
  Tensor out = message_pass(graph.adjacency, graph.vertices, layers);
  const std::size_t k = graph.num_prototypes, n = out.dim(0);
  return MetaPassResult{block(out, 0, k, 0, out.dim(1)), block(out, k, n, 0, out.dim(1))};
}

MetaVertices meta_vertices(Var prototypes, std::span<const BoundLevel> levels, const BoundMeta& meta) {
  if (meta.layers.size() != levels.size() || meta.link_scales.size() != levels.size()) {
    throw DimensionError("meta parameters cover " + std::to_string(meta.layers.size()) + " levels, graph has " +
                         std::to_string(levels.size()));
  }
  MetaVertices out;
  Var current = prototypes;
  const std::size_t k = prototypes.value().dim(0);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const BoundLevel& lv = levels[l];
    const std::size_t c = lv.vertices.value().dim(0);
    Var proto_edges = similarity_edges(current, meta.proto_weight, meta.proto_bias, meta.proto_scale);
    Var super_edges = similarity_edges(lv.vertices, lv.edge_weight, lv.edge_bias, lv.edge_scale);
    Var links = super_link_weights(current, lv.vertices, meta.link_scales[l]);
    Var adjacency = ops::block_adjacency(proto_edges, links, super_edges);
    Var stacked = ops::concat_rows(current, lv.vertices);
    Var passed = message_pass(adjacency, stacked, meta.layers[l]);
    current = ops::slice_rows(passed, 0, k);
    out.vertices.push_back(ops::slice_rows(passed, k, k + c));
    out.edges.push_back(super_edges);
  }
  return out;
}

Var meta_refine(Var z, Var prototypes, std::span<const BoundLevel> levels, const BoundMeta& meta) {
  MetaVertices mv = meta_vertices(prototypes, levels, meta);
  return refine_with_vertices(z, levels, mv.vertices, mv.edges);
}

}  // namespace superdisco
