#include "superdisco/graph.hpp"

#include <cmath>
#include <random>
#include <string>

#include "superdisco/errors.hpp"
#include "superdisco/ops.hpp"

namespace superdisco {

void LevelSpec::validate() const {
  if (width == 0) throw ConfigError("graph width must be at least 1");
  if (gnn_layers == 0) throw ConfigError("each level needs at least one message-passing layer");
  for (auto c : counts) {
    if (c == 0) throw ConfigError("every level needs at least one super-class vertex");
  }
}

namespace {

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

}  // namespace

SuperClassGraph SuperClassGraph::init(const LevelSpec& spec, std::uint64_t seed) {
  spec.validate();
  SuperClassGraph g;
  g.spec_ = spec;
  std::mt19937_64 rng(seed);
  const std::size_t d = spec.width;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  const double gamma = std::sqrt(static_cast<double>(d));
  for (std::size_t l = 0; l < spec.counts.size(); ++l) {
    const std::string prefix = "graph.level" + std::to_string(l) + ".";
    GraphLevel level{
        Param(prefix + "vertices", normal_tensor({spec.counts[l], d}, stddev, rng)),
        Param(prefix + "edge_weight", normal_tensor({1, d}, stddev, rng)),
        Param(prefix + "edge_bias", Tensor({1}, 0.0)),
        gamma,
        Param(prefix + "attach_weight", normal_tensor({1, d}, stddev, rng)),
        Param(prefix + "attach_bias", Tensor({1}, 0.0)),
        gamma,
        {},
        false,
    };
    for (std::size_t m = 0; m < spec.gnn_layers; ++m) {
      level.layers.emplace_back(prefix + "layer" + std::to_string(m), normal_tensor({d, d}, stddev, rng));
    }
    g.levels_.push_back(std::move(level));
  }
  return g;
}

GraphLevel& SuperClassGraph::level(std::size_t l) {
  if (l >= levels_.size()) throw IndexError("graph level " + std::to_string(l) + " out of range");
  return levels_[l];
}

const GraphLevel& SuperClassGraph::level(std::size_t l) const {
  if (l >= levels_.size()) throw IndexError("graph level " + std::to_string(l) + " out of range");
  return levels_[l];
}

std::vector<Param*> SuperClassGraph::trainable_params() {
  std::vector<Param*> out;
  for (auto& lv : levels_) {
    if (!lv.vertices_frozen) out.push_back(&lv.vertices);
    for (Param* p : {&lv.edge_weight, &lv.edge_bias, &lv.attach_weight, &lv.attach_bias}) out.push_back(p);
    for (auto& w : lv.layers) out.push_back(&w);
  }
  return out;
}

std::vector<Param*> SuperClassGraph::all_params() {
  std::vector<Param*> out;
  for (auto& lv : levels_) {
    for (Param* p : {&lv.vertices, &lv.edge_weight, &lv.edge_bias, &lv.attach_weight, &lv.attach_bias}) out.push_back(p);
    for (auto& w : lv.layers) out.push_back(&w);
  }
  return out;
}

std::vector<const Param*> SuperClassGraph::all_params() const {
  std::vector<const Param*> out;
  for (const auto& p : const_cast<SuperClassGraph*>(this)->all_params()) out.push_back(p);
  return out;
}

std::vector<BoundLevel> bind_graph(Tape& tape, SuperClassGraph& graph, bool track) {
  auto bind = [&](Param& p) { return track ? tape.param(p) : tape.constant(p.value); };
  std::vector<BoundLevel> out;
  out.reserve(graph.num_levels());
  for (std::size_t l = 0; l < graph.num_levels(); ++l) {
    GraphLevel& lv = graph.level(l);
    BoundLevel b;
    b.vertices = (track && !lv.vertices_frozen) ? tape.param(lv.vertices) : tape.constant(lv.vertices.value);
    b.edge_weight = bind(lv.edge_weight);
    b.edge_bias = bind(lv.edge_bias);
    b.edge_scale = lv.edge_scale;
    b.attach_weight = bind(lv.attach_weight);
    b.attach_bias = bind(lv.attach_bias);
    b.attach_scale = lv.attach_scale;
    for (auto& w : lv.layers) b.layers.push_back(bind(w));
    out.push_back(std::move(b));
  }
  return out;
}

Var similarity_edges(Var nodes, Var weight, Var bias, double scale) {
  Var dist = ops::pairwise_weighted_l1(nodes, nodes, weight);
  return ops::sigmoid(ops::add_scalar(ops::scale(dist, 1.0 / scale), bias));
}

Var attachment_weights(Var z, Var vertices, Var weight, Var bias, double scale) {
  Var dist = ops::pairwise_weighted_l1(z, vertices, weight);
  return ops::sigmoid(ops::add_scalar(ops::scale(dist, 1.0 / scale), bias));
}

Var message_pass(Var adjacency, Var vertices, std::span<const Var> layers) {
  if (layers.empty()) throw ConfigError("message passing needs at least one layer");
  const Tensor& av = adjacency.value();
  const Tensor& hv = vertices.value();
  const bool batched = hv.rank() == 3;
  if (av.rank() != hv.rank() || (hv.rank() != 2 && hv.rank() != 3)) {
    throw DimensionError("message_pass: adjacency " + shape_string(av.shape()) + " and vertices " +
                         shape_string(hv.shape()) + " must both be unbatched or both batched");
  }
  const std::size_t batch = batched ? hv.dim(0) : 1;
  const std::size_t n = hv.dim(hv.rank() - 2);
  const std::size_t d = hv.dim(hv.rank() - 1);
  if (av.dim(av.rank() - 1) != n || av.dim(av.rank() - 2) != n || (batched && av.dim(0) != batch)) {
    throw DimensionError("message_pass: adjacency " + shape_string(av.shape()) + " does not match vertices " +
                         shape_string(hv.shape()));
  }
  Var norm = ops::gcn_normalize(batched ? adjacency : ops::reshape(adjacency, {1, n, n}));
  Var h = batched ? vertices : ops::reshape(vertices, {1, n, d});
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const Shape w = layers[m].value().shape();
    if (w.size() != 2 || w[0] != h.value().dim(2)) {
      throw DimensionError("message_pass: layer " + std::to_string(m) + " weight " + shape_string(w) +
                           " does not accept width " + std::to_string(h.value().dim(2)));
    }
    Var mixed = ops::bmm(norm, h);
    const std::size_t in = w[0], out = w[1];
    Var flat = ops::matmul(ops::reshape(mixed, {batch * n, in}), layers[m]);
    if (m + 1 < layers.size()) flat = ops::relu(flat);
    h = ops::reshape(flat, {batch, n, out});
  }
  return batched ? h : ops::reshape(h, {n, h.value().dim(2)});
}

Var refine_with_vertices(Var z, std::span<const BoundLevel> levels, std::span<const Var> vertices,
                         std::span<const Var> vertex_edges) {
  if (vertices.size() != levels.size() || vertex_edges.size() != levels.size()) {
    throw DimensionError("refine: one vertex set and edge matrix per level required");
  }
  if (z.value().rank() != 2) throw DimensionError("refine: expected a batch [B×d], got " + shape_string(z.shape()));
  Var current = z;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const BoundLevel& lv = levels[l];
    if (current.value().dim(1) != vertices[l].value().dim(1)) {
      throw DimensionError("refine: feature width " + std::to_string(current.value().dim(1)) +
                           " does not match graph width " + std::to_string(vertices[l].value().dim(1)));
    }
    Var links = attachment_weights(current, vertices[l], lv.attach_weight, lv.attach_bias, lv.attach_scale);
    Var self_loop = ops::sigmoid(lv.attach_bias);
    Var adjacency = ops::attach_adjacency(self_loop, links, vertex_edges[l]);
    Var stacked = ops::attach_vertices(current, vertices[l]);
    Var out = message_pass(adjacency, stacked, lv.layers);
    current = ops::select_row(out, 0);
  }
  return current;
}

Var refine(Var z, std::span<const BoundLevel> levels) {
  std::vector<Var> vertices, edges;
  for (const auto& lv : levels) {
    vertices.push_back(lv.vertices);
    edges.push_back(similarity_edges(lv.vertices, lv.edge_weight, lv.edge_bias, lv.edge_scale));
  }
  return refine_with_vertices(z, levels, vertices, edges);
}

Tensor superclass_edge_weights(const SuperClassGraph& graph, std::size_t l) {
  const GraphLevel& lv = graph.level(l);
  Tape tape;
  Var h = tape.constant(lv.vertices.value);
  return similarity_edges(h, tape.constant(lv.edge_weight.value), tape.constant(lv.edge_bias.value), lv.edge_scale)
      .value();
}

AttachedGraph attach_sample(const SuperClassGraph& graph, std::span<const double> z, std::size_t l) {
  const GraphLevel& lv = graph.level(l);
  const std::size_t d = graph.width();
  if (z.size() != d) {
    throw DimensionError("attach_sample: feature width " + std::to_string(z.size()) + " != graph width " +
                         std::to_string(d));
  }
  Tape tape;
  Var zv = tape.constant(Tensor({1, d}, std::vector<double>(z.begin(), z.end())));
  Var h = tape.constant(lv.vertices.value);
  Var bias = tape.constant(lv.attach_bias.value);
  Var links = attachment_weights(zv, h, tape.constant(lv.attach_weight.value), bias, lv.attach_scale);
  Var edges = similarity_edges(h, tape.constant(lv.edge_weight.value), tape.constant(lv.edge_bias.value), lv.edge_scale);
  Var adjacency = ops::attach_adjacency(ops::sigmoid(bias), links, edges);
  Var stacked = ops::attach_vertices(zv, h);
  const std::size_t n = lv.size() + 1;
  return AttachedGraph{stacked.value().reshaped({n, d}), adjacency.value().reshaped({n, n})};
}

Tensor message_pass(const Tensor& adjacency, const Tensor& vertices, std::span<const Tensor> layers) {
  Tape tape;
  std::vector<Var> ws;
  for (const auto& w : layers) ws.push_back(tape.constant(w));
  return message_pass(tape.constant(adjacency), tape.constant(vertices), ws).value();
}

Tensor refine_batch(const SuperClassGraph& graph, const Tensor& z) {
  Tape tape;
  auto levels = bind_graph(tape, const_cast<SuperClassGraph&>(graph), false);
  return refine(tape.constant(z), levels).value();
}

Tensor refine(const SuperClassGraph& graph, std::span<const double> z) {
  Tensor batch({1, z.size()}, std::vector<double>(z.begin(), z.end()));
  Tensor out = refine_batch(graph, batch);
  return out.reshaped({out.size()});
}

std::vector<Tensor> level_inputs(const SuperClassGraph& graph, const Tensor& z) {
  std::vector<Tensor> out{z};
  Tape tape;
  auto levels = bind_graph(tape, const_cast<SuperClassGraph&>(graph), false);
  Var current = tape.constant(z);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    current = refine(current, std::span<const BoundLevel>(&levels[l], 1));
    out.push_back(current.value());
  }
  return out;
}

Tensor similarity_heatmap(const GraphLevel& level, const Tensor& vertices, const Tensor& class_features) {
  if (class_features.rank() != 2 || class_features.dim(1) != vertices.dim(1)) {
    throw DimensionError("similarity_heatmap: class features " + shape_string(class_features.shape()) +
                         " do not match vertex width " + std::to_string(vertices.dim(1)));
  }
  Tape tape;
  return attachment_weights(tape.constant(class_features), tape.constant(vertices),
                            tape.constant(level.attach_weight.value), tape.constant(level.attach_bias.value),
                            level.attach_scale)
      .value();
}

Tensor similarity_heatmap(const SuperClassGraph& graph, const Tensor& class_features, std::size_t l) {
  const GraphLevel& lv = graph.level(l);
  if (l == 0) return similarity_heatmap(lv, lv.vertices.value, class_features);
  Tape tape;
  auto levels = bind_graph(tape, const_cast<SuperClassGraph&>(graph), false);
  const Tensor inputs = refine(tape.constant(class_features), std::span<const BoundLevel>(levels.data(), l)).value();
  return similarity_heatmap(lv, lv.vertices.value, inputs);
}

std::vector<int> argmax_rows(const Tensor& heatmap) {
  std::vector<int> out;
  out.reserve(heatmap.rows());
  for (std::size_t k = 0; k < heatmap.rows(); ++k) {
    auto row = heatmap.row_span(k);
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (row[i] > row[best]) best = i;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

std::vector<int> assign_superclass(const SuperClassGraph& graph, const Tensor& class_features, std::size_t l) {
  return argmax_rows(similarity_heatmap(graph, class_features, l));
}

}  // namespace superdisco
