#include <cstdio>
#include <fstream>

#include "binary_io.hpp"
#include "superdisco/errors.hpp"
#include "superdisco/graph.hpp"

namespace superdisco {

namespace {
constexpr std::string_view kGraphMagic{"SDGRAPH1", 8};
}

// Layout: magic | u64 L | u64 d | u64 M | L × (u64 C^l, u8 frozen) | per level, f64 arrays:
// vertices, edge_weight, edge_bias, edge_scale, attach_weight, attach_bias, attach_scale, layers...
void save_graph(const SuperClassGraph& graph, const std::filesystem::path& path) {
  detail::BinaryWriter out(path);
  const LevelSpec& spec = graph.spec();
  out.magic(kGraphMagic);
  out.pod<std::uint64_t>(spec.counts.size());
  out.pod<std::uint64_t>(spec.width);
  out.pod<std::uint64_t>(spec.gnn_layers);
  for (std::size_t l = 0; l < spec.counts.size(); ++l) {
    out.pod<std::uint64_t>(spec.counts[l]);
    out.pod<std::uint8_t>(graph.level(l).vertices_frozen ? 1 : 0);
  }
  for (std::size_t l = 0; l < graph.num_levels(); ++l) {
    const GraphLevel& lv = graph.level(l);
    out.doubles(lv.vertices.value.data());
    out.doubles(lv.edge_weight.value.data());
    out.doubles(lv.edge_bias.value.data());
    out.pod<double>(lv.edge_scale);
    out.doubles(lv.attach_weight.value.data());
    out.doubles(lv.attach_bias.value.data());
    out.pod<double>(lv.attach_scale);
    for (const auto& w : lv.layers) out.doubles(w.value.data());
  }
}

SuperClassGraph load_graph(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kGraphMagic);
  LevelSpec spec;
  const auto levels = in.pod<std::uint64_t>();
  spec.width = in.pod<std::uint64_t>();
  spec.gnn_layers = in.pod<std::uint64_t>();
  if (levels > 64 || spec.width == 0 || spec.width > (1u << 16) || spec.gnn_layers == 0 || spec.gnn_layers > 64) {
    throw FormatError("implausible LevelSpec header in '" + path.string() + "'");
  }
  std::vector<bool> frozen;
  for (std::size_t l = 0; l < levels; ++l) {
    spec.counts.push_back(in.pod<std::uint64_t>());
    if (spec.counts.back() == 0 || spec.counts.back() > (1u << 20)) throw FormatError("implausible level size");
    frozen.push_back(in.pod<std::uint8_t>() != 0);
  }
  SuperClassGraph graph = SuperClassGraph::init(spec, 0);
  auto fill = [&](Param& p) { p.value = Tensor(p.value.shape(), in.doubles(p.value.size())); };
  for (std::size_t l = 0; l < levels; ++l) {
    GraphLevel& lv = graph.level(l);
    lv.vertices_frozen = frozen[l];
    fill(lv.vertices);
    fill(lv.edge_weight);
    fill(lv.edge_bias);
    lv.edge_scale = in.pod<double>();
    fill(lv.attach_weight);
    fill(lv.attach_bias);
    lv.attach_scale = in.pod<double>();
    for (auto& w : lv.layers) fill(w);
  }
  if (!in.at_end()) throw FormatError("trailing bytes in '" + path.string() + "'");
  return graph;
}

void write_heatmap_csv(const Tensor& heatmap, std::size_t l, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "class";
  for (std::size_t i = 0; i < heatmap.cols(); ++i) out << ',' << l << "_v" << i;
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < heatmap.rows(); ++k) {
    out << k;
    for (double v : heatmap.row_span(k)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

}  // namespace superdisco
