#include "superdisco/model.hpp"

#include <cmath>
#include <sstream>

#include "binary_io.hpp"
#include "superdisco/config.hpp"
#include "superdisco/errors.hpp"
#include "superdisco/ops.hpp"

namespace superdisco {

namespace {

constexpr std::string_view kModelMagic{"SDMODEL1", 8};

enum SeedStream : std::uint64_t { kExtractorSeed = 1, kGraphSeed = 2, kMetaSeed = 3, kClassifierSeed = 4 };

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::Baseline: return "baseline";
    case Mode::SuperDisco: return "superdisco";
    case Mode::Meta: return "meta";
    case Mode::Oracle: return "oracle";
  }
  return "unknown";
}

Mode parse_mode(const std::string& text) {
  if (text == "baseline") return Mode::Baseline;
  if (text == "superdisco") return Mode::SuperDisco;
  if (text == "meta") return Mode::Meta;
  if (text == "oracle") return Mode::Oracle;
  throw ConfigError("unknown mode '" + text + "' (expected baseline, superdisco, meta or oracle)");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Linear Linear::init(const std::string& name, std::size_t in, std::size_t out, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor w({in, out});
  for (auto& v : w.storage()) v = dist(rng);
  return Linear{Param(name + ".weight", std::move(w)), Param(name + ".bias", Tensor({1, out}, 0.0))};
}

Var Linear::forward(Tape& tape, Var x, bool track) {
  Var w = track ? tape.param(weight) : tape.constant(weight.value);
  Var b = track ? tape.param(bias) : tape.constant(bias.value);
  return ops::add_row(ops::matmul(x, w), b);
}

Mlp Mlp::init(const std::string& name, const std::vector<std::size_t>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw ConfigError("a network needs at least an input and an output width");
  std::mt19937_64 rng(seed);
  Mlp net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(widths[i]));
    net.layers.push_back(Linear::init(name + ".layer" + std::to_string(i), widths[i], widths[i + 1], stddev, rng));
  }
  return net;
}

Var Mlp::forward(Tape& tape, Var x, bool track) {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(tape, h, track);
    if (i + 1 < layers.size()) h = ops::relu(h);
  }
  return h;
}

std::vector<Param*> Mlp::params() {
  std::vector<Param*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

LevelSpec ModelConfig::level_spec() const {
  const bool graph = mode != Mode::Baseline;
  return LevelSpec{graph ? levels : std::vector<std::size_t>{}, feature_width, gnn_layers};
}

void ModelConfig::validate() const {
  if (input_width == 0) throw ConfigError("input width must be positive");
  if (feature_width == 0) throw ConfigError("feature width must be positive");
  if (num_classes < 2) throw ConfigError("at least two classes are required");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden widths must be positive");
  }
  if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be positive");
  level_spec().validate();
}

std::string ModelConfig::to_text() const {
  KeyValueConfig kv;
  kv.set("input_width", std::to_string(input_width));
  kv.set("hidden", format_tuple(hidden));
  kv.set("feature_width", std::to_string(feature_width));
  kv.set("num_classes", std::to_string(num_classes));
  kv.set("levels", format_tuple(levels));
  kv.set("gnn_layers", std::to_string(gnn_layers));
  if (gamma) {
    std::ostringstream os;
    os.precision(17);
    os << *gamma;
    kv.set("gamma", os.str());
  }
  kv.set("mode", mode_name(mode));
  kv.set("seed", std::to_string(seed));
  return kv.to_text();
}

ModelConfig parse_model_config(const std::string& text) {
  const auto kv = KeyValueConfig::parse(text);
  ModelConfig c;
  c.input_width = static_cast<std::size_t>(kv.get_int("input_width"));
  c.hidden = kv.get_tuple("hidden");
  c.feature_width = static_cast<std::size_t>(kv.get_int("feature_width"));
  c.num_classes = static_cast<std::size_t>(kv.get_int("num_classes"));
  c.levels = kv.get_tuple("levels");
  c.gnn_layers = static_cast<std::size_t>(kv.get_int("gnn_layers"));
  if (kv.has("gamma")) c.gamma = kv.get_double("gamma");
  c.mode = parse_mode(kv.get_string("mode"));
  c.seed = kv.get_uint("seed", 0);
  return c;
}

Model Model::init(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  std::vector<std::size_t> widths{config.input_width};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.feature_width);
  m.extractor = Mlp::init("extractor", widths, derive_seed(config.seed, kExtractorSeed));
  const LevelSpec spec = config.level_spec();
  m.graph = SuperClassGraph::init(spec, derive_seed(config.seed, kGraphSeed));
  if (config.mode == Mode::Meta) m.meta = MetaParams::init(spec, derive_seed(config.seed, kMetaSeed));
  if (config.gamma) {
    for (std::size_t l = 0; l < m.graph.num_levels(); ++l) {
      m.graph.level(l).edge_scale = *config.gamma;
      m.graph.level(l).attach_scale = *config.gamma;
    }
    m.meta.proto_scale = *config.gamma;
    for (auto& s : m.meta.link_scales) s = *config.gamma;
  }
  std::mt19937_64 rng(derive_seed(config.seed, kClassifierSeed));
  m.classifier = Linear::init("classifier", config.feature_width, config.num_classes,
                              1.0 / std::sqrt(static_cast<double>(config.feature_width)), rng);
  return m;
}

std::vector<Param*> Model::extractor_params() { return extractor.params(); }

std::vector<Param*> Model::stage2_params() {
  std::vector<Param*> out;
  if (config.mode != Mode::Baseline) out = graph.trainable_params();
  if (config.mode == Mode::Meta) {
    for (auto* p : meta.params()) out.push_back(p);
  }
  out.push_back(&classifier.weight);
  out.push_back(&classifier.bias);
  return out;
}

std::vector<Param*> Model::all_params() {
  std::vector<Param*> out = extractor.params();
  for (auto* p : graph.all_params()) out.push_back(p);
  if (config.mode == Mode::Meta) {
    for (auto* p : meta.params()) out.push_back(p);
  }
  out.push_back(&classifier.weight);
  out.push_back(&classifier.bias);
  return out;
}

Tensor extract_features(Model& model, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != model.config.input_width) {
    throw DimensionError("input " + shape_string(x.shape()) + " does not match extractor width " +
                         std::to_string(model.config.input_width));
  }
  Tape tape;
  return model.extractor.forward(tape, tape.constant(x), false).value();
}

Var logits_from_features(Tape& tape, Model& model, Var features, bool track) {
  Var z = features;
  if (model.uses_graph()) {
    auto levels = bind_graph(tape, model.graph, track);
    if (model.config.mode == Mode::Meta) {
      if (model.meta_prototypes.empty()) throw ContractError("meta model has no prototypes; train it first");
      auto meta = bind_meta(tape, model.meta, track);
      z = meta_refine(z, tape.constant(model.meta_prototypes), levels, meta);
    } else {
      z = refine(z, levels);
    }
  }
  return model.classifier.forward(tape, z, track);
}

Tensor refined_features(Model& model, const Tensor& features) {
  if (!model.uses_graph()) return features;
  Tape tape;
  auto levels = bind_graph(tape, model.graph, false);
  Var z = tape.constant(features);
  if (model.config.mode == Mode::Meta) {
    auto meta = bind_meta(tape, model.meta, false);
    return meta_refine(z, tape.constant(model.meta_prototypes), levels, meta).value();
  }
  return refine(z, levels).value();
}

std::vector<int> predict(Model& model, const LongTailDataset& data, std::size_t batch_size) {
  if (data.width != model.config.input_width) {
    throw DimensionError("dataset width " + std::to_string(data.width) + " does not match model input width " +
                         std::to_string(model.config.input_width));
  }
  if (data.num_classes != model.config.num_classes) {
    throw DimensionError("dataset has " + std::to_string(data.num_classes) + " classes, model predicts " +
                         std::to_string(model.config.num_classes));
  }
  std::vector<int> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    Tape tape;
    Var z = model.extractor.forward(tape, tape.constant(data.gather(idx)), false);
    const Tensor logits = logits_from_features(tape, model, z, false).value();
    for (auto k : argmax_rows(logits)) out.push_back(k);
  }
  return out;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  detail::BinaryWriter out(path);
  out.magic(kModelMagic);
  out.string(model.config.to_text());
  out.string(model.run_config);
  auto params = const_cast<Model&>(model).all_params();
  out.pod<std::uint64_t>(params.size());
  for (const Param* p : params) {
    out.string(p->name);
    out.tensor(p->value);
  }
  out.pod<std::uint8_t>(model.meta_prototypes.empty() ? 0 : 1);
  if (!model.meta_prototypes.empty()) out.tensor(model.meta_prototypes);
  for (std::size_t l = 0; l < model.graph.num_levels(); ++l) {
    out.pod<std::uint8_t>(model.graph.level(l).vertices_frozen ? 1 : 0);
  }
}

Model load_model(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kModelMagic);
  ModelConfig config = parse_model_config(in.string());
  Model model = Model::init(config);
  model.run_config = in.string();
  auto params = model.all_params();
  const auto count = in.pod<std::uint64_t>();
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model declares " +
                      std::to_string(params.size()));
  }
  for (Param* p : params) {
    const std::string name = in.string();
    if (name != p->name) throw FormatError("checkpoint parameter '" + name + "' where '" + p->name + "' was expected");
    Tensor value = in.tensor();
    if (value.shape() != p->value.shape()) throw FormatError("checkpoint parameter '" + name + "' has wrong shape");
    p->value = std::move(value);
    p->grad = Tensor(p->value.shape(), 0.0);
  }
  if (in.pod<std::uint8_t>() != 0) model.meta_prototypes = in.tensor();
  for (std::size_t l = 0; l < model.graph.num_levels(); ++l) model.graph.level(l).vertices_frozen = in.pod<std::uint8_t>() != 0;
  if (!in.at_end()) throw FormatError("trailing bytes in '" + path.string() + "'");
  return model;
}

}  // namespace superdisco
