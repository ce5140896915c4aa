#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "superdisco/dataset.hpp"
#include "superdisco/errors.hpp"
#include "superdisco/graph.hpp"
#include "superdisco/metrics.hpp"

namespace superdisco::cli {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

DatasetBundle load_cifar_bundle(const std::filesystem::path& train, const std::filesystem::path& test, double factor,
                                std::size_t n0) {
  constexpr std::size_t kCifarClasses = 100;
  DatasetBundle bundle;
  bundle.train = load_cifar100_binary(train, Split::Train, make_exponential_counts(n0, kCifarClasses, factor));
  bundle.test = load_cifar100_binary(test, Split::Test);
  bundle.train.validate();
  return bundle;
}

DatasetBundle load_run_data(const RunConfig& config) {
  if (!config.data.empty()) return load_dataset(config.data);
  return load_cifar_bundle(config.cifar_train, config.cifar_test, config.factor, config.n0);
}

std::vector<int> class_latent_ids(const LongTailDataset& train) {
  std::vector<int> latent(train.num_classes, -1);
  for (std::size_t i = 0; i < train.size(); ++i) latent[static_cast<std::size_t>(train.labels[i])] = train.supers[i];
  return latent;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys{
      "data",         "cifar_train",    "cifar_test",   "factor",        "n0",          "meta_manifest",
      "mode",         "levels",         "gnn_layers",   "hidden",        "feature_width", "gamma",
      "seed",         "stage1_epochs",  "stage2_epochs", "batch_size",   "stage1_lr",   "stage2_lr",
      "momentum",     "meta_per_class", "exclude_meta", "update_extractor"};
  return keys;
}

RunConfig RunConfig::from_config(const KeyValueConfig& kv) {
  const auto unknown = kv.unknown_keys(run_config_keys());
  if (!unknown.empty()) throw ConfigError("unknown configuration key '" + unknown.front() + "'");
  RunConfig c;
  c.data = kv.get_string("data", "");
  c.cifar_train = kv.get_string("cifar_train", "");
  c.cifar_test = kv.get_string("cifar_test", "");
  if (c.data.empty() == (c.cifar_train.empty() && c.cifar_test.empty())) {
    throw ConfigError("set exactly one dataset source: 'data', or 'cifar_train' with 'cifar_test'");
  }
  if (c.data.empty() && (c.cifar_train.empty() || c.cifar_test.empty())) {
    throw ConfigError("a CIFAR-100 run needs both 'cifar_train' and 'cifar_test'");
  }
  c.factor = kv.get_double("factor", 100.0);
  c.n0 = static_cast<std::size_t>(kv.get_int("n0", 500));
  c.meta_manifest = kv.get_string("meta_manifest", "");

  c.model.mode = parse_mode(kv.get_string("mode", "superdisco"));
  c.model.levels = kv.get_tuple("levels", c.model.levels);
  c.model.gnn_layers = static_cast<std::size_t>(kv.get_int("gnn_layers", 2));
  c.model.hidden = kv.get_tuple("hidden", c.model.hidden);
  c.model.feature_width = static_cast<std::size_t>(kv.get_int("feature_width", 64));
  if (kv.has("gamma")) c.model.gamma = kv.get_double("gamma");
  c.model.seed = kv.get_uint("seed", 0);

  c.train.seed = c.model.seed;
  c.train.stage1_epochs = static_cast<std::size_t>(kv.get_int("stage1_epochs", 30));
  c.train.stage2_epochs = static_cast<std::size_t>(kv.get_int("stage2_epochs", 30));
  c.train.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", 128));
  c.train.stage1_lr = kv.get_double("stage1_lr", 0.1);
  c.train.stage2_lr = kv.get_double("stage2_lr", 0.01);
  c.train.momentum = kv.get_double("momentum", 0.9);
  c.train.meta_per_class = static_cast<std::size_t>(kv.get_int("meta_per_class", 10));
  c.train.exclude_meta = kv.get_bool("exclude_meta", false);
  c.train.update_extractor = kv.get_bool("update_extractor", false);
  for (const char* key : {"n0", "gnn_layers", "feature_width", "stage1_epochs", "stage2_epochs", "batch_size",
                          "meta_per_class"}) {
    if (kv.has(key) && kv.get_int(key) < 0) throw ConfigError(std::string(key) + " must be non-negative");
  }
  c.train.validate();
  return c;
}

KeyValueConfig RunConfig::to_config() const {
  KeyValueConfig kv;
  if (!data.empty()) {
    kv.set("data", data.string());
  } else {
    kv.set("cifar_train", cifar_train.string());
    kv.set("cifar_test", cifar_test.string());
    kv.set("factor", format_double(factor));
    kv.set("n0", std::to_string(n0));
  }
  if (!meta_manifest.empty()) kv.set("meta_manifest", meta_manifest.string());
  kv.set("mode", mode_name(model.mode));
  kv.set("levels", format_tuple(model.levels));
  kv.set("gnn_layers", std::to_string(model.gnn_layers));
  kv.set("hidden", format_tuple(model.hidden));
  kv.set("feature_width", std::to_string(model.feature_width));
  if (model.gamma) kv.set("gamma", format_double(*model.gamma));
  kv.set("seed", std::to_string(model.seed));
  kv.set("stage1_epochs", std::to_string(train.stage1_epochs));
  kv.set("stage2_epochs", std::to_string(train.stage2_epochs));
  kv.set("batch_size", std::to_string(train.batch_size));
  kv.set("stage1_lr", format_double(train.stage1_lr));
  kv.set("stage2_lr", format_double(train.stage2_lr));
  kv.set("momentum", format_double(train.momentum));
  kv.set("meta_per_class", std::to_string(train.meta_per_class));
  kv.set("exclude_meta", train.exclude_meta ? "true" : "false");
  kv.set("update_extractor", train.update_extractor ? "true" : "false");
  return kv;
}

void gen_data(const GenDataOptions& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  DatasetBundle bundle;
  if (o.cifar_train || o.cifar_test) {
    if (!o.cifar_train || !o.cifar_test) throw ConfigError("--cifar-train and --cifar-test go together");
    bundle = load_cifar_bundle(*o.cifar_train, *o.cifar_test, o.factor, o.n0);
  } else {
    SyntheticSpec spec;
    spec.num_supers = o.supers;
    spec.num_classes = o.classes;
    spec.width = o.dim;
    spec.counts = make_exponential_counts(o.n0, o.classes, o.factor);
    spec.separation = o.sep;
    spec.test_per_class = o.test_per_class;
    spec.seed = o.seed;
    bundle = synth_hierarchy_dataset(spec);
  }
  if (o.out.has_parent_path()) ensure_dir(o.out.parent_path());
  save_dataset(bundle, o.out);

  const auto& counts = bundle.train.class_counts;
  const std::size_t tail = *std::min_element(counts.begin(), counts.end());
  const std::size_t per_class = std::min(o.meta_per_class, tail);
  const auto meta = sample_meta_set(bundle.train, per_class, o.seed);
  auto manifest = o.out;
  manifest.replace_extension(".meta.csv");
  write_meta_manifest(meta, manifest);

  out << "wrote " << o.out.string() << " (" << bundle.train.size() << " train, " << bundle.test.size()
      << " test records)\n";
  out << "wrote " << manifest.string() << " (" << per_class << " per class)\n";
  out << "head count: " << *std::max_element(counts.begin(), counts.end()) << "\n";
  out << "tail count: " << tail << "\n";
  out << "imbalance factor: " << fixed2(imbalance_factor(counts)) << "\n";
}

void train(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& out) {
  if (out_dir.empty()) throw ConfigError("--out is required");
  DatasetBundle bundle = load_run_data(config);
  bundle.train.validate();

  ModelConfig mc = config.model;
  mc.input_width = bundle.train.width;
  mc.num_classes = bundle.train.num_classes;
  if (mc.mode == Mode::Oracle && !bundle.train.has_latent()) {
    throw DataError("mode=oracle needs latent super-class labels in the dataset");
  }
  Model model = Model::init(mc);
  model.run_config = config.to_config().to_text();

  ensure_dir(out_dir);
  write_text(out_dir / "config.txt", model.run_config);
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
  if (!log) throw IoError("cannot open '" + (out_dir / "train_log.jsonl").string() + "' for writing");
  auto on_epoch = [&](const EpochLog& e) {
    nlohmann::ordered_json j{{"stage", e.stage}, {"epoch", e.epoch}, {"split", e.split}, {"loss", e.loss},
                             {"top1", e.top1}};
    log << j.dump() << '\n';
    log.flush();
    out << e.stage << " epoch " << e.epoch << ": loss " << fixed2(e.loss) << ", train top-1 " << fixed2(e.top1)
        << "%\n";
  };

  TrainConfig tc = config.train;
  if (!config.meta_manifest.empty() && mc.mode == Mode::Meta) {
    const LongTailDataset meta = read_meta_manifest(bundle.train, config.meta_manifest);
    train_stage1(model, bundle.train, tc, on_epoch);
    const LongTailDataset stream = tc.exclude_meta ? exclude_records(bundle.train, meta) : bundle.train;
    train_stage2(model, stream, &meta, tc, on_epoch);
    write_meta_manifest(meta, out_dir / "meta_manifest.csv");
  } else {
    auto summary = train_model(model, bundle.train, tc, on_epoch);
    if (summary.meta_set) write_meta_manifest(*summary.meta_set, out_dir / "meta_manifest.csv");
  }
  save_model(model, out_dir / "model.sdm");

  const auto pred = predict(model, bundle.test);
  const EvalReport report = evaluate(pred, bundle.test.labels, bundle.train.class_counts);
  write_text(out_dir / "eval.json", report.to_json() + "\n");
  out << "test top-1 " << fixed2(report.top1_all) << "%";
  if (report.top1_few) out << ", few-shot " << fixed2(*report.top1_few) << "%";
  out << "\nwrote " << (out_dir / "model.sdm").string() << "\n";
}

void eval(const std::filesystem::path& model_path, const std::filesystem::path& data_path,
          const std::optional<std::filesystem::path>& report_path, std::ostream& out) {
  Model model = load_model(model_path);
  const DatasetBundle bundle = load_dataset(data_path);
  const auto pred = predict(model, bundle.test);
  const EvalReport report = evaluate(pred, bundle.test.labels, bundle.train.class_counts);
  const std::string json = report.to_json();
  if (report_path) write_text(*report_path, json + "\n");
  out << json << "\n";
}

void analyze(const std::filesystem::path& model_path, const std::filesystem::path& data_path, std::size_t level,
             const std::filesystem::path& out_dir, std::ostream& out) {
  Model model = load_model(model_path);
  if (!model.uses_graph()) throw ConfigError("model has no super-class graph to analyze");
  if (level >= model.graph.num_levels()) {
    throw ConfigError("level " + std::to_string(level) + " out of range; the model has " +
                      std::to_string(model.graph.num_levels()) + " levels");
  }
  const DatasetBundle bundle = load_dataset(data_path);
  const LongTailDataset& train = bundle.train;
  if (train.width != model.config.input_width || train.num_classes != model.config.num_classes) {
    throw DimensionError("dataset does not match the model's input width or class count");
  }

  const Tensor z = extract_features(model, train.all_features());
  const Tensor class_features = compute_prototypes(z, train.labels, train.num_classes);
  const Tensor heatmap = similarity_heatmap(model.graph, class_features, level);
  const auto assignments = argmax_rows(heatmap);
  const std::size_t supers = model.graph.level(level).size();
  const BalanceReport balance = superclass_balance_report(assignments, train.class_counts, supers);

  ensure_dir(out_dir);
  write_heatmap_csv(heatmap, level, out_dir / "heatmap.csv");
  std::ostringstream assign_csv;
  assign_csv << "class_id,super_id\n";
  for (std::size_t c = 0; c < assignments.size(); ++c) assign_csv << c << ',' << assignments[c] << '\n';
  write_text(out_dir / "assignments.csv", assign_csv.str());

  nlohmann::ordered_json j;
  j["level"] = level;
  j["superclasses"] = supers;
  j["totals"] = balance.totals;
  j["populated"] = balance.populated;
  j["imbalance_factor"] = balance.imbalance;
  j["class_imbalance_factor"] = imbalance_factor(train.class_counts);
  if (train.has_latent()) {
    j["purity"] = recovery_purity(assignments, class_latent_ids(train));
  } else {
    j["purity"] = nullptr;
  }
  const std::string text = j.dump(2);
  write_text(out_dir / "balance.json", text + "\n");
  out << text << "\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Super-class discovery for long-tailed classification"};
  app.require_subcommand(1);

  GenDataOptions gen;
  std::string gen_out, cifar_train, cifar_test;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a long-tailed dataset and its meta-set manifest");
  gen_cmd->add_option("--classes", gen.classes, "Number of classes")->capture_default_str();
  gen_cmd->add_option("--supers", gen.supers, "Number of latent super-classes")->capture_default_str();
  gen_cmd->add_option("--factor", gen.factor, "Imbalance factor")->capture_default_str();
  gen_cmd->add_option("--n0", gen.n0, "Head-class count")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Feature width")->capture_default_str();
  gen_cmd->add_option("--sep", gen.sep, "Super-centroid separation")->capture_default_str();
  gen_cmd->add_option("--test-per-class", gen.test_per_class, "Balanced test records per class")->capture_default_str();
  gen_cmd->add_option("--meta-per-class", gen.meta_per_class, "Manifest records per class (capped by the tail)")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--cifar-train", cifar_train, "CIFAR-100 train.bin to subsample instead of synthesizing");
  gen_cmd->add_option("--cifar-test", cifar_test, "CIFAR-100 test.bin");
  gen_cmd->add_option("--out", gen_out, "Output SDDATA1 file")->required();

  std::string train_config, train_out;
  auto* train_cmd = app.add_subcommand("train", "Run stage 1 and stage 2 from a config file");
  train_cmd->add_option("--config", train_config, "Run configuration file")->required();
  train_cmd->add_option("--out", train_out, "Run directory")->required();

  std::string eval_model, eval_data, eval_report;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's test split");
  eval_cmd->add_option("--model", eval_model, "SDMODEL1 checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "SDDATA1 dataset")->required();
  eval_cmd->add_option("--out", eval_report, "Write the report JSON here as well");

  std::string an_model, an_data, an_out;
  std::size_t an_level = 0;
  auto* an_cmd = app.add_subcommand("analyze", "Super-class heatmap, balance report and recovery purity");
  an_cmd->add_option("--model", an_model, "SDMODEL1 checkpoint")->required();
  an_cmd->add_option("--data", an_data, "SDDATA1 dataset")->required();
  an_cmd->add_option("--level", an_level, "Graph level to analyze")->capture_default_str();
  an_cmd->add_option("--out", an_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    if (*gen_cmd) {
      gen.out = gen_out;
      if (!cifar_train.empty()) gen.cifar_train = cifar_train;
      if (!cifar_test.empty()) gen.cifar_test = cifar_test;
      gen_data(gen, out);
    } else if (*train_cmd) {
      KeyValueConfig kv = KeyValueConfig::load(train_config);
      if (const char* env = std::getenv("SD_SEED"); env != nullptr && *env != '\0') kv.set("seed", env);
      train(RunConfig::from_config(kv), train_out, out);
    } else if (*eval_cmd) {
      std::optional<std::filesystem::path> report;
      if (!eval_report.empty()) report = eval_report;
      eval(eval_model, eval_data, report, out);
    } else if (*an_cmd) {
      analyze(an_model, an_data, an_level, an_out, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace superdisco::cli
