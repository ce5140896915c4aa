#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "superdisco/config.hpp"
#include "superdisco/model.hpp"
#include "superdisco/train.hpp"

namespace superdisco::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct GenDataOptions {
  std::size_t classes = 40;
  std::size_t supers = 8;
  double factor = 100.0;
  std::size_t n0 = 500;
  std::size_t dim = 32;
  double sep = 6.0;
  std::size_t test_per_class = 100;
  std::size_t meta_per_class = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> cifar_train;
  std::optional<std::filesystem::path> cifar_test;
};

/// Everything a training run depends on. Serializes to the flat key-value format.
struct RunConfig {
  std::filesystem::path data;  ///< SDDATA1 file; empty when reading CIFAR-100 binaries
  std::filesystem::path cifar_train;
  std::filesystem::path cifar_test;
  double factor = 100.0;  ///< CIFAR long-tail profile
  std::size_t n0 = 500;
  std::filesystem::path meta_manifest;  ///< optional fixed meta-set
  ModelConfig model;
  TrainConfig train;

  static RunConfig from_config(const KeyValueConfig& kv);
  KeyValueConfig to_config() const;
};

/// Keys accepted in a run configuration file.
const std::vector<std::string>& run_config_keys();

void gen_data(const GenDataOptions& options, std::ostream& out);
void train(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& out);
void eval(const std::filesystem::path& model_path, const std::filesystem::path& data_path,
          const std::optional<std::filesystem::path>& report_path, std::ostream& out);
void analyze(const std::filesystem::path& model_path, const std::filesystem::path& data_path, std::size_t level,
             const std::filesystem::path& out_dir, std::ostream& out);

/// Parses arguments, runs one command and maps failures to the documented exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace superdisco::cli
