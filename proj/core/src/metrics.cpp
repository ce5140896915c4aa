#include "superdisco/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "superdisco/errors.hpp"

namespace superdisco {

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

double top1_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw DataError("top-1 accuracy of an empty prediction list");
  if (predictions.size() != labels.size()) {
    throw DimensionError(std::to_string(predictions.size()) + " predictions for " + std::to_string(labels.size()) +
                         " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

PerClassAccuracy per_class_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                    std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw DimensionError("predictions and labels differ in length");
  PerClassAccuracy out;
  out.accuracy.assign(num_classes, 0.0);
  out.support.assign(num_classes, 0);
  std::vector<std::size_t> hits(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) throw IndexError("label out of range");
    const auto c = static_cast<std::size_t>(labels[i]);
    ++out.support[c];
    hits[c] += predictions[i] == labels[i] ? 1 : 0;
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (out.support[c] > 0) out.accuracy[c] = 100.0 * static_cast<double>(hits[c]) / static_cast<double>(out.support[c]);
  }
  return out;
}

ShotBucket shot_bucket(std::size_t train_count) {
  if (train_count > 100) return ShotBucket::Many;
  if (train_count >= 20) return ShotBucket::Medium;
  return ShotBucket::Few;
}

ShotSplit split_accuracy(const PerClassAccuracy& per_class, std::span<const std::size_t> train_counts) {
  if (train_counts.size() != per_class.accuracy.size()) {
    throw DimensionError("train counts cover " + std::to_string(train_counts.size()) + " classes, accuracy covers " +
                         std::to_string(per_class.accuracy.size()));
  }
  double sum[3] = {0, 0, 0};
  std::size_t n[3] = {0, 0, 0};
  bool present[3] = {false, false, false};
  for (std::size_t c = 0; c < train_counts.size(); ++c) {
    const auto b = static_cast<std::size_t>(shot_bucket(train_counts[c]));
    present[b] = true;
    sum[b] += per_class.accuracy[c] * static_cast<double>(per_class.support[c]);
    n[b] += per_class.support[c];
  }
  auto bucket = [&](std::size_t b) -> std::optional<double> {
    if (!present[b] || n[b] == 0) return std::nullopt;
    return sum[b] / static_cast<double>(n[b]);
  };
  return ShotSplit{bucket(0), bucket(1), bucket(2), n[0], n[1], n[2]};
}

EvalReport evaluate(std::span<const int> predictions, std::span<const int> labels,
                    std::span<const std::size_t> train_counts) {
  EvalReport r;
  r.top1_all = top1_accuracy(predictions, labels);
  const auto per_class = per_class_accuracy(predictions, labels, train_counts.size());
  const auto split = split_accuracy(per_class, train_counts);
  r.top1_many = split.many;
  r.top1_medium = split.medium;
  r.top1_few = split.few;
  r.many_samples = split.many_samples;
  r.medium_samples = split.medium_samples;
  r.few_samples = split.few_samples;
  r.per_class = per_class.accuracy;
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["top1_all"] = top1_all;
  j["top1_many"] = optional_json(top1_many);
  j["top1_medium"] = optional_json(top1_medium);
  j["top1_few"] = optional_json(top1_few);
  j["per_class"] = per_class;
  j["counts"] = {{"many", many_samples}, {"medium", medium_samples}, {"few", few_samples}};
  return j.dump(2);
}

BalanceReport superclass_balance_report(std::span<const int> assignments, std::span<const std::size_t> class_counts,
                                        std::size_t num_supers) {
  if (assignments.size() != class_counts.size()) throw DimensionError("one assignment per class is required");
  BalanceReport r;
  r.totals.assign(num_supers, 0);
  std::vector<bool> used(num_supers, false);
  for (std::size_t c = 0; c < assignments.size(); ++c) {
    if (assignments[c] < 0 || static_cast<std::size_t>(assignments[c]) >= num_supers) {
      throw IndexError("super-class assignment out of range");
    }
    const auto s = static_cast<std::size_t>(assignments[c]);
    r.totals[s] += class_counts[c];
    used[s] = true;
  }
  std::size_t lo = 0, hi = 0;
  for (std::size_t s = 0; s < num_supers; ++s) {
    if (!used[s]) continue;
    if (r.populated == 0 || r.totals[s] < lo) lo = r.totals[s];
    if (r.populated == 0 || r.totals[s] > hi) hi = r.totals[s];
    ++r.populated;
  }
  r.imbalance = (r.populated == 0 || lo == 0) ? 1.0 : static_cast<double>(hi) / static_cast<double>(lo);
  return r;
}

std::string BalanceReport::to_json() const {
  nlohmann::ordered_json j;
  j["totals"] = totals;
  j["populated"] = populated;
  j["imbalance_factor"] = imbalance;
  return j.dump(2);
}

double recovery_purity(std::span<const int> assignments, std::span<const int> latent) {
  if (assignments.empty()) throw DataError("purity of an empty assignment");
  if (assignments.size() != latent.size()) throw DimensionError("assignments and latent labels differ in length");
  std::map<int, std::map<int, std::size_t>> overlap;
  for (std::size_t c = 0; c < assignments.size(); ++c) ++overlap[assignments[c]][latent[c]];
  std::size_t total = 0;
  for (const auto& [group, hits] : overlap) {
    std::size_t best = 0;
    for (const auto& [_, n] : hits) best = std::max(best, n);
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(assignments.size());
}

void export_features(const Tensor& features, std::span<const int> labels, const std::filesystem::path& path) {
  if (features.rank() != 2) throw DimensionError("features must be a matrix");
  if (features.rows() != labels.size()) throw DimensionError("one label per feature row is required");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "label";
  for (std::size_t k = 0; k < features.cols(); ++k) out << ",f" << k;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < features.rows(); ++i) {
    out << labels[i];
    for (double v : features.row_span(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

LabelledFeatures load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) throw FormatError("'" + path.string() + "' has no feature header");
  const auto width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (width == 0) throw FormatError("feature header declares no columns");
  LabelledFeatures out;
  std::vector<double> data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    int label = 0;
    auto r = std::from_chars(p, end, label);
    if (r.ec != std::errc{}) throw FormatError("bad label on line " + std::to_string(lineno));
    p = r.ptr;
    for (std::size_t k = 0; k < width; ++k) {
      if (p == end || *p != ',') throw FormatError("line " + std::to_string(lineno) + " has too few columns");
      double v = 0.0;
      r = std::from_chars(p + 1, end, v);
      if (r.ec != std::errc{}) throw FormatError("bad value on line " + std::to_string(lineno));
      data.push_back(v);
      p = r.ptr;
    }
    if (p != end) throw FormatError("line " + std::to_string(lineno) + " has too many columns");
    out.labels.push_back(label);
  }
  if (out.labels.empty()) throw FormatError("'" + path.string() + "' holds no rows");
  out.features = Tensor({out.labels.size(), width}, std::move(data));
  return out;
}

}  // namespace superdisco
