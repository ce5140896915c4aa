// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any gating
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "reference.hpp"
#include "superdisco/dataset.hpp"
#include "superdisco/meta.hpp"
#include "superdisco/metrics.hpp"
#include "superdisco/ops.hpp"
#include "superdisco/train.hpp"
#include "test_util.hpp"

using namespace superdisco;
using superdisco::testing::random_tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double secs, double budget) {
  const bool in_time = budget <= 0.0 || secs < budget;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.2fs", pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  if (budget > 0.0) std::printf(" / budget %.0fs", budget);
  std::printf("]\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1. Finite-difference check of every parameter group through the full composition.
Outcome gradient_oracles() {
  constexpr double kTol = 1e-5;
  const LevelSpec spec{{4, 2}, 4, 2};
  SuperClassGraph graph = SuperClassGraph::init(spec, 11);
  MetaParams meta = MetaParams::init(spec, 12);
  std::mt19937_64 rng(13);
  for (std::size_t l = 0; l < graph.num_levels(); ++l) {
    graph.level(l).vertices.value = random_tensor(graph.level(l).vertices.value.shape(), rng);
    graph.level(l).edge_bias.value[0] = 0.2;
    graph.level(l).attach_bias.value[0] = -0.1;
  }
  meta.proto_bias.value[0] = 0.3;
  const Tensor z = random_tensor({3, 4}, rng);
  const Tensor protos = random_tensor({3, 4}, rng);
  Param cls("classifier", random_tensor({4, 3}, rng));
  const std::vector<int> labels{0, 2, 1};

  double worst = 0.0;
  std::string worst_name;
  auto check = [&](const std::function<Var(Tape&)>& build, Param& p, const std::string& tag) {
    const double e = superdisco::testing::param_grad_error(build, p);
    if (e > worst) {
      worst = e;
      worst_name = tag + ":" + p.name;
    }
  };
  auto plain = [&](Tape& tape) {
    auto levels = bind_graph(tape, graph, true);
    return ops::cross_entropy(ops::matmul(refine(tape.constant(z), levels), tape.param(cls)), labels);
  };
  auto guided = [&](Tape& tape) {
    auto levels = bind_graph(tape, graph, true);
    const BoundMeta bm = bind_meta(tape, meta, true);
    Var r = meta_refine(tape.constant(z), tape.constant(protos), levels, bm);
    return ops::cross_entropy(ops::matmul(r, tape.param(cls)), labels);
  };
  for (Param* p : graph.all_params()) check(plain, *p, "refine");
  check(plain, cls, "refine");
  for (Param* p : graph.all_params()) check(guided, *p, "meta");
  for (Param* p : meta.params()) check(guided, *p, "meta");
  check(guided, cls, "meta");
  const double proto_err = superdisco::testing::input_grad_error(
      [&](Tape& tape, Var c) {
        auto levels = bind_graph(tape, graph, false);
        Var r = meta_refine(tape.constant(z), c, levels, bind_meta(tape, meta, false));
        return ops::cross_entropy(ops::matmul(r, tape.constant(cls.value)), labels);
      },
      protos);
  if (proto_err > worst) {
    worst = proto_err;
    worst_name = "meta:prototypes";
  }
  return {worst < kTol, "max relative error " + fmt("%.3g", worst) + " at " + worst_name + " (tol 1e-5)"};
}

// 2. Library message passing against the naive triple loop.
Outcome brute_force_message_pass() {
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> size(1, 6), width(1, 5), depth(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int g = 0; g < 50; ++g) {
    const std::size_t n = size(rng), d = width(rng), m = depth(rng);
    Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = unit(rng);
    const Tensor h = random_tensor({n, d}, rng);
    std::vector<Tensor> ws;
    std::vector<reference::Matrix> wm;
    for (std::size_t k = 0; k < m; ++k) {
      ws.push_back(random_tensor({d, d}, rng));
      wm.push_back(reference::to_matrix(ws.back()));
    }
    const Tensor got = message_pass(a, h, ws);
    const auto want = reference::message_pass(reference::to_matrix(a), reference::to_matrix(h), wm);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) worst = std::max(worst, std::fabs(got(i, k) - want[i][k]));

    // Meta pass over a K + C split of the same vertex count.
    const std::size_t k_protos = 1 + g % std::max<std::size_t>(n, 1);
    if (k_protos >= n) continue;
    SuperGraph sg;
    sg.adjacency = a;
    sg.vertices = h;
    sg.num_prototypes = k_protos;
    const MetaPassResult r = meta_message_pass(sg, ws);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const double v = i < k_protos ? r.prototypes(i, k) : r.superclasses(i - k_protos, k);
        worst = std::max(worst, std::fabs(v - want[i][k]));
      }
  }
  return {worst <= kTol, "max abs deviation " + fmt("%.3g", worst) + " over 50 graphs (tol 1e-12)"};
}

// 3. Randomized structural properties, 1000 cases each.
Outcome structural_invariants() {
  constexpr int kCases = 1000;
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> small(1, 6), width(1, 5);
  std::normal_distribution<double> normal(0.0, 1.0);
  int bad_a = 0, bad_b = 0, bad_c = 0, bad_d = 0, saturated_a = 0;
  double worst_perm = 0.0;
  for (int t = 0; t < kCases; ++t) {
    // (a) sigmoid similarity graphs; (0, 1) below binary64 saturation, [0, 1] above it
    {
      const std::size_t n = small(rng), d = width(rng);
      Tape tape;
      const double b = 2.0 * normal(rng);
      const Tensor x = random_tensor({n, d}, rng, 2.0);
      const Tensor w = random_tensor({1, d}, rng);
      const double scale = 0.5 + std::fabs(normal(rng));
      const Tensor a =
          similarity_edges(tape.constant(x), tape.constant(w), tape.constant(Tensor::scalar(b)), scale).value();
      const double diag = 1.0 / (1.0 + std::exp(-b));
      for (std::size_t i = 0; i < n; ++i) {
        if (std::fabs(a(i, i) - diag) > 1e-15) ++bad_a;
        for (std::size_t j = 0; j < n; ++j) {
          double logit = b;
          for (std::size_t k = 0; k < d; ++k) logit += w[k] * std::fabs(x(i, k) - x(j, k)) / scale;
          const bool saturated = std::fabs(logit) > 36.0;
          saturated_a += saturated;
          const bool in_range = saturated ? (a(i, j) >= 0.0 && a(i, j) <= 1.0) : (a(i, j) > 0.0 && a(i, j) < 1.0);
          if (a(i, j) != a(j, i) || !in_range) ++bad_a;
        }
      }
    }
    // (b) link rows
    {
      const std::size_t k = small(rng), c = small(rng), d = width(rng);
      const Tensor s = super_link_weights(random_tensor({k, d}, rng, 3.0), random_tensor({c, d}, rng, 3.0),
                                          0.2 + std::fabs(normal(rng)));
      for (std::size_t i = 0; i < k; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += s(i, j);
        if (std::fabs(total - 1.0) > 1e-12) ++bad_b;
      }
    }
    // (c) vertex permutation equivariance of refine, (d) identity with no levels
    {
      const std::size_t c = small(rng), d = width(rng);
      SuperClassGraph g = SuperClassGraph::init(LevelSpec{{c}, d, 2}, static_cast<std::uint64_t>(t));
      g.level(0).vertices.value = random_tensor({c, d}, rng);
      const Tensor z = random_tensor({2, d}, rng);
      const Tensor before = refine_batch(g, z);
      std::vector<std::size_t> perm(c);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      const Tensor original = g.level(0).vertices.value;
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t k = 0; k < d; ++k) g.level(0).vertices.value(i, k) = original(perm[i], k);
      const Tensor after = refine_batch(g, z);
      for (std::size_t i = 0; i < before.size(); ++i) {
        worst_perm = std::max(worst_perm, std::fabs(before[i] - after[i]));
        if (std::fabs(before[i] - after[i]) > 1e-12) ++bad_c;
      }
      SuperClassGraph flat = SuperClassGraph::init(LevelSpec{{}, d, 2}, static_cast<std::uint64_t>(t));
      if (!(refine_batch(flat, z) == z)) ++bad_d;
    }
  }
  const bool ok = bad_a == 0 && bad_b == 0 && bad_c == 0 && bad_d == 0;
  return {ok, "violations a=" + std::to_string(bad_a) + " b=" + std::to_string(bad_b) + " c=" +
                  std::to_string(bad_c) + " d=" + std::to_string(bad_d) + ", max permutation deviation " +
                  fmt("%.3g", worst_perm) + ", " + std::to_string(saturated_a) +
                  " saturated edges, over 1000 cases each"};
}

// 4. Long-tail profile and the CIFAR binary round trip.
Outcome dataset_math() {
  const auto counts = make_exponential_counts(500, 100, 100.0);
  const double factor = imbalance_factor(counts);
  const auto dir = std::filesystem::temp_directory_path();
  const auto src = dir / "superdisco_acceptance_cifar.bin";
  const auto dst = dir / "superdisco_acceptance_cifar_copy.bin";
  {
    std::mt19937_64 rng(41);
    std::ofstream out(src, std::ios::binary);
    for (int r = 0; r < 10; ++r) {
      out.put(static_cast<char>(rng() % 20));
      out.put(static_cast<char>(rng() % 100));
      for (int k = 0; k < 3072; ++k) out.put(static_cast<char>(rng() & 0xff));
    }
  }
  save_cifar100_binary(load_cifar100_binary(src), dst);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  const bool same = slurp(src) == slurp(dst);
  std::filesystem::remove(src);
  std::filesystem::remove(dst);
  const bool ok = counts.back() == 5 && factor == 100.0 && same;
  return {ok, "tail " + std::to_string(counts.back()) + ", imbalance " + fmt("%.2f", factor) +
                  ", CIFAR round trip " + (same ? "byte-exact" : "differs")};
}

// Calibrated run configuration (see docs/calibration.md).
struct ExperimentResult {
  std::vector<double> few[3];
  std::vector<double> purity;
  std::vector<double> coarse_imbalance;
  double class_imbalance = 0.0;
};

ExperimentResult ordering_experiment() {
  constexpr std::size_t kClasses = 40, kSupers = 8;
  ExperimentResult res;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec s;
    s.num_supers = kSupers;
    s.num_classes = kClasses;
    s.width = 32;
    s.separation = 6.0;
    s.counts = make_exponential_counts(500, kClasses, 100.0);
    s.test_per_class = 100;
    s.seed = seed;
    const DatasetBundle data = synth_hierarchy_dataset(s);
    res.class_imbalance = imbalance_factor(data.train.class_counts);

    ModelConfig mc;
    mc.input_width = 32;
    mc.num_classes = kClasses;
    mc.hidden = {128};
    mc.feature_width = 32;
    mc.levels = {8, 4};
    mc.gnn_layers = 1;
    mc.seed = seed;
    TrainConfig tc;
    tc.seed = seed;
    tc.stage1_lr = 0.01;
    tc.stage2_lr = 0.01;
    tc.meta_per_class = 5;

    // The extractor and stage-1 stream do not depend on the mode, so stage 1 is shared.
    mc.mode = Mode::Baseline;
    Model stage1 = Model::init(mc);
    train_stage1(stage1, data.train, tc);

    const Mode modes[3] = {Mode::Baseline, Mode::SuperDisco, Mode::Meta};
    for (int m = 0; m < 3; ++m) {
      mc.mode = modes[m];
      Model model = Model::init(mc);
      model.extractor = stage1.extractor;
      std::optional<LongTailDataset> meta;
      if (modes[m] == Mode::Meta) meta = sample_meta_set(data.train, tc.meta_per_class, derive_seed(seed, 23));
      train_stage2(model, data.train, meta ? &*meta : nullptr, tc);
      const EvalReport r = evaluate(predict(model, data.test), data.test.labels, data.train.class_counts);
      res.few[m].push_back(r.top1_few.value_or(0.0));

      if (modes[m] == Mode::SuperDisco) {
        const Tensor classes = compute_prototypes(extract_features(model, data.train.all_features()),
                                                  data.train.labels, kClasses);
        std::vector<int> latent(kClasses);
        for (std::size_t c = 0; c < kClasses; ++c) latent[c] = static_cast<int>(c % kSupers);
        std::size_t coarse = 0;
        for (std::size_t l = 0; l < model.graph.num_levels(); ++l) {
          const auto assign = argmax_rows(similarity_heatmap(model.graph, classes, l));
          if (model.graph.level(l).size() == kSupers) res.purity.push_back(recovery_purity(assign, latent));
          if (model.graph.level(l).size() < model.graph.level(coarse).size()) coarse = l;
        }
        const auto assign = argmax_rows(similarity_heatmap(model.graph, classes, coarse));
        res.coarse_imbalance.push_back(
            superclass_balance_report(assign, data.train.class_counts, model.graph.level(coarse).size()).imbalance);
      }
    }
    std::printf("  seed %llu few-shot: baseline %.2f superdisco %.2f meta %.2f | purity %.3f coarse imbalance %.2f\n",
                static_cast<unsigned long long>(seed), res.few[0].back(), res.few[1].back(), res.few[2].back(),
                res.purity.back(), res.coarse_imbalance.back());
    std::fflush(stdout);
  }
  return res;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Outcome ordering(const ExperimentResult& r) {
  constexpr double kGap = 1.0;
  const double b = mean(r.few[0]), s = mean(r.few[1]), m = mean(r.few[2]);
  char buf[256];
  std::snprintf(buf, sizeof buf, "few-shot means baseline %.2f, superdisco %.2f, meta %.2f; gaps %.2f and %.2f (need >= 1.00)",
                b, s, m, s - b, m - s);
  return {s - b >= kGap && m - s >= kGap, buf};
}

// Expected purity of a uniformly random assignment of C classes to K groups.
double chance_purity(std::size_t classes, std::size_t groups, int trials) {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(groups) - 1);
  std::vector<int> latent(classes), assign(classes);
  for (std::size_t c = 0; c < classes; ++c) latent[c] = static_cast<int>(c % groups);
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    for (auto& a : assign) a = pick(rng);
    total += recovery_purity(assign, latent);
  }
  return total / trials;
}

Outcome balance(const ExperimentResult& r) {
  constexpr double kPurity = 0.8;
  const double purity = mean(r.purity), imbalance = mean(r.coarse_imbalance);
  const double worst_imbalance = *std::max_element(r.coarse_imbalance.begin(), r.coarse_imbalance.end());
  const double chance = chance_purity(40, 8, 20000);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "coarsest-level imbalance mean %.2f, max %.2f vs class %.0f; purity at 8 super-classes %.3f (need >= "
                "0.80, chance %.3f)",
                imbalance, worst_imbalance, r.class_imbalance, purity, chance);
  return {worst_imbalance < r.class_imbalance && purity >= kPurity, buf};
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  auto t0 = Clock::now();
  report(1, "gradient oracles", gradient_oracles(), seconds_since(t0), 10.0);
  t0 = Clock::now();
  report(2, "message passing vs naive reference", brute_force_message_pass(), seconds_since(t0), 5.0);
  t0 = Clock::now();
  report(3, "structural invariants", structural_invariants(), seconds_since(t0), 10.0);
  t0 = Clock::now();
  report(4, "dataset math", dataset_math(), seconds_since(t0), 0.0);
  t0 = Clock::now();
  const ExperimentResult exp = ordering_experiment();
  const double exp_secs = seconds_since(t0);
  report(5, "synthetic ordering", ordering(exp), exp_secs, 300.0);
  t0 = Clock::now();
  report(6, "balance phenomenon", balance(exp), seconds_since(t0), 0.0);
  std::printf("SKIP criterion 7 (CIFAR-100-LT long run): non-gating, recipe in docs/cifar100_lt.md\n");
  std::printf("%d gating criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
