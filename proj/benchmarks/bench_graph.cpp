#include <benchmark/benchmark.h>

#include <random>

#include "superdisco/dataset.hpp"
#include "superdisco/graph.hpp"
#include "superdisco/meta.hpp"
#include "superdisco/ops.hpp"
#include "superdisco/train.hpp"

using namespace superdisco;

namespace {

Tensor gaussian(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

}  // namespace

static void BM_MessagePass(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32;
  const Tensor a(Shape{n, n}, 0.5);
  const Tensor h = gaussian({n, d}, 1);
  const std::vector<Tensor> ws{gaussian({d, d}, 2), gaussian({d, d}, 3)};
  for (auto _ : state) benchmark::DoNotOptimize(message_pass(a, h, ws));
}
BENCHMARK(BM_MessagePass)->Arg(4)->Arg(16)->Arg(64);

static void BM_RefineBatch(benchmark::State& state) {
  SuperClassGraph g = SuperClassGraph::init(LevelSpec{{8, 4}, 32, 1}, 4);
  const Tensor z = gaussian({static_cast<std::size_t>(state.range(0)), 32}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(refine_batch(g, z));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RefineBatch)->Arg(1)->Arg(128);

static void BM_RefineBackward(benchmark::State& state) {
  SuperClassGraph g = SuperClassGraph::init(LevelSpec{{8, 4}, 32, 1}, 6);
  const Tensor z = gaussian({128, 32}, 7);
  for (auto _ : state) {
    Tape tape;
    auto levels = bind_graph(tape, g, true);
    tape.backward(ops::sum(refine(tape.constant(z), levels)));
  }
}
BENCHMARK(BM_RefineBackward);

static void BM_MetaRefine(benchmark::State& state) {
  const LevelSpec spec{{8, 4}, 32, 1};
  SuperClassGraph g = SuperClassGraph::init(spec, 8);
  MetaParams meta = MetaParams::init(spec, 9);
  const Tensor z = gaussian({128, 32}, 10);
  const Tensor protos = gaussian({40, 32}, 11);
  for (auto _ : state) {
    Tape tape;
    auto levels = bind_graph(tape, g, false);
    benchmark::DoNotOptimize(meta_refine(tape.constant(z), tape.constant(protos), levels, bind_meta(tape, meta, false)));
  }
}
BENCHMARK(BM_MetaRefine);

static void BM_Stage2Epoch(benchmark::State& state) {
  SyntheticSpec spec;
  spec.counts = make_exponential_counts(500, 40, 100.0);
  spec.test_per_class = 1;
  const auto data = synth_hierarchy_dataset(spec);
  ModelConfig mc;
  mc.input_width = 32;
  mc.num_classes = 40;
  mc.feature_width = 32;
  mc.levels = {8, 4};
  mc.gnn_layers = 1;
  TrainConfig tc;
  tc.stage2_epochs = 1;
  for (auto _ : state) {
    state.PauseTiming();
    Model m = Model::init(mc);
    state.ResumeTiming();
    train_stage2(m, data.train, nullptr, tc);
  }
}
BENCHMARK(BM_Stage2Epoch)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
