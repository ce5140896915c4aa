#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "reference.hpp"
#include "superdisco/errors.hpp"
#include "superdisco/graph.hpp"
#include "superdisco/ops.hpp"
#include "test_util.hpp"

using namespace superdisco;
using superdisco::testing::param_grad_error;
using superdisco::testing::random_tensor;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("superdisco_graph_" + name);
}

SuperClassGraph random_graph(std::vector<std::size_t> counts, std::size_t d, std::size_t layers, std::uint64_t seed) {
  SuperClassGraph g = SuperClassGraph::init(LevelSpec{std::move(counts), d, layers}, seed);
  std::mt19937_64 rng(seed + 100);
  for (std::size_t l = 0; l < g.num_levels(); ++l) {
    g.level(l).vertices.value = random_tensor(g.level(l).vertices.value.shape(), rng);
    g.level(l).edge_bias.value[0] = 0.3 * static_cast<double>(l) - 0.2;
    g.level(l).attach_bias.value[0] = 0.1;
  }
  return g;
}

}  // namespace

TEST(LevelSpec, Validation) {
  EXPECT_NO_THROW((LevelSpec{{}, 4, 2}.validate()));
  EXPECT_THROW((LevelSpec{{4, 0}, 4, 2}.validate()), ConfigError);
  EXPECT_THROW((LevelSpec{{4}, 0, 2}.validate()), ConfigError);
  EXPECT_THROW((LevelSpec{{4}, 4, 0}.validate()), ConfigError);
}

TEST(InitGraph, ShapesAndDefaults) {
  SuperClassGraph g = SuperClassGraph::init(LevelSpec{{4, 8}, 16, 2}, 1);
  ASSERT_EQ(g.num_levels(), 2u);
  EXPECT_EQ(g.level(1).vertices.value.shape(), (Shape{8, 16}));
  EXPECT_EQ(g.level(0).edge_weight.value.shape(), (Shape{1, 16}));
  EXPECT_EQ(g.level(0).layers.size(), 2u);
  EXPECT_EQ(g.level(0).edge_bias.value[0], 0.0);
  EXPECT_DOUBLE_EQ(g.level(0).edge_scale, 4.0);
  EXPECT_DOUBLE_EQ(g.level(0).attach_scale, 4.0);
  EXPECT_THROW(g.level(2), IndexError);
}

TEST(InitGraph, DeterministicInSeed) {
  auto a = SuperClassGraph::init(LevelSpec{{4}, 8, 2}, 5);
  auto b = SuperClassGraph::init(LevelSpec{{4}, 8, 2}, 5);
  auto c = SuperClassGraph::init(LevelSpec{{4}, 8, 2}, 6);
  EXPECT_EQ(a.level(0).vertices.value, b.level(0).vertices.value);
  EXPECT_EQ(a.level(0).layers[1].value, b.level(0).layers[1].value);
  EXPECT_FALSE(a.level(0).vertices.value == c.level(0).vertices.value);
}

TEST(InitGraph, VertexVarianceIsOneOverD) {
  auto g = SuperClassGraph::init(LevelSpec{{400}, 50, 1}, 3);
  const auto& v = g.level(0).vertices.value.storage();
  double sq = 0.0;
  for (double x : v) sq += x * x;
  EXPECT_NEAR(sq / static_cast<double>(v.size()), 1.0 / 50.0, 0.002);
}

TEST(EdgeWeights, ClosedForm) {
  Tape tape;
  Var h = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const Tensor a = similarity_edges(h, tape.constant(Tensor::row({1, 1})), tape.constant(Tensor::scalar(0)), 1.0).value();
  EXPECT_NEAR(a(0, 1), 0.8807970779778823, 1e-15);
  EXPECT_NEAR(a(1, 0), 0.8807970779778823, 1e-15);
  EXPECT_DOUBLE_EQ(a(0, 0), 0.5);
}

TEST(EdgeWeights, InitialDiagonalIsHalf) {
  auto g = SuperClassGraph::init(LevelSpec{{6}, 8, 1}, 2);
  const Tensor a = superclass_edge_weights(g, 0);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(a(i, i), 0.5);
}

TEST(EdgeWeights, SymmetricInOpenUnitInterval) {
  auto g = random_graph({7}, 5, 1, 11);
  const Tensor a = superclass_edge_weights(g, 0);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      EXPECT_EQ(a(i, j), a(j, i));
      EXPECT_GT(a(i, j), 0.0);
      EXPECT_LT(a(i, j), 1.0);
    }
}

TEST(Attachment, ClosedForm) {
  Tape tape;
  const Tensor r = attachment_weights(tape.constant(Tensor::row({0, 0})), tape.constant(Tensor::row({4, 0})),
                                      tape.constant(Tensor::row({1, 0})), tape.constant(Tensor::scalar(0)), 2.0)
                       .value();
  EXPECT_NEAR(r(0, 0), 0.8807970779778823, 1e-15);
}

TEST(Attachment, AttachedGraphLayout) {
  auto g = random_graph({3}, 4, 1, 4);
  const std::vector<double> z{0.5, -1.0, 2.0, 0.0};
  const AttachedGraph ag = attach_sample(g, z, 0);
  ASSERT_EQ(ag.adjacency.shape(), (Shape{4, 4}));
  ASSERT_EQ(ag.vertices.shape(), (Shape{4, 4}));
  EXPECT_NEAR(ag.adjacency(0, 0), reference::sigmoid(0.1), 1e-15);
  const Tensor edges = superclass_edge_weights(g, 0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ag.adjacency(0, i + 1), ag.adjacency(i + 1, 0));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(ag.adjacency(i + 1, j + 1), edges(i, j));
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(ag.vertices(0, k), z[k]);
  EXPECT_THROW(attach_sample(g, std::vector<double>{1.0}, 0), DimensionError);
}

TEST(MessagePass, MatchesNaiveReference) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + trial % 6, d = 3;
    Tensor a({n, n});
    for (auto& v : a.storage()) v = u(rng);
    const Tensor h = random_tensor({n, d}, rng);
    std::vector<Tensor> ws{random_tensor({d, d}, rng), random_tensor({d, 2}, rng)};
    std::vector<reference::Matrix> wm{reference::to_matrix(ws[0]), reference::to_matrix(ws[1])};
    const Tensor got = message_pass(a, h, ws);
    const auto want = reference::message_pass(reference::to_matrix(a), reference::to_matrix(h), wm);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(got(i, k), want[i][k], 1e-12);
  }
}

TEST(MessagePass, DeepStackMatchesReference) {
  std::mt19937_64 rng(22);
  const Tensor a(Shape{5, 5}, 0.4);
  const Tensor h = random_tensor({5, 3}, rng);
  std::vector<Tensor> ws;
  std::vector<reference::Matrix> wm;
  for (int m = 0; m < 9; ++m) {
    ws.push_back(random_tensor({3, 3}, rng, 0.7));
    wm.push_back(reference::to_matrix(ws.back()));
  }
  const Tensor got = message_pass(a, h, ws);
  const auto want = reference::message_pass(reference::to_matrix(a), reference::to_matrix(h), wm);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got(i, k), want[i][k], 1e-12);
}

TEST(MessagePass, RejectsMismatchedShapes) {
  const Tensor a(Shape{3, 3}, 0.5);
  const std::vector<Tensor> ws{Tensor(Shape{2, 2}, 1.0)};
  EXPECT_THROW(message_pass(a, Tensor(Shape{4, 2}), ws), DimensionError);
  EXPECT_THROW(message_pass(a, Tensor(Shape{3, 3}), ws), DimensionError);
  EXPECT_THROW(message_pass(a, Tensor(Shape{3, 2}), std::vector<Tensor>{}), ConfigError);
}

TEST(Refine, MatchesNaiveReference) {
  auto g = random_graph({3, 2}, 4, 2, 8);
  std::mt19937_64 rng(8);
  const Tensor z = random_tensor({5, 4}, rng);
  const Tensor got = refine_batch(g, z);
  for (std::size_t b = 0; b < 5; ++b) {
    const auto row = z.row_span(b);
    const auto want = reference::refine(g, std::vector<double>(row.begin(), row.end()));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(got(b, k), want[k], 1e-12);
  }
}

TEST(Refine, NoLevelsIsIdentity) {
  auto g = SuperClassGraph::init(LevelSpec{{}, 4, 2}, 1);
  std::mt19937_64 rng(1);
  const Tensor z = random_tensor({3, 4}, rng);
  EXPECT_EQ(refine_batch(g, z), z);
}

TEST(Refine, SingleSampleMatchesBatch) {
  auto g = random_graph({4}, 3, 2, 2);
  std::mt19937_64 rng(2);
  const Tensor z = random_tensor({2, 3}, rng);
  const Tensor batch = refine_batch(g, z);
  const Tensor one = refine(g, z.row_span(1));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(one[k], batch(1, k), 1e-14);
}

TEST(Refine, VertexPermutationEquivariance) {
  auto g = random_graph({5}, 4, 2, 3);
  std::mt19937_64 rng(3);
  const Tensor z = random_tensor({4, 4}, rng);
  const Tensor before = refine_batch(g, z);
  auto& h = g.level(0).vertices.value;
  const Tensor original = h;
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 4; ++k) h(i, k) = original(perm[i], k);
  const Tensor after = refine_batch(g, z);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i], after[i], 1e-12);
}

TEST(Refine, GradientThroughAllEquations) {
  SuperClassGraph g = random_graph({3, 2}, 4, 2, 12);
  std::mt19937_64 rng(12);
  const Tensor z = random_tensor({3, 4}, rng);
  Param cls_w("cls", random_tensor({4, 3}, rng));
  const std::vector<int> labels{0, 2, 1};
  auto build = [&](Tape& tape) {
    auto levels = bind_graph(tape, g, true);
    Var r = refine(tape.constant(z), levels);
    return ops::cross_entropy(ops::matmul(r, tape.param(cls_w)), labels);
  };
  for (Param* p : g.all_params()) EXPECT_LT(param_grad_error(build, *p), 1e-5) << p->name;
}

TEST(Refine, FrozenVerticesGetNoGradient) {
  SuperClassGraph g = random_graph({3}, 4, 1, 13);
  g.level(0).vertices_frozen = true;
  EXPECT_EQ(g.trainable_params().size(), g.all_params().size() - 1);
  std::mt19937_64 rng(13);
  Tape tape;
  auto levels = bind_graph(tape, g, true);
  tape.backward(ops::sum(refine(tape.constant(random_tensor({2, 4}, rng)), levels)));
  for (double v : g.level(0).vertices.grad.data()) EXPECT_EQ(v, 0.0);
}

TEST(Heatmap, LevelZeroMatchesAttachment) {
  auto g = random_graph({3, 2}, 4, 1, 14);
  std::mt19937_64 rng(14);
  const Tensor classes = random_tensor({6, 4}, rng);
  const Tensor h0 = similarity_heatmap(g, classes, 0);
  ASSERT_EQ(h0.shape(), (Shape{6, 3}));
  for (std::size_t k = 0; k < 6; ++k) {
    const AttachedGraph ag = attach_sample(g, classes.row_span(k), 0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(h0(k, j), ag.adjacency(0, j + 1), 1e-15);
  }
}

TEST(Heatmap, DeeperLevelUsesRefinedFeatures) {
  auto g = random_graph({3, 2}, 4, 1, 15);
  std::mt19937_64 rng(15);
  const Tensor classes = random_tensor({5, 4}, rng);
  const Tensor h1 = similarity_heatmap(g, classes, 1);
  ASSERT_EQ(h1.shape(), (Shape{5, 2}));
  const auto& lv = g.level(1);
  const std::vector<double> wr(lv.attach_weight.value.data().begin(), lv.attach_weight.value.data().end());
  for (std::size_t k = 0; k < 5; ++k) {
    const auto row = classes.row_span(k);
    auto z = reference::attach_and_pass(g.level(0), reference::to_matrix(g.level(0).vertices.value),
                                        reference::level_edges(g.level(0), reference::to_matrix(g.level(0).vertices.value)),
                                        std::vector<double>(row.begin(), row.end()))[0];
    const auto want = reference::similarity({z}, reference::to_matrix(lv.vertices.value), wr, lv.attach_bias.value[0],
                                            lv.attach_scale);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(h1(k, j), want[0][j], 1e-12);
  }
  EXPECT_THROW(similarity_heatmap(g, classes, 2), IndexError);
}

TEST(Heatmap, ArgmaxTiesGoToLowestIndex) {
  const Tensor h = Tensor::matrix({{0.2, 0.7, 0.7}, {0.9, 0.1, 0.9}, {0.1, 0.2, 0.3}});
  EXPECT_EQ(argmax_rows(h), (std::vector<int>{1, 0, 2}));
}

TEST(Heatmap, CsvHeaderAndRows) {
  const auto path = temp_path("heatmap.csv");
  write_heatmap_csv(Tensor::matrix({{0.25, 0.75}, {0.5, 0.125}}), 1, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "class,1_v0,1_v1");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0.25,0.75");
  std::getline(in, line);
  EXPECT_EQ(line, "1,0.5,0.125");
  std::filesystem::remove(path);
}

TEST(GraphIo, RoundTrip) {
  auto g = random_graph({4, 2}, 3, 2, 16);
  g.level(0).vertices_frozen = true;
  g.level(1).edge_scale = 0.75;
  const auto path = temp_path("graph.sdg");
  save_graph(g, path);
  const SuperClassGraph back = load_graph(path);
  ASSERT_EQ(back.num_levels(), 2u);
  EXPECT_EQ(back.width(), 3u);
  EXPECT_TRUE(back.level(0).vertices_frozen);
  EXPECT_FALSE(back.level(1).vertices_frozen);
  EXPECT_EQ(back.level(1).edge_scale, 0.75);
  const auto a = g.all_params();
  const auto b = back.all_params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
  }
  std::filesystem::remove(path);
}

TEST(GraphIo, RejectsBadMagicAndMissingFile) {
  const auto path = temp_path("bad.sdg");
  std::ofstream(path, std::ios::binary) << "NOTAGRAPH";
  EXPECT_THROW(load_graph(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_graph(temp_path("missing.sdg")), IoError);
}

TEST(GraphIo, RejectsTruncatedFile) {
  auto g = random_graph({3}, 3, 1, 17);
  const auto path = temp_path("trunc.sdg");
  save_graph(g, path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 5);
  EXPECT_THROW(load_graph(path), FormatError);
  std::filesystem::remove(path);
}
