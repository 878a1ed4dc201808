#include <benchmark/benchmark.h>

#include "realism/conditioning.hpp"
#include "realism/gnn.hpp"
#include "realism/metrics.hpp"
#include "realism/numerics.hpp"
#include "realism/planner.hpp"

using namespace realism;

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = Matrix::gaussian(n, n, 1.0, rng), b = Matrix::gaussian(n, n, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

static void BM_GnnForward(benchmark::State& state) {
  const auto g = default_ontology();
  const Matrix agg = aggregation_matrix(g);
  Rng rng(2);
  const GnnParams p = init_gnn(16, 32, rng);
  Vector probs(g.size());
  for (double& v : probs) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(gnn_forward(agg, probs, p));
}
BENCHMARK(BM_GnnForward);

static void BM_GnnObjectiveWithGrad(benchmark::State& state) {
  const auto g = default_ontology();
  const Matrix agg = aggregation_matrix(g);
  Rng rng(3);
  const GnnParams p = init_gnn(16, 32, rng);
  std::vector<Vector> data(64, Vector(g.size()));
  for (auto& v : data)
    for (double& x : v) x = rng.uniform();
  const auto pairs = sample_unconnected_pairs(g, g.relations().size(), rng);
  for (auto _ : state) {
    GnnParams grads = zeros_like(p);
    benchmark::DoNotOptimize(gnn_objective(g, agg, data, p, pairs, 0.15, &grads));
  }
}
BENCHMARK(BM_GnnObjectiveWithGrad);

static void BM_SolveDefaultOntology(benchmark::State& state) {
  const auto g = default_ontology();
  const auto d = compile_domain(g);
  PlanProblem p;
  p.initial.assign(g.size(), false);
  p.initial[g.index_of("lighting.uniform")] = true;
  p.goal.assign(g.size(), false);
  for (const char* id : {"shadows.present", "scene.object_interaction", "scene.realistic_scatter",
                         "optical.compression_artifacts"})
    p.goal[g.index_of(id)] = true;
  for (auto _ : state) benchmark::DoNotOptimize(solve(p, d));
}
BENCHMARK(BM_SolveDefaultOntology);

static void BM_Ssim(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  Image a{side, side, 3, Vector(side * side * 3)}, b = a;
  for (double& v : a.data) v = rng.uniform();
  for (double& v : b.data) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

static void BM_MakeTokens(benchmark::State& state) {
  const auto p = init_conditioning(14, 32, kDefaultAttentionDim, 5);
  Rng rng(5);
  const RealismEmbedding e{"x", Matrix::gaussian(14, 32, 1.0, rng)};
  for (auto _ : state) benchmark::DoNotOptimize(make_tokens(e, p));
}
BENCHMARK(BM_MakeTokens);
BENCHMARK_MAIN();
