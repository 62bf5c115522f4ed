#include <benchmark/benchmark.h>

#include "hjlab/characteristics.hpp"
#include "hjlab/model.hpp"
#include "hjlab/observables.hpp"
#include "hjlab/psi.hpp"
#include "hjlab/variational.hpp"

using namespace hjlab;

namespace {

InteractionSpec square_interaction() { return make_interaction(1, 2, Dense::from_rows({{1.0}})); }

void BM_Eigensystem(benchmark::State& state) {
  const int D = int(state.range(0));
  SymMatrix a = random_wishart(D, 3);
  for (auto _ : state) benchmark::DoNotOptimize(eigensystem(a));
}
BENCHMARK(BM_Eigensystem)->Arg(2)->Arg(4)->Arg(8);

void BM_Dsqrt(benchmark::State& state) {
  const int D = int(state.range(0));
  ConePoint h(random_wishart(D, 5) + 0.1 * SymMatrix::identity(D));
  SymMatrix a = random_wishart(D, 6);
  for (auto _ : state) benchmark::DoNotOptimize(dsqrt(h, a));
}
BENCHMARK(BM_Dsqrt)->Arg(2)->Arg(4)->Arg(8);

void BM_HGrad(benchmark::State& state) {
  const int D = 2, p = int(state.range(0));
  int rows = 1;
  for (int k = 0; k < p; ++k) rows *= D;
  Dense A(rows, 1, std::vector<double>(rows, 0.5));
  InteractionSpec spec = make_interaction(D, p, A);
  SymMatrix q = random_wishart(D, 7);
  for (auto _ : state) benchmark::DoNotOptimize(h_grad(spec, q));
}
BENCHMARK(BM_HGrad)->Arg(2)->Arg(3)->Arg(4);

// Exact posterior for one observation; cost is linear in |support|^N.
void BM_Posterior(benchmark::State& state) {
  const int N = int(state.range(0));
  ModelSpec spec = make_model(rademacher_prior(1), square_interaction(), N);
  auto table = std::make_shared<const ConfigTable>(spec);
  Channel ch(table, 0.2, ConePoint(SymMatrix::scalar(0.3)));
  DisorderSample d = sample_disorder(spec, 1);
  std::vector<double> y = ch.observation(d);
  Posterior post(ch);
  for (auto _ : state) {
    post.assign(y);
    benchmark::DoNotOptimize(post.log_partition());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(table->size()));
}
BENCHMARK(BM_Posterior)->Arg(2)->Arg(6)->Arg(10)->Arg(14);

void BM_QuenchedQuadrature(benchmark::State& state) {
  ModelSpec spec = make_model(rademacher_prior(1), square_interaction(), 2);
  QuenchedOptions q;
  q.nodes = int(state.range(0));
  q.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(free_energy(spec, 0.2, ConePoint(SymMatrix::scalar(0.3)), q));
}
BENCHMARK(BM_QuenchedQuadrature)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_QuenchedMonteCarlo(benchmark::State& state) {
  ModelSpec spec = make_model(rademacher_prior(1), square_interaction(), 8);
  QuenchedOptions q;
  q.method = Method::monte_carlo;
  q.budget = state.range(0);
  q.seed = 1;
  q.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(free_energy(spec, 0.2, ConePoint(SymMatrix::scalar(0.3)), q));
}
BENCHMARK(BM_QuenchedMonteCarlo)->Arg(1000)->Unit(benchmark::kMillisecond);

// Cold solver each iteration, so memo tables do not hide the ascent cost.
void BM_Hopf(benchmark::State& state) {
  PsiOracle psi(rademacher_prior(1));
  for (auto _ : state) {
    VariationalSolver solver(psi.as_function(), square_interaction());
    benchmark::DoNotOptimize(solver.hopf(0.2, SymMatrix::scalar(0.3)).value);
  }
}
BENCHMARK(BM_Hopf)->Unit(benchmark::kMillisecond);

void BM_CharInvert(benchmark::State& state) {
  PsiOracle psi(rademacher_prior(1));
  auto grad = [&](const SymMatrix& h) { return psi.grad(h); };
  ConePoint k(SymMatrix::scalar(0.4));
  for (auto _ : state) benchmark::DoNotOptimize(char_invert(grad, square_interaction(), 0.1, k));
}
BENCHMARK(BM_CharInvert);

}  // namespace

BENCHMARK_MAIN();
