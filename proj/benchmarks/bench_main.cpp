#include <benchmark/benchmark.h>

#include "hsu/admm.hpp"
#include "hsu/model.hpp"
#include "hsu/synth.hpp"
#include "hsu/unmixers.hpp"

using namespace hsu;

namespace {

SpectralCube lmm_cube(const EndmemberMatrix& M, Index N, std::uint64_t seed) {
  MatrixXd Y = M.data() * synth::sample_abundances(N, static_cast<int>(M.count()), seed).data();
  return SpectralCube(synth::add_noise(Y, 30.0, seed).noisy);
}

// Fixed iteration count so the timing reflects per-iteration cost in N.
void BM_NusalIterations(benchmark::State& state) {
  const Index N = state.range(0);
  const auto M = synth::generate_endmembers(100, 3, 1);
  const auto cube = lmm_cube(M, N, 2);
  auto spec = nusal_spec(2);
  spec.solver.tol = 0.0;
  spec.solver.max_iter = 50;
  spec.solver.adapt = false;
  const auto asmb = assemble(cube, M, spec);
  for (auto _ : state) {
    auto out = admm::solve(asmb.problem, spec.solver);
    benchmark::DoNotOptimize(out.state.Z.data());
  }
  state.SetComplexityN(N);
}
BENCHMARK(BM_NusalIterations)->RangeMultiplier(2)->Range(256, 8192)->Complexity(benchmark::oN);

void BM_RusalIterations(benchmark::State& state) {
  const Index N = state.range(0);
  const auto M = synth::generate_endmembers(100, 3, 1);
  const auto cube = lmm_cube(M, N, 3);
  auto spec = rusal_spec(20);
  spec.solver.tol = 0.0;
  spec.solver.max_iter = 50;
  spec.solver.adapt = false;
  const auto asmb = assemble(cube, M, spec);
  for (auto _ : state) {
    auto out = admm::solve(asmb.problem, spec.solver);
    benchmark::DoNotOptimize(out.state.Z.data());
  }
  state.SetComplexityN(N);
}
BENCHMARK(BM_RusalIterations)->RangeMultiplier(2)->Range(256, 8192)->Complexity(benchmark::oN);

void BM_InteractionDictionary(benchmark::State& state) {
  const auto M = synth::generate_endmembers(207, static_cast<int>(state.range(0)), 4);
  const int K = static_cast<int>(state.range(1));
  for (auto _ : state) {
    auto dict = build_interaction_matrix(M, K);
    benchmark::DoNotOptimize(dict.Q.data());
  }
}
BENCHMARK(BM_InteractionDictionary)->Args({3, 2})->Args({3, 5})->Args({6, 3})->Args({10, 4});

void BM_ProxL21(benchmark::State& state) {
  const MatrixXd V = MatrixXd::Random(state.range(0), 10000);
  for (auto _ : state) benchmark::DoNotOptimize(admm::prox_l21(V, 0.1).data());
}
BENCHMARK(BM_ProxL21)->Arg(6)->Arg(20)->Arg(77);

void BM_ProxQuadratic(benchmark::State& state) {
  const Index n = state.range(0);
  const MatrixXd S = MatrixXd::Random(207, n).cwiseAbs();
  const MatrixXd Y = MatrixXd::Random(207, 10000);
  const admm::QuadraticTerm q(Y, S);
  const MatrixXd V = MatrixXd::Random(n, 10000);
  for (auto _ : state) benchmark::DoNotOptimize(q.prox(V, 0.05).data());
}
BENCHMARK(BM_ProxQuadratic)->Arg(9)->Arg(23)->Arg(83);

}  // namespace
BENCHMARK_MAIN();
