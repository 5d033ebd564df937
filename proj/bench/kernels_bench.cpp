// Serial reference vs OpenMP kernels on the example's H2 program.

#include "koopman/grid.hpp"
#include "koopman/kernels.hpp"
#include "koopman/lifting.hpp"
#include "koopman/synthesis.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace koopman;
namespace kn = koopman::kernels;

namespace
{

struct Fixture
{
  KoopmanLpvModel model = lpv_model(example_dictionary(), builtin_example());
  SchedulingGrid grid = make_grid(model, example_grid_spec());
  SdpProblem problem;
  kn::BlockMatrices X, Zinv, G;
  Vector y;

  Fixture()
  {
    problem = assemble_h2(model.A(), model.C(), subsample(grid, 7000, 1), default_margin(model.A()));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    for (const auto& r : kn::flatten(problem))
    {
      const int n = r.family->size;
      const Matrix R = Matrix::NullaryExpr(n, n, [&] { return g(rng); });
      X.push_back(R * R.transpose() + Matrix::Identity(n, n));
      Zinv.push_back(R.transpose() * R + Matrix::Identity(n, n));
      G.push_back(R + R.transpose());
    }
    y = Vector::Zero(problem.num_vars);
  }
};

const Fixture& fixture()
{
  static const Fixture f;
  return f;
}

template <bool Parallel>
void BM_SchurComplement(benchmark::State& state)
{
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kn::parallel::schur_complement(f.problem, f.X, f.Zinv)
                                      : kn::serial::schur_complement(f.problem, f.X, f.Zinv));
}

template <bool Parallel>
void BM_ConstraintMap(benchmark::State& state)
{
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kn::parallel::constraint_map(f.problem, f.G)
                                      : kn::serial::constraint_map(f.problem, f.G));
}

template <bool Parallel>
void BM_MaxPsdStep(benchmark::State& state)
{
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kn::parallel::max_psd_step(f.X, f.G)
                                      : kn::serial::max_psd_step(f.X, f.G));
}

template <bool Parallel>
void BM_MinBlockEigenvalue(benchmark::State& state)
{
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kn::parallel::min_block_eigenvalue(f.problem, f.y)
                                      : kn::serial::min_block_eigenvalue(f.problem, f.y));
}

template <bool Parallel>
void BM_InputMatrices(benchmark::State& state)
{
  const auto& f = fixture();
  const auto& m = f.model;
  auto fn = [&m](const Vector& x, const Vector& u) {
    return input_matrix(m.dict(), m.sys(), x, u, m.quad_nodes());
  };
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kn::parallel::input_matrices(fn, f.grid.xs, f.grid.us)
                                      : kn::serial::input_matrices(fn, f.grid.xs, f.grid.us));
}

} // namespace

BENCHMARK(BM_SchurComplement<false>)->Name("schur_complement/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SchurComplement<true>)->Name("schur_complement/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConstraintMap<false>)->Name("constraint_map/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConstraintMap<true>)->Name("constraint_map/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPsdStep<false>)->Name("max_psd_step/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPsdStep<true>)->Name("max_psd_step/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinBlockEigenvalue<false>)->Name("min_block_eigenvalue/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinBlockEigenvalue<true>)->Name("min_block_eigenvalue/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InputMatrices<false>)->Name("input_matrices/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InputMatrices<true>)->Name("input_matrices/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
