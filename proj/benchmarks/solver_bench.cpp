#include "support.hpp"

#include <benchmark/benchmark.h>

using namespace zerod;

// Forward simulation throughput on pulmonary-scale trees. The RI path keeps a
// single factorization for the whole run; quadratic resistors force a
// refactorization per Newton iteration.
static void BM_SimulateTree(benchmark::State& state) {
  const int n_elements = static_cast<int>(state.range(0));
  const bool quadratic = state.range(1) != 0;
  const auto net = test::balanced_tree_network(n_elements, quadratic ? 0.3 : 0.0);
  SimulationConfig cfg;
  cfg.steps_per_cycle = 1000;
  cfg.max_cycles = 5;
  cfg.cycle_tolerance = 1e-14; // run every cycle
  cfg.flavor = quadratic ? ModelFlavor::RRI : ModelFlavor::RI;
  for (auto _ : state) {
    auto sol = simulate(net, cfg);
    benchmark::DoNotOptimize(sol.node_pressure.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.steps_per_cycle * cfg.max_cycles);
  state.counters["elements"] = static_cast<double>(net.elements.size());
}
BENCHMARK(BM_SimulateTree)
    ->Args({60, 0})
    ->Args({60, 1})
    ->Args({300, 0})
    ->Args({300, 1})
    ->Unit(benchmark::kMillisecond);

static void BM_ResidualAssembly(benchmark::State& state) {
  const auto net = test::balanced_tree_network(static_cast<int>(state.range(0)), 0.3);
  SystemAssembler sys(net, ModelFlavor::RRI);
  const auto x = test::random_state(sys.size(), 1);
  const auto xp = test::random_state(sys.size(), 2);
  Eigen::VectorXd r;
  for (auto _ : state) {
    sys.residual(x, xp, 1e-3, 0.25, r);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_ResidualAssembly)->Arg(60)->Arg(300);

static void BM_JacobianUpdateAndFactorize(benchmark::State& state) {
  const auto net = test::balanced_tree_network(static_cast<int>(state.range(0)), 0.3);
  SystemAssembler sys(net, ModelFlavor::RRI);
  const auto x = test::random_state(sys.size(), 3);
  Eigen::SparseMatrix<double> J;
  sys.jacobian(x, 1e-3, J);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(J);
  for (auto _ : state) {
    sys.update_jacobian_values(x, 1e-3, J);
    lu.factorize(J);
    benchmark::DoNotOptimize(lu.info());
  }
}
BENCHMARK(BM_JacobianUpdateAndFactorize)->Arg(60)->Arg(300);

BENCHMARK_MAIN();
