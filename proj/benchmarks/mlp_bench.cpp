#include <zerod/mlp.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace zerod;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = d(rng);
  return m;
}

} // namespace

// Full-batch training cost for the two network shapes in use.
static void BM_TrainEpochs(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const bool big = state.range(1) != 0;
  const int dim = big ? 18 : 17;
  const Eigen::MatrixXd X = random_matrix(rows, dim, 5);
  const Eigen::VectorXd y = random_matrix(rows, 1, 6).col(0);
  const std::vector<int> gammas(rows, 1);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.loss = LossKind::ProximityWeighted;
  const auto hidden = big ? std::vector<int>{20, 20, 20, 20} : std::vector<int>{10, 10};
  for (auto _ : state) {
    auto out = train(X, y, gammas, big ? ElementClass::Junction : ElementClass::Vessel,
                     big ? TargetKind::Inductance : TargetKind::RLin, hidden, cfg);
    benchmark::DoNotOptimize(out.epoch_loss.back());
  }
  state.SetItemsProcessed(state.iterations() * cfg.epochs);
}
BENCHMARK(BM_TrainEpochs)->Args({200, 0})->Args({200, 1})->Unit(benchmark::kMillisecond);

static void BM_ForwardBatch(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const auto model = initialize_model(ElementClass::Junction, TargetKind::Inductance, 18,
                                      {20, 20, 20, 20}, 3);
  const Eigen::MatrixXd X = random_matrix(rows, 18, 9);
  for (auto _ : state) {
    auto y = forward_batch(model, X);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_ForwardBatch)->Arg(200);
