#include "pderm/dgp.hpp"
#include "pderm/erm.hpp"
#include "pderm/forecaster.hpp"
#include "pderm/loss.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace pderm;

std::shared_ptr<const RuleSpace> real_space() {
    return RuleSpace::create({-2.0, 2.0}, {0.01, 1.0}, 0.95, Partition(YSpace::real));
}

void BM_SimulateAr1(benchmark::State& state) {
    const auto spec = preset("ar1_noise", {{"rho", 0.5}});
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(simulate(spec, n, 42).y.data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateAr1)->Arg(1000)->Arg(100000);

void BM_SimulateSv(benchmark::State& state) {
    const auto spec = preset("sv_returns", {{"rho", 0.9}});
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(simulate(spec, n, 42).y.data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateSv)->Arg(100000);

void BM_EmpiricalRisk(benchmark::State& state) {
    const auto spec = preset("ar1_noise", {{"rho", 0.5}});
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto problem = ErmProblem::create(simulate_stationary(spec, T + 1, 7), real_space(),
                                            BregmanLoss(LossKind::square), 0.25);
    const std::vector<double> theta{0.0, 0.27, 0.23};
    for (auto _ : state) benchmark::DoNotOptimize(empirical_risk(problem, theta));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmpiricalRisk)->Arg(1000)->Arg(4000);

void BM_QlikeRisk(benchmark::State& state) {
    const auto spec = preset("sv_returns", {{"rho", 0.9}});
    auto space = RuleSpace::create({0.01, 2.0}, {0.01, 1.0}, 0.99, Partition(YSpace::nonneg));
    const auto problem =
        ErmProblem::create(simulate_stationary(spec, 4001, 7), space, BregmanLoss(LossKind::gamma_qlike), 0.25);
    const std::vector<double> theta{0.1, 0.1, 0.8};
    for (auto _ : state) benchmark::DoNotOptimize(empirical_risk(problem, theta));
    state.SetItemsProcessed(state.iterations() * 4000);
}
BENCHMARK(BM_QlikeRisk);

void BM_Fit(benchmark::State& state) {
    const auto spec = preset("ar1_noise", {{"rho", 0.5}});
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto problem = ErmProblem::create(simulate_stationary(spec, T + 1, 7), real_space(),
                                            BregmanLoss(LossKind::square), 0.25);
    for (auto _ : state) benchmark::DoNotOptimize(fit(problem).objective);
}
BENCHMARK(BM_Fit)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_ForecasterRun(benchmark::State& state) {
    const auto spec = preset("ar1_noise", {{"rho", 0.5}});
    const auto path = simulate(spec, 10000, 3);
    const PredictionRule rule(real_space(), {0.0}, {0.3}, {0.5});
    for (auto _ : state) benchmark::DoNotOptimize(run(rule, path.y, 0.0, 1.0).d.back());
    state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_ForecasterRun);

}  // namespace

BENCHMARK_MAIN();
