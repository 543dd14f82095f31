#include <cmath>
#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "sqclock/analysis.hpp"
#include "sqclock/collective_spin.hpp"
#include "sqclock/constants.hpp"
#include "sqclock/io.hpp"
#include "sqclock/rng.hpp"
#include "sqclock/sequencer.hpp"

using namespace sqclock;

namespace {

void BM_SimulateShots(benchmark::State& state)
{
    ExperimentConfig cfg;
    cfg.sequence = static_cast<Sequence>(state.range(0));
    cfg.n_atoms = 240000;
    cfg.ramsey_ms = 1.3;
    cfg.shots = 10000;
    for (auto _ : state) {
        benchmark::DoNotOptimize(seq::simulate_records(cfg, 1));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.shots));
}
BENCHMARK(BM_SimulateShots)
    ->Arg(static_cast<int>(Sequence::SqueezeChar))
    ->Arg(static_cast<int>(Sequence::ClockSqueezed))
    ->Unit(benchmark::kMillisecond);

void BM_PrepareRecords(benchmark::State& state)
{
    ExperimentConfig cfg;
    cfg.shots = 10000;
    const auto recs = seq::simulate_records(cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(analysis::prepare_records(recs, cfg));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(recs.size()));
}
BENCHMARK(BM_PrepareRecords)->Unit(benchmark::kMillisecond);

void BM_AllanDeviation(benchmark::State& state)
{
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    std::vector<double> y(n);
    for (double& v : y) v = rng.normal();
    const std::unique_ptr<bool[]> mask(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) mask[i] = (i % 7) != 0;
    std::vector<double> taus;
    for (double t = 1; t <= static_cast<double>(n) / 2; t *= 2) taus.push_back(t);
    for (auto _ : state) {
        benchmark::DoNotOptimize(analysis::allan_deviation(y, std::span<const bool>(mask.get(), n), 1.0, taus));
    }
}
BENCHMARK(BM_AllanDeviation)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_FitRabi(benchmark::State& state)
{
    std::vector<std::pair<double, double>> scan;
    Rng rng(2);
    for (int i = 0; i < 25; ++i) {
        const double x = 2.0 * kPi * i / 24.0;
        scan.emplace_back(x, 0.91 * std::sin(x) + 0.002 * rng.normal());
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(analysis::fit_rabi(scan));
    }
}
BENCHMARK(BM_FitRabi);

void BM_FitDynamicRange(benchmark::State& state)
{
    const double n = 240000, xi = db_to_variance(-14.0), dx0 = 946e-6;
    std::vector<std::pair<double, double>> pts;
    for (int i = -20; i <= 20; ++i) {
        pts.emplace_back(0.01 * i, analysis::dynamic_range_model(0.01 * i, n, xi, db_to_variance(37.0), dx0));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(analysis::fit_dynamic_range(pts, n, xi, dx0));
    }
}
BENCHMARK(BM_FitDynamicRange);

void BM_RecordSerialization(benchmark::State& state)
{
    ExperimentConfig cfg;
    cfg.shots = 1000;
    const auto recs = seq::simulate_records(cfg);
    for (auto _ : state) {
        for (const ShotRecord& r : recs) {
            benchmark::DoNotOptimize(io::record_from_line(io::record_to_line(r)));
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(recs.size()));
}
BENCHMARK(BM_RecordSerialization)->Unit(benchmark::kMillisecond);

}  // namespace

// The distro benchmark_main archive carries LTO bytecode from another compiler
// version, so main comes from here.
BENCHMARK_MAIN();
