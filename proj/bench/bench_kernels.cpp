// Serial reference vs OpenMP for the two embarrassingly parallel kernels:
// the per-bin mixed models and the per-subject score fits.
#include <benchmark/benchmark.h>

#include "fgfpca/binning.hpp"
#include "fgfpca/global_refit.hpp"
#include "fgfpca/local_glmm.hpp"
#include "fgfpca/pipeline.hpp"
#include "fgfpca/simulation.hpp"

using namespace fgfpca;

namespace {

FunctionalDataset dataset(int N, int J)
{
    SimScenario sc;
    sc.n_subjects = N;
    sc.n_points = J;
    sc.seed = 11;
    return generate(sc).first;
}

void local_fits(benchmark::State& state, bool parallel)
{
    const auto d = dataset(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    const auto bins = build_bins(static_cast<std::size_t>(d.n_points()), 6, true, d.cyclic());
    for (auto _ : state) {
        auto out = parallel ? fit_all_bins(d, bins) : fit_all_bins_serial(d, bins);
        benchmark::DoNotOptimize(out.eta.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(bins.size()));
}

void score_fits(benchmark::State& state, bool parallel)
{
    const auto d = dataset(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    PipelineConfig cfg;
    cfg.npc = 4;
    const auto fit = fast_gfpca(d, cfg);
    const auto& phi = fit.basis.eigenfunctions_full;
    for (auto _ : state) {
        auto s = parallel ? score_only_fit_all(d, fit.beta0_full, phi, fit.score_vars)
                          : score_only_fit_all_serial(d, fit.beta0_full, phi, fit.score_vars);
        benchmark::DoNotOptimize(s.data());
    }
    state.SetItemsProcessed(state.iterations() * d.n_subjects());
}

void BM_LocalFitsSerial(benchmark::State& s) { local_fits(s, false); }
void BM_LocalFitsOpenMP(benchmark::State& s) { local_fits(s, true); }
void BM_ScoreFitsSerial(benchmark::State& s) { score_fits(s, false); }
void BM_ScoreFitsOpenMP(benchmark::State& s) { score_fits(s, true); }

} // namespace

BENCHMARK(BM_LocalFitsSerial)->Args({100, 100})->Args({500, 500})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LocalFitsOpenMP)->Args({100, 100})->Args({500, 500})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreFitsSerial)->Args({500, 100})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreFitsOpenMP)->Args({500, 100})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
