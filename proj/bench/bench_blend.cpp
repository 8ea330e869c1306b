// Parallel kernels against their serial references.
//
//   ./build/bench/bench_blend --benchmark_min_time=0.2

#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "ephemera/io.hpp"
#include "ephemera/recommenders.hpp"
#include "ephemera/simulator.hpp"

using namespace ephemera;

namespace {

Catalog synthetic_catalog(int tracks) {
    std::mt19937_64 rng(2017);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto vocab = default_vocabulary();
    Catalog catalog;
    catalog.reserve(static_cast<std::size_t>(tracks));
    for (int i = 0; i < tracks; ++i) {
        Track t{"t" + std::to_string(i), "", "", {}};
        for (auto f : kAllFeatures) {
            for (const auto& v : vocab.of(f)) {
                if (unit(rng) < 0.3) t.affinities[std::string(to_string(f)) + "=" + v] = unit(rng);
            }
        }
        catalog.push_back(std::move(t));
    }
    return catalog;
}

FeatureEstimates anna_estimates() {
    auto est = all_missing();
    const std::pair<FeatureKind, const char*> values[] = {
        {FeatureKind::activity, "jogging"},     {FeatureKind::speed, "fast"},
        {FeatureKind::social, "alone"},         {FeatureKind::location, "downtown"},
        {FeatureKind::weather, "heavy_rain"},   {FeatureKind::time_of_day, "night"},
        {FeatureKind::physical_state, "tired"}, {FeatureKind::mood, "angry"}};
    for (const auto& [f, v] : values) {
        auto& e = est[index_of(f)];
        e.feature = f;
        e.status = FeatureStatus::ok;
        e.value = v;
        e.confidence = 0.8;
    }
    return est;
}

template <bool Parallel>
void BM_Blend(benchmark::State& state) {
    const auto catalog = synthetic_catalog(static_cast<int>(state.range(0)));
    const auto specs = default_specs();
    const auto weights = default_weights_from_survey(specs);
    const auto est = anna_estimates();
    for (auto _ : state) {
        auto list = Parallel ? blend_hybrid(specs, weights, est, catalog, 10)
                             : reference::blend_hybrid_serial(specs, weights, est, catalog, 10);
        benchmark::DoNotOptimize(list);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

ReplayConfig golden() {
    const std::filesystem::path dir(EPHEMERA_DATA_DIR);
    ReplayConfig config;
    config.scenario = load_scenario(dir / "anna_scenario.jsonl");
    config.catalog = load_catalog(dir / "catalog.json");
    config.profile = load_profile(dir / "anna_profile.json");
    return config;
}

template <bool Parallel>
void BM_Sweep(benchmark::State& state) {
    const auto config = golden();
    for (auto _ : state) {
        auto sweep = Parallel ? dropout_sweep(config) : reference::dropout_sweep_serial(config);
        benchmark::DoNotOptimize(sweep);
    }
}

}  // namespace

BENCHMARK(BM_Blend<true>)->Name("blend/parallel")->Arg(1000)->Arg(10000)->Arg(100000);
BENCHMARK(BM_Blend<false>)->Name("blend/serial")->Arg(1000)->Arg(10000)->Arg(100000);
BENCHMARK(BM_Sweep<true>)->Name("sweep/parallel");
BENCHMARK(BM_Sweep<false>)->Name("sweep/serial");

BENCHMARK_MAIN();
