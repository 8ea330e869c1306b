#include "ephemera/simulator.hpp"

#include <algorithm>
#include <exception>

#include "ephemera/errors.hpp"
#include "ephemera/io.hpp"

namespace ephemera {

using nlohmann::json;

namespace {

ReplayConfig with_drop(const ReplayConfig& config, const std::string& source_id) {
    ReplayConfig dropped = config;
    std::int64_t end = config.scenario.duration_seconds;
    if (!config.scenario.readings.empty()) {
        end = std::max(end, config.scenario.readings.back().timestamp);
    }
    FaultPlan plan = config.faults.value_or(FaultPlan{});
    plan.drops.push_back({source_id, 0, end});
    dropped.faults = std::move(plan);
    return dropped;
}

}  // namespace

ReplayResult replay(const ReplayConfig& config) {
    if (config.top_n < 1) throw ValidationError("top-n must be >= 1");
    if (config.window_seconds <= 0) throw ValidationError("window must be > 0");
    validate_profile(config.profile);
    validate_vocabulary(config.vocab);
    const auto specs = normalize_specs(config.specs);
    const HybridWeights weights = config.weights.user_weights.empty()
                                      ? default_weights_from_survey(specs)
                                      : config.weights;
    validate_weights(weights, specs);

    const Scenario scenario = config.faults
                                  ? apply_fault_plan(config.scenario, *config.faults, config.seed)
                                  : config.scenario;

    ReplayResult result;
    SessionTrace& trace = result.trace;
    trace.weights = weights;
    trace.specs = specs;
    trace.vocab = config.vocab;
    trace.seed = config.seed;
    trace.top_n = config.top_n;
    for (const auto& r : scenario.readings) {
        if (const auto* play = std::get_if<PlayEvent>(&r.payload)) trace.history.push_back(play->track_id);
    }

    for (const auto tick_ts : tick_timestamps(scenario)) {
        const auto window = window_readings(scenario, tick_ts, config.window_seconds);
        const auto estimates = infer_features(window, config.profile, scenario.sources, tick_ts);
        TickRecord record;
        record.context = build_context(estimates, config.vocab, tick_ts);
        record.recommendations =
            blend_hybrid(specs, weights, estimates, config.catalog, config.top_n, tick_ts);
        trace.ticks.push_back(std::move(record));
    }
    if (trace.ticks.empty()) throw ValidationError("scenario has no ticks");

    result.report = session_metrics(trace.ticks, config.catalog, trace.history);
    return result;
}

DropoutSweep dropout_sweep(const ReplayConfig& config) {
    const auto& sources = config.scenario.sources;
    if (sources.empty()) throw ValidationError("dropout sweep needs at least one source");

    const auto count = static_cast<std::ptrdiff_t>(sources.size());
    std::vector<MetricsReport> reports(sources.size());
    std::vector<std::exception_ptr> errors(sources.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            reports[idx] = replay(with_drop(config, sources[idx].source_id)).report;
        } catch (...) {
            errors[idx] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    DropoutSweep sweep;
    sweep.baseline = replay(config).report;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        sweep.drops.emplace(sources[i].source_id, std::move(reports[i]));
    }
    return sweep;
}

namespace reference {

DropoutSweep dropout_sweep_serial(const ReplayConfig& config) {
    if (config.scenario.sources.empty()) {
        throw ValidationError("dropout sweep needs at least one source");
    }
    DropoutSweep sweep;
    sweep.baseline = replay(config).report;
    for (const auto& s : config.scenario.sources) {
        sweep.drops.emplace(s.source_id, replay(with_drop(config, s.source_id)).report);
    }
    return sweep;
}

}  // namespace reference

json to_json(const SessionTrace& trace) {
    json ticks = json::array();
    for (const auto& t : trace.ticks) {
        ticks.push_back({{"tick_ts", t.context.tick_ts},
                         {"context", to_json(t.context)},
                         {"recommendations", to_json(t.recommendations)}});
    }
    return {{"config",
             {{"weights", to_json(trace.weights)},
              {"specs", to_json(std::span<const RecommenderSpec>(trace.specs))},
              {"vocab", to_json(trace.vocab)},
              {"seed", trace.seed},
              {"top_n", trace.top_n},
              {"history", trace.history}}},
            {"ticks", ticks}};
}

json to_json(const DropoutSweep& sweep) {
    json drops = json::object();
    for (const auto& [source, report] : sweep.drops) drops[source] = to_json(report);
    return {{"baseline", to_json(sweep.baseline)}, {"drops", drops}};
}

void emit_report(const MetricsReport& report, const std::filesystem::path& path) {
    write_file(path, canonical_json(to_json(report)));
}

void emit_report(const DropoutSweep& sweep, const std::filesystem::path& path) {
    write_file(path, canonical_json(to_json(sweep)));
}

void emit_trace(const SessionTrace& trace, const std::filesystem::path& path) {
    write_file(path, canonical_json(to_json(trace)));
}

}  // namespace ephemera
