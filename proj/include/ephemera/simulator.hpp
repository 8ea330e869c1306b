#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ephemera/context_builder.hpp"
#include "ephemera/feature_inference.hpp"
#include "ephemera/recommenders.hpp"
#include "ephemera/sensor_model.hpp"

namespace ephemera {

inline constexpr std::int64_t kDefaultWindowSeconds = 60;

struct ReplayConfig {
    Scenario scenario;
    Catalog catalog;
    UserProfile profile;
    HybridWeights weights;
    std::vector<RecommenderSpec> specs = default_specs();
    ContextVocabulary vocab = default_vocabulary();
    std::optional<FaultPlan> faults;
    std::uint64_t seed = 42;
    int top_n = 10;
    std::int64_t window_seconds = kDefaultWindowSeconds;
};

struct SessionTrace {
    std::vector<TickRecord> ticks;
    HybridWeights weights;
    std::vector<RecommenderSpec> specs;
    ContextVocabulary vocab;
    std::uint64_t seed = 0;
    int top_n = 0;
    /// Tracks reported as played during the scenario (play_event readings).
    std::vector<std::string> history;
};

struct ReplayResult {
    SessionTrace trace;
    MetricsReport report;
};

/// Deterministic tick-by-tick replay: window, infer, build context, blend, measure.
ReplayResult replay(const ReplayConfig& config);

struct DropoutSweep {
    MetricsReport baseline;
    /// One entry per declared source, that source dropped for the whole scenario.
    std::map<std::string, MetricsReport> drops;

    std::size_t size() const { return drops.size() + 1; }
};

/// Replays once per single-source full-duration drop, plus the unmodified baseline.
/// Independent replays run in parallel when built with OpenMP.
DropoutSweep dropout_sweep(const ReplayConfig& config);

namespace reference {
DropoutSweep dropout_sweep_serial(const ReplayConfig& config);
}  // namespace reference

nlohmann::json to_json(const SessionTrace& trace);
nlohmann::json to_json(const DropoutSweep& sweep);

/// Writes canonical JSON. IoError carries the path.
void emit_report(const MetricsReport& report, const std::filesystem::path& path);
void emit_report(const DropoutSweep& sweep, const std::filesystem::path& path);
void emit_trace(const SessionTrace& trace, const std::filesystem::path& path);

}  // namespace ephemera
