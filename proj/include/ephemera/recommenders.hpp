#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ephemera/context_builder.hpp"
#include "ephemera/feature_inference.hpp"

namespace ephemera {

struct Track {
    std::string track_id;
    std::string title;
    std::string artist;
    /// "feature=value" -> fit in [0,1]. Absent keys count as 0.
    std::map<std::string, double> affinities;

    double affinity(const std::string& key) const;
    bool operator==(const Track&) const = default;
};

using Catalog = std::vector<Track>;

/// Throws ValidationError on duplicate ids or affinities outside [0,1].
void validate_catalog(const Catalog& catalog);
Catalog catalog_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Catalog& catalog);

struct RecommenderSpec {
    std::string rec_id;
    std::vector<FeatureKind> features;  // canonical order, no repeats

    bool operator==(const RecommenderSpec&) const = default;
};

/// Eight singleton recommenders plus {location, weather, time_of_day}.
std::vector<RecommenderSpec> default_specs();
/// Canonicalizes feature order. Throws on empty feature sets or duplicate rec_ids.
std::vector<RecommenderSpec> normalize_specs(std::vector<RecommenderSpec> specs);
nlohmann::json to_json(std::span<const RecommenderSpec> specs);
std::vector<RecommenderSpec> specs_from_json(const nlohmann::json& j);

struct HybridWeights {
    std::map<std::string, double> user_weights;
    bool operator==(const HybridWeights&) const = default;
};

/// Throws ValidationError unless every weight is finite and >= 0, one is > 0, and
/// every key names a spec.
void validate_weights(const HybridWeights& weights, std::span<const RecommenderSpec> specs);
nlohmann::json to_json(const HybridWeights& weights);
HybridWeights weights_from_json(const nlohmann::json& j);

/// Survey respondents (of 103) whose listening changes with each feature.
int survey_count(FeatureKind feature);
inline constexpr int kSurveyRespondents = 103;

/// Per-spec weight = mean of its features' survey rates.
HybridWeights default_weights_from_survey(std::span<const RecommenderSpec> specs);

struct RecommendationEntry {
    std::string track_id;
    double score = 0.0;
    bool operator==(const RecommendationEntry&) const = default;
};

struct RecommendationList {
    std::int64_t tick_ts = 0;
    std::vector<RecommendationEntry> entries;
    std::vector<std::string> active_rec_ids;
    bool operator==(const RecommendationList&) const = default;
};

nlohmann::json to_json(const RecommendationList& list);
RecommendationList recommendation_list_from_json(const nlohmann::json& j);

/// Mean affinity of `track` to the context's values on the spec's features.
/// Throws std::logic_error when one of those features is not OK.
double score_individual(const RecommenderSpec& spec, const FeatureEstimates& estimates,
                        const Track& track);

/// Specs whose every feature is OK, in spec order.
std::vector<std::string> active_recommenders(std::span<const RecommenderSpec> specs,
                                             const FeatureEstimates& estimates);

/// Reliability- and preference-weighted blend of the active recommenders; top-n tracks.
/// Track scoring runs in parallel when built with OpenMP.
/// Throws ValidationError when n < 1 or the catalog is empty.
RecommendationList blend_hybrid(std::span<const RecommenderSpec> specs,
                                const HybridWeights& weights, const FeatureEstimates& estimates,
                                const Catalog& catalog, int n, std::int64_t tick_ts = 0);

namespace reference {
/// Single-threaded blend; must agree with blend_hybrid bit for bit.
RecommendationList blend_hybrid_serial(std::span<const RecommenderSpec> specs,
                                       const HybridWeights& weights,
                                       const FeatureEstimates& estimates, const Catalog& catalog,
                                       int n, std::int64_t tick_ts = 0);
}  // namespace reference

struct TickRecord {
    EphemeralContext context;
    RecommendationList recommendations;
    bool operator==(const TickRecord&) const = default;
};

struct StatusCounts {
    int ok = 0;
    int conflict = 0;
    int missing = 0;
    bool operator==(const StatusCounts&) const = default;
};

struct MetricsReport {
    int ticks = 0;
    int distinct_contexts = 0;
    double availability = 0.0;
    double mean_consecutive_jaccard = 0.0;
    double catalog_coverage = 0.0;
    double mean_novelty = 0.0;
    std::array<StatusCounts, kFeatureCount> per_feature_status_counts{};
    bool operator==(const MetricsReport&) const = default;
};

/// Fault-tolerance and diversity metrics over a replayed session.
///
/// Jaccard is averaged over consecutive tick pairs where both lists are non-empty and
/// novelty over ticks with a non-empty list; either is 0 when no such tick exists.
/// Throws ValidationError on an empty trace.
MetricsReport session_metrics(std::span<const TickRecord> trace, const Catalog& catalog,
                              std::span<const std::string> history);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

}  // namespace ephemera
