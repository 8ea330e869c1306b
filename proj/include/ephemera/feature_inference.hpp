#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ephemera/sensor_model.hpp"

namespace ephemera {

/// Canonical order; context identity depends on it.
enum class FeatureKind {
    activity,
    speed,
    social,
    location,
    weather,
    time_of_day,
    physical_state,
    mood,
};

inline constexpr std::size_t kFeatureCount = 8;
inline constexpr std::array<FeatureKind, kFeatureCount> kAllFeatures{
    FeatureKind::activity, FeatureKind::speed,       FeatureKind::social,
    FeatureKind::location, FeatureKind::weather,     FeatureKind::time_of_day,
    FeatureKind::physical_state, FeatureKind::mood,
};

std::string_view to_string(FeatureKind feature);
std::optional<FeatureKind> feature_from_string(std::string_view name);
constexpr std::size_t index_of(FeatureKind f) { return static_cast<std::size_t>(f); }

struct Evidence {
    FeatureKind feature = FeatureKind::activity;
    std::string value;
    double confidence = 0.0;
    std::string source_id;
    /// Location only: free-text place this vote refers to.
    std::optional<std::string> instance;

    bool operator==(const Evidence&) const = default;
};

enum class FeatureStatus { ok, conflict, missing };

std::string_view to_string(FeatureStatus status);
std::optional<FeatureStatus> status_from_string(std::string_view name);

struct FeatureEstimate {
    FeatureKind feature = FeatureKind::activity;
    FeatureStatus status = FeatureStatus::missing;
    std::string value;
    std::optional<std::string> instance_label;
    double confidence = 0.0;
    std::vector<std::string> supporting_sources;

    bool ok() const { return status == FeatureStatus::ok; }
    bool operator==(const FeatureEstimate&) const = default;
};

/// One estimate per feature, indexed by index_of(FeatureKind).
using FeatureEstimates = std::array<FeatureEstimate, kFeatureCount>;

FeatureEstimates all_missing();

struct UserProfile {
    std::string user_id;
    /// Declaration order is kept; the first entry is the fallback baseline.
    std::vector<std::pair<std::string, double>> activity_speed_baselines;
    int resting_bpm = 60;
    std::vector<std::string> friend_device_ids;
    std::string home_timezone = "UTC";

    std::optional<double> baseline_for(std::string_view activity) const;
    bool operator==(const UserProfile&) const = default;
};

/// Throws ValidationError on empty user_id, non-positive baselines, resting_bpm outside [30,120].
void validate_profile(const UserProfile& profile);
nlohmann::json to_json(const UserProfile& profile);
UserProfile profile_from_json(const nlohmann::json& j);

/// Per-tick inputs an extractor needs beyond the readings themselves.
struct ExtractionContext {
    std::int64_t tick_ts = 0;
    std::span<const SourceDescriptor> sources;
    /// Fused activity value, when activity is OK. Read by speed and physical_state.
    std::optional<std::string> fused_activity;
};

/// Heart-rate multiplier over resting for an activity; 1.0 for unknown activities.
double activity_intensity(std::string_view activity);

/// Maps a free-text place ("Uni campus", "downtown of Sydney") to a location category.
std::optional<std::string> place_category(std::string_view place);

/// "slow" (ratio <= 0.9), "fast" (ratio >= 1.1), else "normal". Throws on baseline <= 0.
std::string classify_relative_speed(double speed_kmh, double baseline_kmh);

/// morning [06:00,12:00), afternoon [12:00,18:00), evening [18:00,22:00), night otherwise.
std::string classify_time_of_day(int minute_of_day);
/// HH:MM form; throws ValidationError when unparseable.
std::string classify_time_of_day(std::string_view local_time);

std::vector<Evidence> extract_evidence(FeatureKind feature, std::span<const SensorReading> readings,
                                       const UserProfile& profile, const ExtractionContext& ctx);

/// Relative margin the leading value must hold over the runner-up.
inline constexpr double kConflictMargin = 1.5;

/// Fuses one feature's votes into an estimate. Result is independent of evidence order.
///
/// Zero-confidence votes carry no support and are ignored. The runner-up only counts
/// toward a conflict when at least one of its sources does not also back the leader.
/// Throws ValidationError when evidence names another feature or has a confidence
/// outside [0,1].
FeatureEstimate fuse_evidence(FeatureKind feature, std::span<const Evidence> evidence);

/// Extract + fuse for all eight features; activity goes first.
FeatureEstimates infer_features(std::span<const SensorReading> readings, const UserProfile& profile,
                                std::span<const SourceDescriptor> sources, std::int64_t tick_ts);

nlohmann::json to_json(const FeatureEstimate& estimate);
FeatureEstimate estimate_from_json(const nlohmann::json& j);

}  // namespace ephemera
