#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

namespace ephemera {

enum class SourceKind {
    accelerometer,
    gps,
    bluetooth,
    microphone,
    moisture,
    clock,
    heart_rate,
    respiration,
    camera_emotion,
    social_media,
    calendar,
    weather_api,
    place_api,
    player,  // listening client; emits play_event readings
};

std::string_view to_string(SourceKind kind);
std::optional<SourceKind> source_kind_from_string(std::string_view name);

struct SourceDescriptor {
    std::string source_id;
    SourceKind kind = SourceKind::accelerometer;
    double trust = 1.0;

    bool operator==(const SourceDescriptor&) const = default;
};

// Payload forms. Field names match the JSON keys of the scenario format.

struct MotionSignature {
    std::string label;
    double confidence = 1.0;
    bool operator==(const MotionSignature&) const = default;
};

struct Position {
    double lat = 0.0;
    double lon = 0.0;
    double speed_kmh = 0.0;
    bool operator==(const Position&) const = default;
};

struct PeerList {
    std::vector<std::string> device_ids;
    bool operator==(const PeerList&) const = default;
};

struct VoicePresence {
    bool present = false;
    double confidence = 1.0;
    bool operator==(const VoicePresence&) const = default;
};

struct MoistureLevel {
    double level = 0.0;
    bool operator==(const MoistureLevel&) const = default;
};

/// Wall-clock reading, minutes after midnight.
struct LocalTime {
    int minute_of_day = 0;
    bool operator==(const LocalTime&) const = default;
};

struct HeartRate {
    int bpm = 0;
    bool operator==(const HeartRate&) const = default;
};

struct RespirationLabel {
    std::string label;
    bool operator==(const RespirationLabel&) const = default;
};

struct EmotionLabel {
    std::string label;
    double confidence = 1.0;
    bool operator==(const EmotionLabel&) const = default;
};

struct SentimentLabel {
    std::string label;
    double confidence = 1.0;
    bool operator==(const SentimentLabel&) const = default;
};

/// Planned activity at a place, valid over [from_ts, to_ts] in scenario time.
struct CalendarEntry {
    std::string activity;
    std::string place;
    std::int64_t from_ts = 0;
    std::int64_t to_ts = 0;
    bool operator==(const CalendarEntry&) const = default;
};

struct WeatherLabel {
    std::string label;
    double confidence = 1.0;
    bool operator==(const WeatherLabel&) const = default;
};

struct PlaceLabel {
    std::string name;
    std::string category;
    bool operator==(const PlaceLabel&) const = default;
};

struct PlayEvent {
    std::string track_id;
    bool operator==(const PlayEvent&) const = default;
};

using Payload = std::variant<MotionSignature, Position, PeerList, VoicePresence, MoistureLevel,
                             LocalTime, HeartRate, RespirationLabel, EmotionLabel, SentimentLabel,
                             CalendarEntry, WeatherLabel, PlaceLabel, PlayEvent>;

/// JSON key of the payload alternative, e.g. "motion_signature".
std::string_view payload_tag(const Payload& payload);

/// Whether a source of `kind` may emit this payload.
bool payload_matches_kind(const Payload& payload, SourceKind kind);

struct SensorReading {
    std::string source_id;
    std::int64_t timestamp = 0;
    /// Reading-level quality in [0,1]; multiplies every confidence derived from it.
    double quality = 1.0;
    Payload payload;

    bool operator==(const SensorReading&) const = default;
};

struct Scenario {
    std::int64_t tick_seconds = 60;
    std::int64_t duration_seconds = 0;
    std::vector<SourceDescriptor> sources;
    std::vector<SensorReading> readings;

    const SourceDescriptor* find_source(std::string_view source_id) const;
    bool operator==(const Scenario&) const = default;
};

/// Tick timestamps 0, tick, 2*tick, ... up to and including duration.
std::vector<std::int64_t> tick_timestamps(const Scenario& scenario);

enum class CorruptionMode { zero_quality, random_value };

struct DropRule {
    std::string source_id;
    std::int64_t from_ts = 0;
    std::int64_t to_ts = 0;
    bool operator==(const DropRule&) const = default;
};

struct CorruptionRule {
    std::string source_id;
    std::int64_t from_ts = 0;
    std::int64_t to_ts = 0;
    CorruptionMode mode = CorruptionMode::zero_quality;
    std::uint64_t seed = 0;
    bool operator==(const CorruptionRule&) const = default;
};

struct FaultPlan {
    std::vector<DropRule> drops;
    std::vector<CorruptionRule> corruptions;

    bool empty() const { return drops.empty() && corruptions.empty(); }
    bool operator==(const FaultPlan&) const = default;
};

// JSON conversion of single records (shared by the scenario file and the HTTP API).
nlohmann::json to_json(const SourceDescriptor& source);
SourceDescriptor source_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Payload& payload);
Payload payload_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SensorReading& reading);
SensorReading reading_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FaultPlan& plan);
FaultPlan fault_plan_from_json(const nlohmann::json& j);

/// Parses a line-delimited scenario. Throws ParseError carrying the offending line.
Scenario parse_scenario(std::string_view text);
std::string serialize_scenario(const Scenario& scenario);

/// Throws ValidationError when the plan names a source that is not declared.
void validate_fault_plan(const FaultPlan& plan, std::span<const SourceDescriptor> sources);

/// Returns a faulted copy of `readings`. `run_seed` is mixed into every corruption seed.
std::vector<SensorReading> apply_fault_plan(std::span<const SensorReading> readings,
                                            const FaultPlan& plan, std::uint64_t run_seed = 0);
Scenario apply_fault_plan(const Scenario& scenario, const FaultPlan& plan,
                          std::uint64_t run_seed = 0);

/// Readings with tick_ts - window_seconds < ts <= tick_ts, newest per (source, payload tag).
/// Output is ordered by (source_id, tag).
std::vector<SensorReading> window_readings(std::span<const SensorReading> readings,
                                           std::int64_t tick_ts, std::int64_t window_seconds);
std::vector<SensorReading> window_readings(const Scenario& scenario, std::int64_t tick_ts,
                                           std::int64_t window_seconds);

/// Formats minutes-after-midnight as HH:MM.
std::string format_local_time(int minute_of_day);
/// Parses HH:MM (24-hour). Throws ValidationError.
int parse_local_time(std::string_view text);

/// An external provider (weather service, place lookup) seen through the reading model.
/// A live client implements this; replay uses the recorded stub.
class ExternalSource {
public:
    virtual ~ExternalSource() = default;
    virtual const SourceDescriptor& descriptor() const = 0;
    /// Readings produced in (tick_ts - window_seconds, tick_ts].
    virtual std::vector<SensorReading> fetch(std::int64_t tick_ts,
                                             std::int64_t window_seconds) const = 0;
};

/// Serves a provider's readings from a recorded scenario.
class RecordedSource final : public ExternalSource {
public:
    RecordedSource(SourceDescriptor descriptor, std::vector<SensorReading> readings);

    const SourceDescriptor& descriptor() const override { return descriptor_; }
    std::vector<SensorReading> fetch(std::int64_t tick_ts,
                                     std::int64_t window_seconds) const override;

private:
    SourceDescriptor descriptor_;
    std::vector<SensorReading> readings_;
};

/// Stubs for every weather_api / place_api source in the scenario.
std::vector<std::unique_ptr<ExternalSource>> recorded_external_sources(const Scenario& scenario);

}  // namespace ephemera
