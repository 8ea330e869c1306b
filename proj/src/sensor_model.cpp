#include "ephemera/sensor_model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "ephemera/errors.hpp"

namespace ephemera {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<SourceKind, std::string_view>, 14> kKindNames{{
    {SourceKind::accelerometer, "accelerometer"},
    {SourceKind::gps, "gps"},
    {SourceKind::bluetooth, "bluetooth"},
    {SourceKind::microphone, "microphone"},
    {SourceKind::moisture, "moisture"},
    {SourceKind::clock, "clock"},
    {SourceKind::heart_rate, "heart_rate"},
    {SourceKind::respiration, "respiration"},
    {SourceKind::camera_emotion, "camera_emotion"},
    {SourceKind::social_media, "social_media"},
    {SourceKind::calendar, "calendar"},
    {SourceKind::weather_api, "weather_api"},
    {SourceKind::place_api, "place_api"},
    {SourceKind::player, "player"},
}};

// Indexed by Payload::index().
constexpr std::array<std::string_view, std::variant_size_v<Payload>> kTagNames{
    "motion_signature", "position",      "peer_list",       "voice_presence", "moisture_level",
    "local_time",       "bpm",           "respiration_label", "emotion_label", "sentiment_label",
    "calendar_entry",   "weather_label", "place_label",     "play_event",
};

// Source kind that emits each payload alternative, same indexing.
constexpr std::array<SourceKind, std::variant_size_v<Payload>> kTagKinds{
    SourceKind::accelerometer, SourceKind::gps,         SourceKind::bluetooth,
    SourceKind::microphone,    SourceKind::moisture,    SourceKind::clock,
    SourceKind::heart_rate,    SourceKind::respiration, SourceKind::camera_emotion,
    SourceKind::social_media,  SourceKind::calendar,    SourceKind::weather_api,
    SourceKind::place_api,     SourceKind::player,
};

double unit_interval(const json& j, const char* key) {
    const double v = j.at(key).get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(std::string(key) + " must be in [0,1]");
    }
    return v;
}

double optional_confidence(const json& j) {
    return j.contains("confidence") ? unit_interval(j, "confidence") : 1.0;
}

template <class Alt>
Payload make_payload(const json& body);

template <>
Payload make_payload<MotionSignature>(const json& b) {
    return MotionSignature{b.at("label").get<std::string>(), optional_confidence(b)};
}
template <>
Payload make_payload<Position>(const json& b) {
    Position p{b.at("lat").get<double>(), b.at("lon").get<double>(),
               b.at("speed_kmh").get<double>()};
    if (p.lat < -90.0 || p.lat > 90.0 || p.lon < -180.0 || p.lon > 180.0) {
        throw ValidationError("position out of range");
    }
    if (!(p.speed_kmh >= 0.0)) throw ValidationError("speed_kmh must be >= 0");
    return p;
}
template <>
Payload make_payload<PeerList>(const json& b) {
    return PeerList{b.get<std::vector<std::string>>()};
}
template <>
Payload make_payload<VoicePresence>(const json& b) {
    return VoicePresence{b.at("present").get<bool>(), optional_confidence(b)};
}
template <>
Payload make_payload<MoistureLevel>(const json& b) {
    const double v = b.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("moisture_level must be in [0,1]");
    return MoistureLevel{v};
}
template <>
Payload make_payload<LocalTime>(const json& b) {
    return LocalTime{parse_local_time(b.get<std::string>())};
}
template <>
Payload make_payload<HeartRate>(const json& b) {
    const int bpm = b.get<int>();
    if (bpm <= 0) throw ValidationError("bpm must be positive");
    return HeartRate{bpm};
}
template <>
Payload make_payload<RespirationLabel>(const json& b) {
    return RespirationLabel{b.get<std::string>()};
}
template <>
Payload make_payload<EmotionLabel>(const json& b) {
    return EmotionLabel{b.at("label").get<std::string>(), optional_confidence(b)};
}
template <>
Payload make_payload<SentimentLabel>(const json& b) {
    return SentimentLabel{b.at("label").get<std::string>(), optional_confidence(b)};
}
template <>
Payload make_payload<CalendarEntry>(const json& b) {
    CalendarEntry c{b.at("activity").get<std::string>(), b.at("place").get<std::string>(),
                    b.at("from_ts").get<std::int64_t>(), b.at("to_ts").get<std::int64_t>()};
    if (c.from_ts > c.to_ts) throw ValidationError("calendar_entry from_ts > to_ts");
    return c;
}
template <>
Payload make_payload<WeatherLabel>(const json& b) {
    return WeatherLabel{b.at("label").get<std::string>(), optional_confidence(b)};
}
template <>
Payload make_payload<PlaceLabel>(const json& b) {
    return PlaceLabel{b.at("name").get<std::string>(), b.at("category").get<std::string>()};
}
template <>
Payload make_payload<PlayEvent>(const json& b) {
    return PlayEvent{b.at("track_id").get<std::string>()};
}

template <std::size_t... I>
Payload payload_by_index(std::size_t index, const json& body, std::index_sequence<I...>) {
    using Factory = Payload (*)(const json&);
    static constexpr Factory table[] = {&make_payload<std::variant_alternative_t<I, Payload>>...};
    return table[index](body);
}

struct PayloadJson {
    json operator()(const MotionSignature& p) const {
        return {{"label", p.label}, {"confidence", p.confidence}};
    }
    json operator()(const Position& p) const {
        return {{"lat", p.lat}, {"lon", p.lon}, {"speed_kmh", p.speed_kmh}};
    }
    json operator()(const PeerList& p) const { return p.device_ids; }
    json operator()(const VoicePresence& p) const {
        return {{"present", p.present}, {"confidence", p.confidence}};
    }
    json operator()(const MoistureLevel& p) const { return p.level; }
    json operator()(const LocalTime& p) const { return format_local_time(p.minute_of_day); }
    json operator()(const HeartRate& p) const { return p.bpm; }
    json operator()(const RespirationLabel& p) const { return p.label; }
    json operator()(const EmotionLabel& p) const {
        return {{"label", p.label}, {"confidence", p.confidence}};
    }
    json operator()(const SentimentLabel& p) const {
        return {{"label", p.label}, {"confidence", p.confidence}};
    }
    json operator()(const CalendarEntry& p) const {
        return {{"activity", p.activity}, {"place", p.place}, {"from_ts", p.from_ts},
                {"to_ts", p.to_ts}};
    }
    json operator()(const WeatherLabel& p) const {
        return {{"label", p.label}, {"confidence", p.confidence}};
    }
    json operator()(const PlaceLabel& p) const {
        return {{"name", p.name}, {"category", p.category}};
    }
    json operator()(const PlayEvent& p) const { return {{"track_id", p.track_id}}; }
};

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Portable draws from mt19937_64; std distributions are implementation-defined.
class Draw {
public:
    explicit Draw(std::uint64_t seed) : engine_(seed) {}

    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    int range(int lo, int hi) { return lo + static_cast<int>(engine_() % (hi - lo + 1)); }
    template <std::size_t N>
    std::string pick(const std::array<std::string_view, N>& labels) {
        return std::string(labels[index(N)]);
    }

private:
    std::mt19937_64 engine_;
};

constexpr std::array<std::string_view, 8> kActivityLabels{
    "jogging", "walking", "biking", "driving", "commuting", "working", "studying", "resting"};
constexpr std::array<std::string_view, 8> kMoodLabels{
    "happy", "calm", "sad", "angry", "anxious", "excited", "bored", "focused"};
constexpr std::array<std::string_view, 8> kWeatherLabels{
    "clear", "cloudy", "light_rain", "heavy_rain", "snow", "fog", "windy", "storm"};
constexpr std::array<std::string_view, 8> kPlaceLabels{
    "downtown", "park", "beach", "campus", "home", "office", "gym", "transit"};
constexpr std::array<std::string_view, 3> kRespirationLabels{"calm", "normal", "labored"};

struct Randomize {
    Draw& draw;

    void operator()(MotionSignature& p) const {
        p.label = draw.pick(kActivityLabels) + "_pattern";
        p.confidence = draw.unit();
    }
    void operator()(Position& p) const {
        p.lat = -90.0 + 180.0 * draw.unit();
        p.lon = -180.0 + 360.0 * draw.unit();
        p.speed_kmh = 40.0 * draw.unit();
    }
    void operator()(PeerList& p) const {
        const int n = draw.range(0, 3);
        p.device_ids.clear();
        for (int i = 0; i < n; ++i) p.device_ids.push_back("dev_" + std::to_string(draw.range(0, 99)));
    }
    void operator()(VoicePresence& p) const {
        p.present = draw.unit() < 0.5;
        p.confidence = draw.unit();
    }
    void operator()(MoistureLevel& p) const { p.level = draw.unit(); }
    void operator()(LocalTime& p) const { p.minute_of_day = draw.range(0, 1439); }
    void operator()(HeartRate& p) const { p.bpm = draw.range(40, 200); }
    void operator()(RespirationLabel& p) const { p.label = draw.pick(kRespirationLabels); }
    void operator()(EmotionLabel& p) const {
        p.label = draw.pick(kMoodLabels);
        p.confidence = draw.unit();
    }
    void operator()(SentimentLabel& p) const {
        p.label = draw.pick(kMoodLabels);
        p.confidence = draw.unit();
    }
    void operator()(CalendarEntry& p) const {
        p.activity = draw.pick(kActivityLabels);
        p.place = draw.pick(kPlaceLabels);
    }
    void operator()(WeatherLabel& p) const {
        p.label = draw.pick(kWeatherLabels);
        p.confidence = draw.unit();
    }
    void operator()(PlaceLabel& p) const {
        p.category = draw.pick(kPlaceLabels);
        p.name = p.category;
    }
    void operator()(PlayEvent&) const {}
};

struct ZeroConfidence {
    void operator()(MotionSignature& p) const { p.confidence = 0.0; }
    void operator()(VoicePresence& p) const { p.confidence = 0.0; }
    void operator()(EmotionLabel& p) const { p.confidence = 0.0; }
    void operator()(SentimentLabel& p) const { p.confidence = 0.0; }
    void operator()(WeatherLabel& p) const { p.confidence = 0.0; }
    template <class Other>
    void operator()(Other&) const {}
};

bool in_range(std::int64_t ts, std::int64_t from, std::int64_t to) {
    return ts >= from && ts <= to;
}

}  // namespace

std::string_view to_string(SourceKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<SourceKind> source_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

std::string_view payload_tag(const Payload& payload) { return kTagNames[payload.index()]; }

bool payload_matches_kind(const Payload& payload, SourceKind kind) {
    return kTagKinds[payload.index()] == kind;
}

const SourceDescriptor* Scenario::find_source(std::string_view source_id) const {
    auto it = std::find_if(sources.begin(), sources.end(),
                           [&](const SourceDescriptor& s) { return s.source_id == source_id; });
    return it == sources.end() ? nullptr : &*it;
}

std::vector<std::int64_t> tick_timestamps(const Scenario& scenario) {
    std::vector<std::int64_t> ticks;
    for (std::int64_t t = 0; t <= scenario.duration_seconds; t += scenario.tick_seconds) {
        ticks.push_back(t);
    }
    return ticks;
}

std::string format_local_time(int minute_of_day) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", (minute_of_day / 60) % 24, minute_of_day % 60);
    return buf;
}

int parse_local_time(std::string_view text) {
    if (text.size() != 5 || text[2] != ':') {
        throw ValidationError("invalid local time '" + std::string(text) + "', expected HH:MM");
    }
    int hh = -1;
    int mm = -1;
    auto [p1, e1] = std::from_chars(text.data(), text.data() + 2, hh);
    auto [p2, e2] = std::from_chars(text.data() + 3, text.data() + 5, mm);
    if (e1 != std::errc{} || e2 != std::errc{} || p1 != text.data() + 2 ||
        p2 != text.data() + 5 || hh < 0 || hh > 23 || mm < 0 || mm > 59) {
        throw ValidationError("invalid local time '" + std::string(text) + "', expected HH:MM");
    }
    return hh * 60 + mm;
}

json to_json(const SourceDescriptor& s) {
    return {{"type", "source"},
            {"source_id", s.source_id},
            {"kind", std::string(to_string(s.kind))},
            {"trust", s.trust}};
}

SourceDescriptor source_from_json(const json& j) {
    SourceDescriptor s;
    s.source_id = j.at("source_id").get<std::string>();
    if (s.source_id.empty()) throw ValidationError("empty source_id");
    const auto kind_name = j.at("kind").get<std::string>();
    const auto kind = source_kind_from_string(kind_name);
    if (!kind) throw ValidationError("unknown source kind '" + kind_name + "'");
    s.kind = *kind;
    if (j.contains("trust")) s.trust = unit_interval(j, "trust");
    return s;
}

json to_json(const Payload& payload) {
    return {{std::string(payload_tag(payload)), std::visit(PayloadJson{}, payload)}};
}

Payload payload_from_json(const json& j) {
    if (!j.is_object() || j.size() != 1) {
        throw ValidationError("payload must be an object with exactly one tag");
    }
    const auto& [tag, body] = *j.items().begin();
    const auto it = std::find(kTagNames.begin(), kTagNames.end(), tag);
    if (it == kTagNames.end()) throw ValidationError("unknown payload tag '" + tag + "'");
    return payload_by_index(static_cast<std::size_t>(it - kTagNames.begin()), body,
                            std::make_index_sequence<std::variant_size_v<Payload>>{});
}

json to_json(const SensorReading& r) {
    return {{"type", "reading"},
            {"source_id", r.source_id},
            {"ts", r.timestamp},
            {"quality", r.quality},
            {"payload", to_json(r.payload)}};
}

SensorReading reading_from_json(const json& j) {
    SensorReading r;
    r.source_id = j.at("source_id").get<std::string>();
    r.timestamp = j.at("ts").get<std::int64_t>();
    if (r.timestamp < 0) throw ValidationError("ts must be >= 0");
    if (j.contains("quality")) r.quality = unit_interval(j, "quality");
    r.payload = payload_from_json(j.at("payload"));
    return r;
}

json to_json(const FaultPlan& plan) {
    json drops = json::array();
    for (const auto& d : plan.drops) {
        drops.push_back({{"source_id", d.source_id}, {"from_ts", d.from_ts}, {"to_ts", d.to_ts}});
    }
    json corruptions = json::array();
    for (const auto& c : plan.corruptions) {
        corruptions.push_back(
            {{"source_id", c.source_id},
             {"from_ts", c.from_ts},
             {"to_ts", c.to_ts},
             {"mode", c.mode == CorruptionMode::zero_quality ? "zero_quality" : "random_value"},
             {"seed", c.seed}});
    }
    return {{"drops", drops}, {"corruptions", corruptions}};
}

FaultPlan fault_plan_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("fault plan must be a JSON object");
    FaultPlan plan;
    for (const auto& d : j.value("drops", json::array())) {
        DropRule rule{d.at("source_id").get<std::string>(), d.at("from_ts").get<std::int64_t>(),
                      d.at("to_ts").get<std::int64_t>()};
        if (rule.from_ts > rule.to_ts) throw ValidationError("drop from_ts > to_ts");
        plan.drops.push_back(std::move(rule));
    }
    for (const auto& c : j.value("corruptions", json::array())) {
        CorruptionRule rule;
        rule.source_id = c.at("source_id").get<std::string>();
        rule.from_ts = c.at("from_ts").get<std::int64_t>();
        rule.to_ts = c.at("to_ts").get<std::int64_t>();
        const auto mode = c.at("mode").get<std::string>();
        if (mode == "zero_quality") {
            rule.mode = CorruptionMode::zero_quality;
        } else if (mode == "random_value") {
            rule.mode = CorruptionMode::random_value;
        } else {
            throw ValidationError("unknown corruption mode '" + mode + "'");
        }
        rule.seed = c.value("seed", std::uint64_t{0});
        if (rule.from_ts > rule.to_ts) throw ValidationError("corruption from_ts > to_ts");
        plan.corruptions.push_back(std::move(rule));
    }
    return plan;
}

Scenario parse_scenario(std::string_view text) {
    Scenario scenario;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool have_meta = false;
    std::set<std::string, std::less<>> declared;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json record = json::parse(line);
            const auto type = record.at("type").get<std::string>();
            if (!have_meta) {
                if (type != "meta") throw ValidationError("first record must be meta");
                scenario.tick_seconds = record.value("tick_seconds", std::int64_t{60});
                scenario.duration_seconds = record.at("duration_seconds").get<std::int64_t>();
                if (scenario.tick_seconds <= 0) throw ValidationError("tick_seconds must be > 0");
                if (scenario.duration_seconds < 0) {
                    throw ValidationError("duration_seconds must be >= 0");
                }
                have_meta = true;
            } else if (type == "source") {
                auto source = source_from_json(record);
                if (!declared.insert(source.source_id).second) {
                    throw ValidationError("duplicate source_id '" + source.source_id + "'");
                }
                scenario.sources.push_back(std::move(source));
            } else if (type == "reading") {
                auto reading = reading_from_json(record);
                const auto* source = scenario.find_source(reading.source_id);
                if (source == nullptr) {
                    throw ValidationError("unknown source_id '" + reading.source_id + "'");
                }
                if (!payload_matches_kind(reading.payload, source->kind)) {
                    throw ValidationError("payload " + std::string(payload_tag(reading.payload)) +
                                          " not valid for source kind " +
                                          std::string(to_string(source->kind)));
                }
                if (!scenario.readings.empty() &&
                    reading.timestamp < scenario.readings.back().timestamp) {
                    throw ValidationError("unsorted timestamps");
                }
                scenario.readings.push_back(std::move(reading));
            } else if (type == "meta") {
                throw ValidationError("duplicate meta record");
            } else {
                throw ValidationError("unknown record type '" + type + "'");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    if (!have_meta) throw ParseError(line_no, "missing meta record");
    return scenario;
}

std::string serialize_scenario(const Scenario& scenario) {
    std::string out;
    out += json{{"type", "meta"},
                {"tick_seconds", scenario.tick_seconds},
                {"duration_seconds", scenario.duration_seconds}}
               .dump();
    out += '\n';
    for (const auto& s : scenario.sources) {
        out += to_json(s).dump();
        out += '\n';
    }
    for (const auto& r : scenario.readings) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void validate_fault_plan(const FaultPlan& plan, std::span<const SourceDescriptor> sources) {
    auto known = [&](const std::string& id) {
        return std::any_of(sources.begin(), sources.end(),
                           [&](const SourceDescriptor& s) { return s.source_id == id; });
    };
    for (const auto& d : plan.drops) {
        if (!known(d.source_id)) throw ValidationError("unknown source_id '" + d.source_id + "'");
    }
    for (const auto& c : plan.corruptions) {
        if (!known(c.source_id)) throw ValidationError("unknown source_id '" + c.source_id + "'");
    }
}

std::vector<SensorReading> apply_fault_plan(std::span<const SensorReading> readings,
                                            const FaultPlan& plan, std::uint64_t run_seed) {
    std::vector<SensorReading> out;
    out.reserve(readings.size());
    for (const auto& reading : readings) {
        const bool dropped = std::any_of(plan.drops.begin(), plan.drops.end(), [&](const DropRule& d) {
            return d.source_id == reading.source_id &&
                   in_range(reading.timestamp, d.from_ts, d.to_ts);
        });
        if (dropped) continue;

        SensorReading faulted = reading;
        for (const auto& c : plan.corruptions) {
            if (c.source_id != reading.source_id ||
                !in_range(reading.timestamp, c.from_ts, c.to_ts)) {
                continue;
            }
            if (c.mode == CorruptionMode::zero_quality) {
                faulted.quality = 0.0;
                std::visit(ZeroConfidence{}, faulted.payload);
            } else {
                // Per-reading stream: independent of which other readings exist.
                std::uint64_t seed = mix64(c.seed) ^ mix64(run_seed + 0x632be59bd9b4e019ULL);
                seed = mix64(seed ^ fnv1a(reading.source_id));
                seed = mix64(seed ^ static_cast<std::uint64_t>(reading.timestamp));
                Draw draw(seed);
                std::visit(Randomize{draw}, faulted.payload);
                faulted.quality = draw.unit();
            }
        }
        out.push_back(std::move(faulted));
    }
    return out;
}

Scenario apply_fault_plan(const Scenario& scenario, const FaultPlan& plan,
                          std::uint64_t run_seed) {
    validate_fault_plan(plan, scenario.sources);
    Scenario out = scenario;
    out.readings = apply_fault_plan(scenario.readings, plan, run_seed);
    return out;
}

std::vector<SensorReading> window_readings(std::span<const SensorReading> readings,
                                           std::int64_t tick_ts, std::int64_t window_seconds) {
    if (window_seconds <= 0) throw ValidationError("window_seconds must be > 0");
    std::map<std::pair<std::string_view, std::size_t>, const SensorReading*> newest;
    for (const auto& r : readings) {
        if (r.timestamp <= tick_ts - window_seconds || r.timestamp > tick_ts) continue;
        auto& slot = newest[{r.source_id, r.payload.index()}];
        // Later entries win on equal timestamps (input order is arrival order).
        if (slot == nullptr || r.timestamp >= slot->timestamp) slot = &r;
    }
    std::vector<SensorReading> out;
    out.reserve(newest.size());
    for (const auto& [key, r] : newest) out.push_back(*r);
    return out;
}

std::vector<SensorReading> window_readings(const Scenario& scenario, std::int64_t tick_ts,
                                           std::int64_t window_seconds) {
    return window_readings(scenario.readings, tick_ts, window_seconds);
}

RecordedSource::RecordedSource(SourceDescriptor descriptor, std::vector<SensorReading> readings)
    : descriptor_(std::move(descriptor)), readings_(std::move(readings)) {}

std::vector<SensorReading> RecordedSource::fetch(std::int64_t tick_ts,
                                                 std::int64_t window_seconds) const {
    std::vector<SensorReading> out;
    for (const auto& r : readings_) {
        if (r.timestamp > tick_ts - window_seconds && r.timestamp <= tick_ts) out.push_back(r);
    }
    return out;
}

std::vector<std::unique_ptr<ExternalSource>> recorded_external_sources(const Scenario& scenario) {
    std::vector<std::unique_ptr<ExternalSource>> out;
    for (const auto& source : scenario.sources) {
        if (source.kind != SourceKind::weather_api && source.kind != SourceKind::place_api) continue;
        std::vector<SensorReading> mine;
        for (const auto& r : scenario.readings) {
            if (r.source_id == source.source_id) mine.push_back(r);
        }
        out.push_back(std::make_unique<RecordedSource>(source, std::move(mine)));
    }
    return out;
}

}  // namespace ephemera
