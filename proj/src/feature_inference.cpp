#include "ephemera/feature_inference.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <tuple>

#include "ephemera/errors.hpp"

namespace ephemera {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "activity", "speed", "social", "location", "weather", "time_of_day", "physical_state", "mood"};

// Plans are weaker evidence than direct sensing.
constexpr double kCalendarWeight = 0.7;
constexpr double kHeavyRainMoisture = 0.6;
constexpr double kLaboredBreathingConfidence = 0.6;

template <class P>
const P* as(const SensorReading& r) {
    return std::get_if<P>(&r.payload);
}

double trust_of(std::span<const SourceDescriptor> sources, std::string_view source_id) {
    for (const auto& s : sources) {
        if (s.source_id == source_id) return s.trust;
    }
    return 1.0;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool calendar_active(const CalendarEntry& entry, std::int64_t tick_ts) {
    return tick_ts >= entry.from_ts && tick_ts <= entry.to_ts;
}

std::string activity_from_signature(std::string_view label) {
    constexpr std::string_view kSuffix = "_pattern";
    if (label.size() > kSuffix.size() && label.ends_with(kSuffix)) {
        label.remove_suffix(kSuffix.size());
    }
    return std::string(label);
}

Evidence vote(FeatureKind f, std::string value, double confidence, const SensorReading& r) {
    return Evidence{f, std::move(value), std::clamp(confidence, 0.0, 1.0), r.source_id, std::nullopt};
}

std::vector<Evidence> extract_activity(std::span<const SensorReading> readings,
                                       const ExtractionContext& ctx) {
    std::vector<Evidence> out;
    for (const auto& r : readings) {
        if (const auto* m = as<MotionSignature>(r)) {
            out.push_back(vote(FeatureKind::activity, activity_from_signature(m->label),
                               m->confidence * r.quality, r));
        } else if (const auto* c = as<CalendarEntry>(r); c && calendar_active(*c, ctx.tick_ts)) {
            out.push_back(vote(FeatureKind::activity, c->activity,
                               kCalendarWeight * trust_of(ctx.sources, r.source_id) * r.quality, r));
        }
    }
    return out;
}

std::vector<Evidence> extract_speed(std::span<const SensorReading> readings,
                                    const UserProfile& profile, const ExtractionContext& ctx) {
    std::optional<double> baseline;
    if (ctx.fused_activity) baseline = profile.baseline_for(*ctx.fused_activity);
    if (!baseline && !profile.activity_speed_baselines.empty()) {
        baseline = profile.activity_speed_baselines.front().second;
    }
    std::vector<Evidence> out;
    if (!baseline) return out;
    for (const auto& r : readings) {
        if (const auto* p = as<Position>(r)) {
            out.push_back(vote(FeatureKind::speed, classify_relative_speed(p->speed_kmh, *baseline),
                               r.quality, r));
        }
    }
    return out;
}

std::vector<Evidence> extract_social(std::span<const SensorReading> readings,
                                     const UserProfile& profile) {
    const std::set<std::string_view> friends(profile.friend_device_ids.begin(),
                                             profile.friend_device_ids.end());
    bool saw_peers = false;
    bool friend_nearby = false;
    double peer_confidence = 1.0;
    std::vector<Evidence> out;
    for (const auto& r : readings) {
        const auto* peers = as<PeerList>(r);
        if (peers == nullptr) continue;
        saw_peers = true;
        peer_confidence = std::min(peer_confidence, r.quality);
        const bool overlap = std::any_of(peers->device_ids.begin(), peers->device_ids.end(),
                                         [&](const std::string& d) { return friends.count(d) > 0; });
        if (overlap) {
            friend_nearby = true;
            out.push_back(vote(FeatureKind::social, "with_friends", r.quality, r));
        }
    }
    for (const auto& r : readings) {
        const auto* voice = as<VoicePresence>(r);
        if (voice == nullptr || friend_nearby) continue;
        const double conf = voice->confidence * r.quality;
        if (voice->present) {
            out.push_back(vote(FeatureKind::social, "in_crowd", conf, r));
        } else if (saw_peers) {
            out.push_back(vote(FeatureKind::social, "alone", std::min(conf, peer_confidence), r));
        }
    }
    return out;
}

std::vector<Evidence> extract_location(std::span<const SensorReading> readings,
                                       const ExtractionContext& ctx) {
    std::vector<Evidence> out;
    for (const auto& r : readings) {
        if (const auto* p = as<PlaceLabel>(r)) {
            auto e = vote(FeatureKind::location, p->category, r.quality, r);
            e.instance = p->name;
            out.push_back(std::move(e));
        } else if (const auto* c = as<CalendarEntry>(r); c && calendar_active(*c, ctx.tick_ts)) {
            auto category = place_category(c->place);
            if (!category) continue;
            auto e = vote(FeatureKind::location, *category,
                          kCalendarWeight * trust_of(ctx.sources, r.source_id) * r.quality, r);
            e.instance = c->place;
            out.push_back(std::move(e));
        }
    }
    return out;
}

std::vector<Evidence> extract_weather(std::span<const SensorReading> readings) {
    std::vector<Evidence> out;
    for (const auto& r : readings) {
        if (const auto* m = as<MoistureLevel>(r); m && m->level >= kHeavyRainMoisture) {
            out.push_back(vote(FeatureKind::weather, "heavy_rain", m->level * r.quality, r));
        } else if (const auto* w = as<WeatherLabel>(r)) {
            out.push_back(vote(FeatureKind::weather, w->label, w->confidence * r.quality, r));
        }
    }
    return out;
}

std::vector<Evidence> extract_time_of_day(std::span<const SensorReading> readings) {
    std::vector<Evidence> out;
    for (const auto& r : readings) {
        if (const auto* t = as<LocalTime>(r)) {
            out.push_back(vote(FeatureKind::time_of_day, classify_time_of_day(t->minute_of_day),
                               r.quality, r));
        }
    }
    return out;
}

std::vector<Evidence> extract_physical_state(std::span<const SensorReading> readings,
                                             const UserProfile& profile,
                                             const ExtractionContext& ctx) {
    const double intensity = ctx.fused_activity ? activity_intensity(*ctx.fused_activity) : 1.0;
    const double expected = profile.resting_bpm * intensity;
    std::vector<Evidence> out;
    for (const auto& r : readings) {
        if (const auto* h = as<HeartRate>(r)) {
            const double ratio = h->bpm / expected;
            std::string state = "normal";
            if (ratio >= 1.4) {
                state = "exhausted";
            } else if (ratio >= 1.2) {
                state = "tired";
            } else if (ratio <= 0.9) {
                state = "energetic";
            }
            out.push_back(vote(FeatureKind::physical_state, std::move(state), r.quality, r));
        } else if (const auto* b = as<RespirationLabel>(r); b && b->label == "labored") {
            out.push_back(vote(FeatureKind::physical_state, "tired",
                               kLaboredBreathingConfidence * r.quality, r));
        }
    }
    return out;
}

std::vector<Evidence> extract_mood(std::span<const SensorReading> readings) {
    std::vector<Evidence> out;
    for (const auto& r : readings) {
        if (const auto* e = as<EmotionLabel>(r)) {
            out.push_back(vote(FeatureKind::mood, e->label, e->confidence * r.quality, r));
        } else if (const auto* s = as<SentimentLabel>(r)) {
            out.push_back(vote(FeatureKind::mood, s->label, s->confidence * r.quality, r));
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(FeatureKind feature) { return kFeatureNames[index_of(feature)]; }

std::optional<FeatureKind> feature_from_string(std::string_view name) {
    for (auto f : kAllFeatures) {
        if (to_string(f) == name) return f;
    }
    return std::nullopt;
}

std::string_view to_string(FeatureStatus status) {
    switch (status) {
        case FeatureStatus::ok: return "OK";
        case FeatureStatus::conflict: return "CONFLICT";
        case FeatureStatus::missing: return "MISSING";
    }
    return "MISSING";
}

std::optional<FeatureStatus> status_from_string(std::string_view name) {
    if (name == "OK") return FeatureStatus::ok;
    if (name == "CONFLICT") return FeatureStatus::conflict;
    if (name == "MISSING") return FeatureStatus::missing;
    return std::nullopt;
}

FeatureEstimates all_missing() {
    FeatureEstimates out;
    for (auto f : kAllFeatures) out[index_of(f)].feature = f;
    return out;
}

std::optional<double> UserProfile::baseline_for(std::string_view activity) const {
    for (const auto& [name, kmh] : activity_speed_baselines) {
        if (name == activity) return kmh;
    }
    return std::nullopt;
}

void validate_profile(const UserProfile& p) {
    if (p.user_id.empty()) throw ValidationError("profile user_id is empty");
    for (const auto& [activity, kmh] : p.activity_speed_baselines) {
        if (!(kmh > 0.0)) throw ValidationError("baseline for '" + activity + "' must be > 0");
    }
    if (p.resting_bpm < 30 || p.resting_bpm > 120) {
        throw ValidationError("resting_bpm must be in [30,120]");
    }
}

json to_json(const UserProfile& p) {
    // Array of pairs so declaration order survives a round trip.
    json ordered = json::array();
    for (const auto& [activity, kmh] : p.activity_speed_baselines) {
        ordered.push_back({activity, kmh});
    }
    return {{"user_id", p.user_id},
            {"activity_speed_baselines", ordered},
            {"resting_bpm", p.resting_bpm},
            {"friend_device_ids", p.friend_device_ids},
            {"home_timezone", p.home_timezone}};
}

UserProfile profile_from_json(const json& j) {
    UserProfile p;
    p.user_id = j.at("user_id").get<std::string>();
    if (j.contains("activity_speed_baselines")) {
        const auto& b = j.at("activity_speed_baselines");
        if (b.is_array()) {
            for (const auto& pair : b) {
                p.activity_speed_baselines.emplace_back(pair.at(0).get<std::string>(),
                                                        pair.at(1).get<double>());
            }
        } else {
            // Object form. By now the keys are sorted; load_profile rewrites files
            // into the array form beforehand so the declared order survives.
            for (const auto& [activity, kmh] : b.items()) {
                p.activity_speed_baselines.emplace_back(activity, kmh.get<double>());
            }
        }
    }
    p.resting_bpm = j.value("resting_bpm", 60);
    p.friend_device_ids = j.value("friend_device_ids", std::vector<std::string>{});
    p.home_timezone = j.value("home_timezone", std::string("UTC"));
    validate_profile(p);
    return p;
}

double activity_intensity(std::string_view activity) {
    if (activity == "walking") return 1.3;
    if (activity == "jogging" || activity == "biking") return 1.7;
    if (activity == "driving" || activity == "commuting") return 1.1;
    return 1.0;
}

std::optional<std::string> place_category(std::string_view place) {
    static const std::vector<std::pair<std::string_view, std::string_view>> kKeywords{
        {"downtown", "downtown"}, {"city centre", "downtown"}, {"city center", "downtown"},
        {"park", "park"},         {"beach", "beach"},          {"campus", "campus"},
        {"university", "campus"}, {"college", "campus"},       {"home", "home"},
        {"office", "office"},     {"gym", "gym"},              {"station", "transit"},
        {"airport", "transit"},   {"transit", "transit"},
    };
    const auto lowered = to_lower(place);
    for (const auto& [keyword, category] : kKeywords) {
        if (lowered.find(keyword) != std::string::npos) return std::string(category);
    }
    return std::nullopt;
}

std::string classify_relative_speed(double speed_kmh, double baseline_kmh) {
    if (!(baseline_kmh > 0.0)) throw ValidationError("speed baseline must be > 0");
    if (!(speed_kmh >= 0.0)) throw ValidationError("speed must be >= 0");
    const double ratio = speed_kmh / baseline_kmh;
    // Decimal boundary inputs (14.3/13) miss 1.1 by an ulp; compare with slack.
    constexpr double kEps = 1e-12;
    if (ratio <= 0.9 + kEps) return "slow";
    if (ratio >= 1.1 - kEps) return "fast";
    return "normal";
}

std::string classify_time_of_day(int minute_of_day) {
    if (minute_of_day < 0 || minute_of_day >= 24 * 60) {
        throw ValidationError("minute_of_day out of range");
    }
    if (minute_of_day >= 6 * 60 && minute_of_day < 12 * 60) return "morning";
    if (minute_of_day >= 12 * 60 && minute_of_day < 18 * 60) return "afternoon";
    if (minute_of_day >= 18 * 60 && minute_of_day < 22 * 60) return "evening";
    return "night";
}

std::string classify_time_of_day(std::string_view local_time) {
    return classify_time_of_day(parse_local_time(local_time));
}

std::vector<Evidence> extract_evidence(FeatureKind feature, std::span<const SensorReading> readings,
                                       const UserProfile& profile, const ExtractionContext& ctx) {
    switch (feature) {
        case FeatureKind::activity: return extract_activity(readings, ctx);
        case FeatureKind::speed: return extract_speed(readings, profile, ctx);
        case FeatureKind::social: return extract_social(readings, profile);
        case FeatureKind::location: return extract_location(readings, ctx);
        case FeatureKind::weather: return extract_weather(readings);
        case FeatureKind::time_of_day: return extract_time_of_day(readings);
        case FeatureKind::physical_state: return extract_physical_state(readings, profile, ctx);
        case FeatureKind::mood: return extract_mood(readings);
    }
    return {};
}

FeatureEstimate fuse_evidence(FeatureKind feature, std::span<const Evidence> evidence) {
    std::vector<const Evidence*> votes;
    for (const auto& e : evidence) {
        if (e.feature != feature) {
            throw ValidationError("evidence for " + std::string(to_string(e.feature)) +
                                  " passed to " + std::string(to_string(feature)) + " fusion");
        }
        if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
            throw ValidationError("evidence confidence outside [0,1]");
        }
        if (e.confidence > 0.0) votes.push_back(&e);
    }

    FeatureEstimate out;
    out.feature = feature;
    if (votes.empty()) return out;

    // Canonical order makes every floating-point sum independent of input order.
    std::sort(votes.begin(), votes.end(), [](const Evidence* a, const Evidence* b) {
        return std::tie(a->value, a->source_id, a->confidence, a->instance) <
               std::tie(b->value, b->source_id, b->confidence, b->instance);
    });

    struct Tally {
        double support = 0.0;
        std::set<std::string> sources;
        std::vector<const Evidence*> votes;
    };
    std::map<std::string, Tally> tallies;
    double total = 0.0;
    for (const auto* e : votes) {
        auto& t = tallies[e->value];
        t.support += e->confidence;
        t.sources.insert(e->source_id);
        t.votes.push_back(e);
        total += e->confidence;
    }

    // std::map iterates values in ascending order, so strict > keeps the smaller on ties.
    auto leader = tallies.begin();
    for (auto it = tallies.begin(); it != tallies.end(); ++it) {
        if (it->second.support > leader->second.support) leader = it;
    }
    const Tally& best = leader->second;

    double runner_up = 0.0;
    for (auto it = tallies.begin(); it != tallies.end(); ++it) {
        if (it == leader) continue;
        const bool independent =
            std::any_of(it->second.sources.begin(), it->second.sources.end(),
                        [&](const std::string& s) { return best.sources.count(s) == 0; });
        if (independent) runner_up = std::max(runner_up, it->second.support);
    }

    if (runner_up > 0.0 && best.support < kConflictMargin * runner_up) {
        out.status = FeatureStatus::conflict;
        std::set<std::string> all;
        for (const auto* e : votes) all.insert(e->source_id);
        out.supporting_sources.assign(all.begin(), all.end());
        return out;
    }

    double disbelief = 1.0;
    for (const auto* e : best.votes) disbelief *= 1.0 - e->confidence;
    out.status = FeatureStatus::ok;
    out.value = leader->first;
    out.confidence = (1.0 - disbelief) * (best.support / total);
    out.supporting_sources.assign(best.sources.begin(), best.sources.end());

    if (feature == FeatureKind::location) {
        const Evidence* strongest = nullptr;
        for (const auto* e : best.votes) {
            if (e->instance && (strongest == nullptr || e->confidence > strongest->confidence)) {
                strongest = e;
            }
        }
        if (strongest != nullptr) out.instance_label = strongest->instance;
    }
    return out;
}

FeatureEstimates infer_features(std::span<const SensorReading> readings, const UserProfile& profile,
                                std::span<const SourceDescriptor> sources, std::int64_t tick_ts) {
    FeatureEstimates out = all_missing();
    ExtractionContext ctx{tick_ts, sources, std::nullopt};

    const auto activity_votes = extract_evidence(FeatureKind::activity, readings, profile, ctx);
    out[index_of(FeatureKind::activity)] = fuse_evidence(FeatureKind::activity, activity_votes);
    if (out[index_of(FeatureKind::activity)].ok()) {
        ctx.fused_activity = out[index_of(FeatureKind::activity)].value;
    }

    for (auto f : kAllFeatures) {
        if (f == FeatureKind::activity) continue;
        const auto votes = extract_evidence(f, readings, profile, ctx);
        out[index_of(f)] = fuse_evidence(f, votes);
    }
    return out;
}

json to_json(const FeatureEstimate& e) {
    json j{{"feature", std::string(to_string(e.feature))},
           {"status", std::string(to_string(e.status))},
           {"value", e.value},
           {"confidence", e.confidence},
           {"supporting_sources", e.supporting_sources}};
    j["instance_label"] = e.instance_label ? json(*e.instance_label) : json(nullptr);
    return j;
}

FeatureEstimate estimate_from_json(const json& j) {
    FeatureEstimate e;
    const auto fname = j.at("feature").get<std::string>();
    const auto feature = feature_from_string(fname);
    if (!feature) throw ValidationError("unknown feature '" + fname + "'");
    e.feature = *feature;
    const auto sname = j.at("status").get<std::string>();
    const auto status = status_from_string(sname);
    if (!status) throw ValidationError("unknown status '" + sname + "'");
    e.status = *status;
    e.value = j.value("value", std::string());
    e.confidence = j.value("confidence", 0.0);
    e.supporting_sources = j.value("supporting_sources", std::vector<std::string>{});
    if (j.contains("instance_label") && !j.at("instance_label").is_null()) {
        e.instance_label = j.at("instance_label").get<std::string>();
    }
    return e;
}

}  // namespace ephemera
