#include "ephemera/recommenders.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ephemera/errors.hpp"

namespace ephemera {

using nlohmann::json;

double Track::affinity(const std::string& key) const {
    const auto it = affinities.find(key);
    return it == affinities.end() ? 0.0 : it->second;
}

void validate_catalog(const Catalog& catalog) {
    std::set<std::string_view> ids;
    for (const auto& t : catalog) {
        if (t.track_id.empty()) throw ValidationError("track with empty track_id");
        if (!ids.insert(t.track_id).second) {
            throw ValidationError("duplicate track_id '" + t.track_id + "'");
        }
        for (const auto& [key, a] : t.affinities) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw ValidationError("affinity " + key + " of " + t.track_id + " outside [0,1]");
            }
            const auto eq = key.find('=');
            if (eq == std::string::npos || !feature_from_string(key.substr(0, eq))) {
                throw ValidationError("affinity key '" + key + "' is not feature=value");
            }
        }
    }
}

Catalog catalog_from_json(const json& j) {
    Catalog catalog;
    for (const auto& t : j.at("tracks")) {
        Track track;
        track.track_id = t.at("track_id").get<std::string>();
        track.title = t.value("title", std::string());
        track.artist = t.value("artist", std::string());
        track.affinities = t.value("affinities", std::map<std::string, double>{});
        catalog.push_back(std::move(track));
    }
    validate_catalog(catalog);
    return catalog;
}

json to_json(const Catalog& catalog) {
    json tracks = json::array();
    for (const auto& t : catalog) {
        tracks.push_back({{"track_id", t.track_id},
                          {"title", t.title},
                          {"artist", t.artist},
                          {"affinities", t.affinities}});
    }
    return {{"tracks", tracks}};
}

std::vector<RecommenderSpec> default_specs() {
    std::vector<RecommenderSpec> specs;
    for (auto f : kAllFeatures) specs.push_back({"rec_" + std::string(to_string(f)), {f}});
    specs.push_back({"rec_location_weather_time_of_day",
                     {FeatureKind::location, FeatureKind::weather, FeatureKind::time_of_day}});
    return specs;
}

std::vector<RecommenderSpec> normalize_specs(std::vector<RecommenderSpec> specs) {
    std::set<std::string_view> ids;
    for (auto& s : specs) {
        if (s.rec_id.empty()) throw ValidationError("recommender with empty rec_id");
        if (!ids.insert(s.rec_id).second) {
            throw ValidationError("duplicate rec_id '" + s.rec_id + "'");
        }
        if (s.features.empty()) throw ValidationError("recommender " + s.rec_id + " has no features");
        std::sort(s.features.begin(), s.features.end());
        s.features.erase(std::unique(s.features.begin(), s.features.end()), s.features.end());
    }
    return specs;
}

json to_json(std::span<const RecommenderSpec> specs) {
    json out = json::array();
    for (const auto& s : specs) {
        json features = json::array();
        for (auto f : s.features) features.push_back(std::string(to_string(f)));
        out.push_back({{"rec_id", s.rec_id}, {"features", features}});
    }
    return out;
}

std::vector<RecommenderSpec> specs_from_json(const json& j) {
    std::vector<RecommenderSpec> specs;
    for (const auto& s : j) {
        RecommenderSpec spec;
        spec.rec_id = s.at("rec_id").get<std::string>();
        for (const auto& name : s.at("features")) {
            const auto f = feature_from_string(name.get<std::string>());
            if (!f) throw ValidationError("unknown feature '" + name.get<std::string>() + "'");
            spec.features.push_back(*f);
        }
        specs.push_back(std::move(spec));
    }
    return normalize_specs(std::move(specs));
}

void validate_weights(const HybridWeights& weights, std::span<const RecommenderSpec> specs) {
    bool positive = false;
    for (const auto& [id, w] : weights.user_weights) {
        const bool known = std::any_of(specs.begin(), specs.end(),
                                       [&](const RecommenderSpec& s) { return s.rec_id == id; });
        if (!known) throw ValidationError("unknown rec_id '" + id + "'");
        if (!std::isfinite(w) || w < 0.0) {
            throw ValidationError("weight for '" + id + "' must be finite and >= 0");
        }
        positive = positive || w > 0.0;
    }
    if (!positive) throw ValidationError("at least one weight must be > 0");
}

json to_json(const HybridWeights& weights) { return {{"user_weights", weights.user_weights}}; }

HybridWeights weights_from_json(const json& j) {
    HybridWeights w;
    const auto& uw = j.at("user_weights");
    for (const auto& [id, value] : uw.items()) {
        if (!value.is_number()) throw ValidationError("weight for '" + id + "' is not a number");
        w.user_weights[id] = value.get<double>();
    }
    return w;
}

int survey_count(FeatureKind feature) {
    switch (feature) {
        case FeatureKind::mood: return 97;
        case FeatureKind::activity:
        case FeatureKind::speed:
        case FeatureKind::physical_state: return 92;
        case FeatureKind::weather:
        case FeatureKind::time_of_day: return 38;  // ambience
        case FeatureKind::location:
        case FeatureKind::social: return 32;
    }
    return 0;
}

HybridWeights default_weights_from_survey(std::span<const RecommenderSpec> specs) {
    HybridWeights w;
    for (const auto& s : specs) {
        if (s.features.empty()) throw ValidationError("recommender " + s.rec_id + " has no features");
        int total = 0;
        for (auto f : s.features) total += survey_count(f);
        // Integer count sum divided once keeps ratios between specs exact where possible.
        w.user_weights[s.rec_id] =
            static_cast<double>(total) / (static_cast<double>(s.features.size()) * kSurveyRespondents);
    }
    return w;
}

json to_json(const RecommendationList& list) {
    json entries = json::array();
    for (const auto& e : list.entries) entries.push_back({{"track_id", e.track_id}, {"score", e.score}});
    return {{"tick_ts", list.tick_ts}, {"entries", entries}, {"active_rec_ids", list.active_rec_ids}};
}

RecommendationList recommendation_list_from_json(const json& j) {
    RecommendationList list;
    list.tick_ts = j.at("tick_ts").get<std::int64_t>();
    for (const auto& e : j.at("entries")) {
        list.entries.push_back({e.at("track_id").get<std::string>(), e.at("score").get<double>()});
    }
    list.active_rec_ids = j.at("active_rec_ids").get<std::vector<std::string>>();
    return list;
}

double score_individual(const RecommenderSpec& spec, const FeatureEstimates& estimates,
                        const Track& track) {
    double sum = 0.0;
    for (auto f : spec.features) {
        const auto& e = estimates[index_of(f)];
        if (!e.ok()) {
            throw std::logic_error("recommender " + spec.rec_id + " scored with " +
                                   std::string(to_string(f)) + " not OK");
        }
        sum += track.affinity(std::string(to_string(f)) + "=" + e.value);
    }
    return sum / static_cast<double>(spec.features.size());
}

std::vector<std::string> active_recommenders(std::span<const RecommenderSpec> specs,
                                             const FeatureEstimates& estimates) {
    std::vector<std::string> active;
    for (const auto& s : specs) {
        const bool all_ok = std::all_of(s.features.begin(), s.features.end(),
                                        [&](FeatureKind f) { return estimates[index_of(f)].ok(); });
        if (all_ok) active.push_back(s.rec_id);
    }
    return active;
}

MetricsReport session_metrics(std::span<const TickRecord> trace, const Catalog& catalog,
                              std::span<const std::string> history) {
    if (trace.empty()) throw ValidationError("session_metrics needs a non-empty trace");

    MetricsReport report;
    report.ticks = static_cast<int>(trace.size());

    std::set<std::string> contexts;
    std::set<std::string> recommended;
    const std::set<std::string> heard(history.begin(), history.end());
    int available = 0;
    double jaccard_sum = 0.0;
    int jaccard_pairs = 0;
    double novelty_sum = 0.0;

    const std::set<std::string>* previous = nullptr;
    std::set<std::string> previous_ids;
    for (const auto& tick : trace) {
        if (tick.context.id != kEmptyContextId) contexts.insert(tick.context.id);
        for (auto f : kAllFeatures) {
            auto& counts = report.per_feature_status_counts[index_of(f)];
            switch (tick.context[f].status) {
                case FeatureStatus::ok: ++counts.ok; break;
                case FeatureStatus::conflict: ++counts.conflict; break;
                case FeatureStatus::missing: ++counts.missing; break;
            }
        }

        std::set<std::string> ids;
        for (const auto& e : tick.recommendations.entries) ids.insert(e.track_id);
        if (ids.empty()) {
            previous = nullptr;
            continue;
        }
        ++available;
        recommended.insert(ids.begin(), ids.end());

        const auto fresh = std::count_if(ids.begin(), ids.end(),
                                         [&](const std::string& id) { return heard.count(id) == 0; });
        novelty_sum += static_cast<double>(fresh) / static_cast<double>(ids.size());

        if (previous != nullptr) {
            std::size_t shared = 0;
            for (const auto& id : ids) shared += previous->count(id);
            const std::size_t united = ids.size() + previous->size() - shared;
            jaccard_sum += static_cast<double>(shared) / static_cast<double>(united);
            ++jaccard_pairs;
        }
        previous_ids = std::move(ids);
        previous = &previous_ids;
    }

    report.distinct_contexts = static_cast<int>(contexts.size());
    report.availability = static_cast<double>(available) / static_cast<double>(trace.size());
    report.mean_consecutive_jaccard = jaccard_pairs > 0 ? jaccard_sum / jaccard_pairs : 0.0;
    report.catalog_coverage =
        catalog.empty() ? 0.0
                        : static_cast<double>(recommended.size()) / static_cast<double>(catalog.size());
    report.mean_novelty = available > 0 ? novelty_sum / available : 0.0;
    return report;
}

json to_json(const MetricsReport& r) {
    json counts = json::object();
    for (auto f : kAllFeatures) {
        const auto& c = r.per_feature_status_counts[index_of(f)];
        counts[std::string(to_string(f))] = {{"ok", c.ok}, {"conflict", c.conflict}, {"missing", c.missing}};
    }
    return {{"ticks", r.ticks},
            {"distinct_contexts", r.distinct_contexts},
            {"availability", r.availability},
            {"mean_consecutive_jaccard", r.mean_consecutive_jaccard},
            {"catalog_coverage", r.catalog_coverage},
            {"mean_novelty", r.mean_novelty},
            {"per_feature_status_counts", counts}};
}

MetricsReport metrics_from_json(const json& j) {
    MetricsReport r;
    r.ticks = j.at("ticks").get<int>();
    r.distinct_contexts = j.at("distinct_contexts").get<int>();
    r.availability = j.at("availability").get<double>();
    r.mean_consecutive_jaccard = j.at("mean_consecutive_jaccard").get<double>();
    r.catalog_coverage = j.at("catalog_coverage").get<double>();
    r.mean_novelty = j.at("mean_novelty").get<double>();
    const auto& counts = j.at("per_feature_status_counts");
    for (auto f : kAllFeatures) {
        const auto& c = counts.at(std::string(to_string(f)));
        r.per_feature_status_counts[index_of(f)] = {c.at("ok").get<int>(), c.at("conflict").get<int>(),
                                                    c.at("missing").get<int>()};
    }
    return r;
}

}  // namespace ephemera
