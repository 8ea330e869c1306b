#include "ephemera/context_builder.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ephemera/errors.hpp"

namespace ephemera {

using nlohmann::json;

namespace {

std::string spaced(std::string_view value) {
    std::string out(value);
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::string social_phrase(std::string_view value) {
    if (value == "in_crowd") return "in a crowd";
    return spaced(value);
}

std::string weather_clause(std::string_view value) {
    if (value == "heavy_rain" || value == "light_rain") return "under a " + spaced(value);
    return "under " + spaced(value);
}

}  // namespace

bool ContextVocabulary::contains(FeatureKind f, std::string_view value) const {
    const auto& list = of(f);
    return std::find(list.begin(), list.end(), value) != list.end();
}

ContextVocabulary default_vocabulary() {
    ContextVocabulary v;
    v.values[index_of(FeatureKind::activity)] = {"jogging", "walking", "biking",   "driving",
                                                 "commuting", "working", "studying", "resting"};
    v.values[index_of(FeatureKind::speed)] = {"slow", "normal", "fast"};
    v.values[index_of(FeatureKind::social)] = {"alone", "with_friends", "in_crowd"};
    v.values[index_of(FeatureKind::location)] = {"downtown", "park", "beach", "campus",
                                                 "home",     "office", "gym", "transit"};
    v.values[index_of(FeatureKind::weather)] = {"clear", "cloudy", "light_rain", "heavy_rain",
                                                "snow",  "fog",    "windy",      "storm"};
    v.values[index_of(FeatureKind::time_of_day)] = {"morning", "afternoon", "evening", "night"};
    v.values[index_of(FeatureKind::physical_state)] = {"energetic", "normal", "tired", "exhausted"};
    v.values[index_of(FeatureKind::mood)] = {"happy",   "calm",    "sad",   "angry",
                                             "anxious", "excited", "bored", "focused"};
    return v;
}

void validate_vocabulary(const ContextVocabulary& vocab) {
    for (auto f : kAllFeatures) {
        const auto& list = vocab.of(f);
        if (list.empty()) {
            throw ValidationError("vocabulary for " + std::string(to_string(f)) + " is empty");
        }
        std::set<std::string_view> seen;
        for (const auto& v : list) {
            if (v.empty() || !seen.insert(v).second) {
                throw ValidationError("vocabulary for " + std::string(to_string(f)) +
                                      " has an empty or repeated value '" + v + "'");
            }
        }
    }
}

json to_json(const ContextVocabulary& vocab) {
    json j = json::object();
    for (auto f : kAllFeatures) j[std::string(to_string(f))] = vocab.of(f);
    return j;
}

ContextVocabulary vocabulary_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("vocabulary must be a JSON object");
    ContextVocabulary vocab = default_vocabulary();
    for (const auto& [name, list] : j.items()) {
        const auto f = feature_from_string(name);
        if (!f) throw ValidationError("unknown feature '" + name + "' in vocabulary");
        vocab.values[index_of(*f)] = list.get<std::vector<std::string>>();
    }
    validate_vocabulary(vocab);
    return vocab;
}

EphemeralContext build_context(const FeatureEstimates& estimates, const ContextVocabulary& vocab,
                               std::int64_t tick_ts) {
    for (auto f : kAllFeatures) {
        const auto& e = estimates[index_of(f)];
        if (e.feature != f) throw ValidationError("estimates are not in canonical feature order");
        if (e.ok() && !vocab.contains(f, e.value)) {
            throw ValidationError("value '" + e.value + "' is not in the " +
                                  std::string(to_string(f)) + " vocabulary");
        }
    }
    EphemeralContext ctx;
    ctx.tick_ts = tick_ts;
    ctx.estimates = estimates;
    ctx.sentence = render_sentence(ctx);
    ctx.id = context_id(ctx);
    return ctx;
}

std::string render_sentence(const EphemeralContext& context) {
    std::vector<std::string> clauses;
    for (auto f : kAllFeatures) {
        const auto& e = context[f];
        if (!e.ok()) continue;
        switch (f) {
            case FeatureKind::activity:
            case FeatureKind::speed:
            case FeatureKind::physical_state: clauses.push_back(spaced(e.value)); break;
            case FeatureKind::social: clauses.push_back(social_phrase(e.value)); break;
            case FeatureKind::location:
                clauses.push_back("in " + (e.instance_label ? *e.instance_label : spaced(e.value)));
                break;
            case FeatureKind::weather: clauses.push_back(weather_clause(e.value)); break;
            case FeatureKind::time_of_day: clauses.push_back("at " + spaced(e.value)); break;
            case FeatureKind::mood: clauses.push_back("and " + spaced(e.value)); break;
        }
        if (f == FeatureKind::physical_state) clauses.back() = "being " + clauses.back();
    }
    if (clauses.empty()) return std::string(kUnknownSentence);

    std::string sentence;
    for (const auto& c : clauses) {
        if (!sentence.empty()) sentence += ' ';
        sentence += c;
    }
    sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
    return sentence;
}

std::string context_id(const EphemeralContext& context) {
    std::string id;
    for (auto f : kAllFeatures) {
        const auto& e = context[f];
        if (!e.ok()) continue;
        if (!id.empty()) id += '|';
        id += to_string(f);
        id += '=';
        id += e.value;
    }
    return id.empty() ? std::string(kEmptyContextId) : id;
}

std::uint64_t context_cardinality(const ContextVocabulary& vocab) {
    std::uint64_t n = 1;
    for (const auto& list : vocab.values) n *= list.size();
    return n;
}

json to_json(const EphemeralContext& context) {
    json estimates = json::array();
    for (const auto& e : context.estimates) estimates.push_back(to_json(e));
    return {{"tick_ts", context.tick_ts},
            {"estimates", estimates},
            {"sentence", context.sentence},
            {"id", context.id}};
}

EphemeralContext context_from_json(const json& j) {
    EphemeralContext ctx;
    ctx.tick_ts = j.at("tick_ts").get<std::int64_t>();
    const auto& list = j.at("estimates");
    if (list.size() != kFeatureCount) throw ValidationError("context needs exactly 8 estimates");
    for (std::size_t i = 0; i < kFeatureCount; ++i) ctx.estimates[i] = estimate_from_json(list[i]);
    ctx.sentence = j.at("sentence").get<std::string>();
    ctx.id = j.at("id").get<std::string>();
    return ctx;
}

}  // namespace ephemera
