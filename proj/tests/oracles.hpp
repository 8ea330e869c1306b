#pragma once

// Test-only reference evaluations. These restate the scoring and fusion rules
// directly from their definitions and share no code with the engine.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace ephemera::oracle {

struct Vote {
    std::string value;
    double confidence;
    std::string source;
};

struct Fused {
    enum Status { ok, conflict, missing } status = missing;
    std::string value;
    double confidence = 0.0;
};

inline Fused fuse(const std::vector<Vote>& raw) {
    std::vector<Vote> votes;
    for (const auto& v : raw) {
        if (v.confidence > 0.0) votes.push_back(v);
    }
    Fused out;
    if (votes.empty()) return out;

    std::vector<std::string> values;
    for (const auto& v : votes) {
        if (std::find(values.begin(), values.end(), v.value) == values.end()) values.push_back(v.value);
    }
    auto support = [&](const std::string& value) {
        double s = 0.0;
        for (const auto& v : votes) {
            if (v.value == value) s += v.confidence;
        }
        return s;
    };
    auto sources = [&](const std::string& value) {
        std::set<std::string> s;
        for (const auto& v : votes) {
            if (v.value == value) s.insert(v.source);
        }
        return s;
    };

    std::string best = values.front();
    for (const auto& v : values) {
        const double sv = support(v);
        const double sb = support(best);
        if (sv > sb || (sv == sb && v < best)) best = v;
    }
    const auto best_sources = sources(best);
    double second = 0.0;
    double total = 0.0;
    for (const auto& v : values) {
        total += support(v);
        if (v == best) continue;
        bool distinct = false;
        for (const auto& s : sources(v)) distinct = distinct || best_sources.count(s) == 0;
        if (distinct) second = std::max(second, support(v));
    }
    if (second > 0.0 && support(best) < 1.5 * second) {
        out.status = Fused::conflict;
        return out;
    }
    double all_wrong = 1.0;
    for (const auto& v : votes) {
        if (v.value == best) all_wrong *= (1.0 - v.confidence);
    }
    out.status = Fused::ok;
    out.value = best;
    out.confidence = (1.0 - all_wrong) * support(best) / total;
    return out;
}

struct Recommender {
    std::string id;
    std::vector<std::string> features;
};

struct FeatureState {
    bool ok = false;
    std::string value;
    double confidence = 0.0;
};

using TrackAffinities = std::map<std::string, double>;

/// Hybrid score of every track, straight from the definition.
inline std::map<std::string, double> hybrid_scores(
    const std::vector<Recommender>& recs, const std::map<std::string, double>& user_weights,
    const std::map<std::string, FeatureState>& state,
    const std::map<std::string, TrackAffinities>& tracks) {
    std::vector<std::pair<const Recommender*, double>> raw;
    double total = 0.0;
    for (const auto& r : recs) {
        bool active = true;
        double reliability = 1.0;
        for (const auto& f : r.features) {
            const auto it = state.find(f);
            if (it == state.end() || !it->second.ok) {
                active = false;
                break;
            }
            reliability *= it->second.confidence;
        }
        if (!active) continue;
        const auto w = user_weights.count(r.id) ? user_weights.at(r.id) : 0.0;
        raw.emplace_back(&r, w * reliability);
        total += w * reliability;
    }
    std::map<std::string, double> scores;
    if (raw.empty() || total <= 0.0) return scores;
    for (const auto& [id, aff] : tracks) {
        double score = 0.0;
        for (const auto& [rec, w] : raw) {
            double mean = 0.0;
            for (const auto& f : rec->features) {
                const auto key = f + "=" + state.at(f).value;
                mean += aff.count(key) ? aff.at(key) : 0.0;
            }
            mean /= static_cast<double>(rec->features.size());
            score += (w / total) * mean;
        }
        scores[id] = score;
    }
    return scores;
}

/// Track ids by score descending, then id ascending.
inline std::vector<std::string> ranking(const std::map<std::string, double>& scores) {
    std::vector<std::pair<std::string, double>> v(scores.begin(), scores.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return std::tie(b.second, a.first) < std::tie(a.second, b.first);
    });
    std::vector<std::string> ids;
    for (const auto& [id, s] : v) ids.push_back(id);
    return ids;
}

}  // namespace ephemera::oracle
