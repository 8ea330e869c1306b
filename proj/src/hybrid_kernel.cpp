#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "ephemera/errors.hpp"
#include "ephemera/recommenders.hpp"

namespace ephemera {

namespace {

// An active recommender reduced to what the per-track loop needs.
struct BlendTerm {
    double weight = 0.0;  // normalized
    std::vector<std::string> keys;  // "feature=value" per spec feature
};

struct BlendPlan {
    std::vector<std::string> active;
    std::vector<BlendTerm> terms;
};

BlendPlan plan_blend(std::span<const RecommenderSpec> specs, const HybridWeights& weights,
                     const FeatureEstimates& estimates, const Catalog& catalog, int n) {
    if (n < 1) throw ValidationError("n must be >= 1");
    if (catalog.empty()) throw ValidationError("catalog is empty");

    BlendPlan plan;
    plan.active = active_recommenders(specs, estimates);

    std::vector<double> raw;
    double total = 0.0;
    for (const auto& spec : specs) {
        if (std::find(plan.active.begin(), plan.active.end(), spec.rec_id) == plan.active.end()) {
            continue;
        }
        double reliability = 1.0;
        BlendTerm term;
        for (auto f : spec.features) {
            const auto& e = estimates[index_of(f)];
            reliability *= e.confidence;
            term.keys.push_back(std::string(to_string(f)) + "=" + e.value);
        }
        const auto it = weights.user_weights.find(spec.rec_id);
        const double user = it == weights.user_weights.end() ? 0.0 : it->second;
        raw.push_back(user * reliability);
        total += raw.back();
        plan.terms.push_back(std::move(term));
    }
    if (total <= 0.0) {
        plan.terms.clear();
        return plan;
    }
    for (std::size_t k = 0; k < plan.terms.size(); ++k) plan.terms[k].weight = raw[k] / total;
    return plan;
}

double score_track(const BlendPlan& plan, const Track& track) {
    double score = 0.0;
    for (const auto& term : plan.terms) {
        double sum = 0.0;
        for (const auto& key : term.keys) sum += track.affinity(key);
        score += term.weight * (sum / static_cast<double>(term.keys.size()));
    }
    // Normalized weights can sum to 1 + ulp.
    return std::clamp(score, 0.0, 1.0);
}

RecommendationList rank(BlendPlan plan, const Catalog& catalog, std::vector<double> scores, int n,
                        std::int64_t tick_ts) {
    RecommendationList list;
    list.tick_ts = tick_ts;
    list.active_rec_ids = std::move(plan.active);
    if (plan.terms.empty()) return list;

    std::vector<std::size_t> order(catalog.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return catalog[a].track_id < catalog[b].track_id;
    };
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(n), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                      better);
    for (std::size_t i = 0; i < top; ++i) {
        list.entries.push_back({catalog[order[i]].track_id, scores[order[i]]});
    }
    return list;
}

}  // namespace

RecommendationList blend_hybrid(std::span<const RecommenderSpec> specs,
                                const HybridWeights& weights, const FeatureEstimates& estimates,
                                const Catalog& catalog, int n, std::int64_t tick_ts) {
    BlendPlan plan = plan_blend(specs, weights, estimates, catalog, n);
    std::vector<double> scores(catalog.size(), 0.0);
    if (!plan.terms.empty()) {
        const auto count = static_cast<std::ptrdiff_t>(catalog.size());
#pragma omp parallel for schedule(static) if (count > 512)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            scores[static_cast<std::size_t>(i)] = score_track(plan, catalog[static_cast<std::size_t>(i)]);
        }
    }
    return rank(std::move(plan), catalog, std::move(scores), n, tick_ts);
}

namespace reference {

RecommendationList blend_hybrid_serial(std::span<const RecommenderSpec> specs,
                                       const HybridWeights& weights,
                                       const FeatureEstimates& estimates, const Catalog& catalog,
                                       int n, std::int64_t tick_ts) {
    BlendPlan plan = plan_blend(specs, weights, estimates, catalog, n);
    std::vector<double> scores(catalog.size(), 0.0);
    if (!plan.terms.empty()) {
        for (std::size_t i = 0; i < catalog.size(); ++i) scores[i] = score_track(plan, catalog[i]);
    }
    return rank(std::move(plan), catalog, std::move(scores), n, tick_ts);
}

}  // namespace reference

}  // namespace ephemera
