#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ephemera/errors.hpp"
#include "instances.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ephemera;
using ephemera::testing::estimates_with;
using ephemera::testing::Gen;
using ephemera::testing::ok_estimate;
using ephemera::testing::random_instance;
using ephemera::testing::track;

namespace {

FeatureEstimates anna_estimates() {
    return estimates_with({ok_estimate(FeatureKind::activity, "jogging", 0.97),
                           ok_estimate(FeatureKind::speed, "fast", 0.95),
                           ok_estimate(FeatureKind::social, "alone", 0.8),
                           ok_estimate(FeatureKind::location, "downtown", 0.9),
                           ok_estimate(FeatureKind::weather, "heavy_rain", 0.675),
                           ok_estimate(FeatureKind::time_of_day, "night", 1.0),
                           ok_estimate(FeatureKind::physical_state, "tired", 0.6),
                           ok_estimate(FeatureKind::mood, "angry", 0.7)});
}

std::map<std::string, double> engine_scores(const RecommendationList& list) {
    std::map<std::string, double> out;
    for (const auto& e : list.entries) out[e.track_id] = e.score;
    return out;
}

std::vector<std::string> engine_ranking(const RecommendationList& list) {
    std::vector<std::string> out;
    for (const auto& e : list.entries) out.push_back(e.track_id);
    return out;
}

}  // namespace

TEST_CASE("score_individual") {
    const auto est = anna_estimates();
    const RecommenderSpec mood{"m", {FeatureKind::mood}};
    CHECK(score_individual(mood, est, track("a", {{"mood=angry", 0.8}})) == doctest::Approx(0.8));

    const RecommenderSpec triple{"lwt", {FeatureKind::location, FeatureKind::weather, FeatureKind::time_of_day}};
    const auto t = track("b", {{"location=downtown", 0.6}, {"weather=heavy_rain", 0.9}, {"time_of_day=night", 0.3}});
    CHECK(score_individual(triple, est, t) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(score_individual(triple, est, t) == doctest::Approx((0.6 + 0.9 + 0.3) / 3.0).epsilon(1e-15));

    const RecommenderSpec activity{"a", {FeatureKind::activity}};
    CHECK(score_individual(activity, est, track("c", {{"activity=walking", 1.0}})) == 0.0);

    auto partial = est;
    partial[index_of(FeatureKind::weather)].status = FeatureStatus::missing;
    CHECK_THROWS_AS(score_individual(triple, partial, t), std::logic_error);
}

TEST_CASE("active_recommenders") {
    const auto specs = default_specs();
    REQUIRE(specs.size() == 9);
    CHECK(active_recommenders(specs, anna_estimates()).size() == 9);
    CHECK(active_recommenders(specs, all_missing()).empty());

    auto est = anna_estimates();
    est[index_of(FeatureKind::location)].status = FeatureStatus::conflict;
    const auto active = active_recommenders(specs, est);
    CHECK(active.size() == 7);
    CHECK(std::find(active.begin(), active.end(), "rec_location") == active.end());
    CHECK(std::find(active.begin(), active.end(), "rec_location_weather_time_of_day") == active.end());
    CHECK(std::find(active.begin(), active.end(), "rec_mood") != active.end());
}

TEST_CASE("blend_hybrid examples") {
    SUBCASE("two recommenders normalized by reliability") {
        const std::vector<RecommenderSpec> specs{{"r1", {FeatureKind::mood}}, {"r2", {FeatureKind::weather}}};
        const HybridWeights weights{{{"r1", 1.0}, {"r2", 1.0}}};
        const auto est = estimates_with({ok_estimate(FeatureKind::mood, "angry", 0.9),
                                         ok_estimate(FeatureKind::weather, "fog", 0.3)});
        const Catalog catalog{track("t1", {{"mood=angry", 1.0}}), track("t2", {{"weather=fog", 1.0}})};
        const auto list = blend_hybrid(specs, weights, est, catalog, 2);
        REQUIRE(list.entries.size() == 2);
        CHECK(list.entries[0].track_id == "t1");
        CHECK(list.entries[0].score == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(list.entries[1].score == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(blend_hybrid(specs, weights, est, catalog, 1).entries.at(0).track_id == "t1");
        CHECK(list.active_rec_ids == std::vector<std::string>{"r1", "r2"});
    }
    SUBCASE("one recommender reproduces its own ranking") {
        const std::vector<RecommenderSpec> specs{{"m", {FeatureKind::mood}}};
        const auto est = anna_estimates();
        Catalog catalog;
        Gen g(5);
        for (int i = 0; i < 20; ++i) catalog.push_back(track("t" + std::to_string(i), {{"mood=angry", g.unit()}}));
        const auto list = blend_hybrid(specs, HybridWeights{{{"m", 1.0}}}, est, catalog, 20);
        std::map<std::string, double> own;
        for (const auto& t : catalog) own[t.track_id] = score_individual(specs[0], est, t);
        CHECK(engine_ranking(list) == oracle::ranking(own));
    }
    SUBCASE("fault tolerance keeps the mood recommender") {
        auto est = anna_estimates();
        est[index_of(FeatureKind::location)].status = FeatureStatus::conflict;
        const auto catalog = load_catalog(ephemera::testing::data_path("catalog.json"));
        const auto specs = default_specs();
        const auto list = blend_hybrid(specs, default_weights_from_survey(specs), est, catalog, 10);
        CHECK(list.entries.size() == 10);
        CHECK(std::find(list.active_rec_ids.begin(), list.active_rec_ids.end(), "rec_mood") !=
              list.active_rec_ids.end());
        CHECK(std::find(list.active_rec_ids.begin(), list.active_rec_ids.end(),
                        "rec_location_weather_time_of_day") == list.active_rec_ids.end());
    }
    SUBCASE("nothing active gives an empty list") {
        const auto catalog = load_catalog(ephemera::testing::data_path("catalog.json"));
        const auto specs = default_specs();
        const auto list = blend_hybrid(specs, default_weights_from_survey(specs), all_missing(), catalog, 5, 120);
        CHECK(list.entries.empty());
        CHECK(list.active_rec_ids.empty());
        CHECK(list.tick_ts == 120);
    }
    SUBCASE("active recommenders with zero weight give an empty list") {
        const std::vector<RecommenderSpec> specs{{"m", {FeatureKind::mood}}, {"w", {FeatureKind::weather}}};
        const HybridWeights weights{{{"m", 0.0}, {"w", 1.0}}};
        const auto est = estimates_with({ok_estimate(FeatureKind::mood, "angry", 0.9)});
        const auto list = blend_hybrid(specs, weights, est, {track("t", {})}, 3);
        CHECK(list.entries.empty());
        CHECK(list.active_rec_ids == std::vector<std::string>{"m"});
    }
    SUBCASE("bad arguments") {
        const auto specs = default_specs();
        const auto w = default_weights_from_survey(specs);
        CHECK_THROWS_AS(blend_hybrid(specs, w, anna_estimates(), {track("t", {})}, 0), ValidationError);
        CHECK_THROWS_AS(blend_hybrid(specs, w, anna_estimates(), {}, 3), ValidationError);
    }
    SUBCASE("n larger than the catalog returns every track") {
        const auto specs = default_specs();
        const Catalog catalog{track("b", {}), track("a", {})};
        const auto list = blend_hybrid(specs, default_weights_from_survey(specs), anna_estimates(), catalog, 10);
        CHECK(engine_ranking(list) == std::vector<std::string>{"a", "b"});  // tie at 0 broken by id
    }
}

TEST_CASE("blend_hybrid agrees with the reference evaluation") {
    Gen g(606);
    for (int i = 0; i < 500; ++i) {
        const auto inst = random_instance(g, 5, 3);
        const auto list = blend_hybrid(inst.specs, inst.weights, inst.estimates, inst.catalog,
                                       static_cast<int>(inst.catalog.size()));
        const auto expected =
            oracle::hybrid_scores(inst.oracle_recs(), inst.weights.user_weights, inst.oracle_state(), inst.oracle_tracks());
        const auto got = engine_scores(list);
        REQUIRE(got.size() == expected.size());
        for (const auto& [id, s] : expected) CHECK(std::abs(got.at(id) - s) <= 1e-9);
        CHECK(engine_ranking(list) == oracle::ranking(expected));
    }
}

TEST_CASE("blend_hybrid properties") {
    Gen g(707);
    for (int i = 0; i < 300; ++i) {
        const auto inst = random_instance(g, 8, 4);
        const int n = static_cast<int>(inst.catalog.size());
        const auto base = blend_hybrid(inst.specs, inst.weights, inst.estimates, inst.catalog, n);

        // scores in [0,1] and ordering rule
        for (std::size_t k = 0; k < base.entries.size(); ++k) {
            CHECK(base.entries[k].score >= 0.0);
            CHECK(base.entries[k].score <= 1.0);
            if (k > 0) {
                const auto& a = base.entries[k - 1];
                const auto& b = base.entries[k];
                CHECK((a.score > b.score || (a.score == b.score && a.track_id < b.track_id)));
            }
        }

        // gating
        for (const auto& spec : inst.specs) {
            bool all_ok = true;
            for (auto f : spec.features) all_ok = all_ok && inst.estimates[index_of(f)].ok();
            const bool listed = std::find(base.active_rec_ids.begin(), base.active_rec_ids.end(), spec.rec_id) !=
                                base.active_rec_ids.end();
            CHECK(listed == all_ok);
        }

        // weight scaling
        for (double c : {0.5, 2.0, 3.7, 1000.0}) {
            auto scaled = inst.weights;
            for (auto& [id, w] : scaled.user_weights) w *= c;
            const auto s = blend_hybrid(inst.specs, scaled, inst.estimates, inst.catalog, n);
            CHECK(engine_ranking(s) == engine_ranking(base));
            REQUIRE(s.entries.size() == base.entries.size());
            for (std::size_t k = 0; k < s.entries.size(); ++k) {
                CHECK(std::abs(s.entries[k].score - base.entries[k].score) <= 1e-12);
            }
        }

        // monotonicity in one active affinity
        if (base.entries.empty()) continue;
        const auto& spec = inst.specs[0];
        bool active = true;
        for (auto f : spec.features) active = active && inst.estimates[index_of(f)].ok();
        if (!active) continue;
        auto raised = inst.catalog;
        auto& tr = raised[static_cast<std::size_t>(g.range(0, n - 1))];
        const auto& e = inst.estimates[index_of(spec.features.front())];
        const auto key = std::string(to_string(e.feature)) + "=" + e.value;
        const double before = engine_scores(base).at(tr.track_id);
        tr.affinities[key] = std::min(1.0, tr.affinity(key) + g.unit());
        const auto after = blend_hybrid(inst.specs, inst.weights, inst.estimates, raised, n);
        CHECK(engine_scores(after).at(tr.track_id) >= before);

        // determinism
        CHECK(blend_hybrid(inst.specs, inst.weights, inst.estimates, inst.catalog, n) == base);
    }
}

TEST_CASE("parallel and serial blends agree bit for bit") {
    Gen g(808);
    const auto vocab = default_vocabulary();
    Catalog catalog;
    for (int i = 0; i < 20000; ++i) {
        Track tr = track("t" + std::to_string(100000 + i), {});
        for (auto f : kAllFeatures) {
            for (const auto& v : vocab.of(f)) {
                if (g.coin(0.2)) tr.affinities[std::string(to_string(f)) + "=" + v] = std::round(g.unit() * 20) / 20;
            }
        }
        catalog.push_back(std::move(tr));
    }
    const auto specs = default_specs();
    const auto weights = default_weights_from_survey(specs);
    for (int n : {1, 10, 500, 20000}) {
        const auto par = blend_hybrid(specs, weights, anna_estimates(), catalog, n);
        const auto ser = reference::blend_hybrid_serial(specs, weights, anna_estimates(), catalog, n);
        CHECK(par == ser);
        CHECK(par.entries.size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("survey weights") {
    const auto specs = default_specs();
    const auto w = default_weights_from_survey(specs);
    CHECK(w.user_weights.at("rec_mood") == doctest::Approx(97.0 / 103.0).epsilon(1e-12));
    CHECK(w.user_weights.at("rec_location") == doctest::Approx(32.0 / 103.0).epsilon(1e-12));
    CHECK(w.user_weights.at("rec_activity") == doctest::Approx(92.0 / 103.0).epsilon(1e-12));
    CHECK(w.user_weights.at("rec_location_weather_time_of_day") == doctest::Approx(36.0 / 103.0).epsilon(1e-12));
    CHECK(w.user_weights.at("rec_mood") / w.user_weights.at("rec_location") ==
          doctest::Approx(97.0 / 32.0).epsilon(1e-12));
    CHECK(w.user_weights.size() == specs.size());
    CHECK(survey_count(FeatureKind::social) == 32);
    CHECK(survey_count(FeatureKind::physical_state) == 92);
    CHECK(survey_count(FeatureKind::weather) == 38);
    CHECK_NOTHROW(validate_weights(w, specs));
}

TEST_CASE("weights validation") {
    const auto specs = default_specs();
    CHECK_THROWS_AS(validate_weights(HybridWeights{{{"rec_mood", -1.0}}}, specs), ValidationError);
    CHECK_THROWS_AS(validate_weights(HybridWeights{{{"rec_mood", 0.0}}}, specs), ValidationError);
    CHECK_THROWS_AS(validate_weights(HybridWeights{{{"rec_mood", std::nan("")}}}, specs), ValidationError);
    CHECK_THROWS_AS(validate_weights(HybridWeights{{{"rec_nope", 1.0}}}, specs), ValidationError);
    CHECK_NOTHROW(validate_weights(HybridWeights{{{"rec_mood", 1.0}}}, specs));
    const HybridWeights w{{{"rec_mood", 0.5}, {"rec_weather", 2.0}}};
    CHECK(weights_from_json(to_json(w)) == w);
}

TEST_CASE("spec normalization") {
    auto specs = normalize_specs({{"x", {FeatureKind::mood, FeatureKind::activity, FeatureKind::mood}}});
    CHECK(specs[0].features == std::vector<FeatureKind>{FeatureKind::activity, FeatureKind::mood});
    CHECK_THROWS_AS(normalize_specs({{"x", {}}}), ValidationError);
    CHECK_THROWS_AS(normalize_specs({{"x", {FeatureKind::mood}}, {"x", {FeatureKind::speed}}}), ValidationError);
    CHECK(specs_from_json(to_json(default_specs())) == default_specs());
}

TEST_CASE("catalog validation") {
    const auto catalog = load_catalog(ephemera::testing::data_path("catalog.json"));
    CHECK(catalog.size() == 40);
    CHECK(catalog_from_json(to_json(catalog)) == catalog);
    CHECK_THROWS_AS(validate_catalog({track("a", {}), track("a", {})}), ValidationError);
    CHECK_THROWS_AS(validate_catalog({track("a", {{"mood=sad", 1.5}})}), ValidationError);
    CHECK_THROWS_AS(validate_catalog({track("a", {{"mood", 0.5}})}), ValidationError);
}

TEST_CASE("session_metrics") {
    const auto vocab = default_vocabulary();
    auto tick = [&](std::int64_t ts, std::vector<std::string> ids, bool known) {
        TickRecord r;
        r.context = build_context(
            known ? estimates_with({ok_estimate(FeatureKind::activity, "jogging", 0.9)}) : all_missing(), vocab, ts);
        r.recommendations.tick_ts = ts;
        for (auto& id : ids) r.recommendations.entries.push_back({id, 0.5});
        return r;
    };
    const Catalog catalog{track("a", {}), track("b", {}), track("c", {}), track("d", {})};

    SUBCASE("single tick") {
        const std::vector<TickRecord> trace{tick(0, {"a"}, true)};
        const auto m = session_metrics(trace, catalog, {});
        CHECK(m.ticks == 1);
        CHECK(m.availability == 1.0);
        CHECK(m.distinct_contexts == 1);
        CHECK(m.mean_novelty == 1.0);
    }
    SUBCASE("identical consecutive lists") {
        const std::vector<TickRecord> trace{tick(0, {"a", "b"}, true), tick(60, {"b", "a"}, true),
                                            tick(120, {"a", "b"}, true)};
        CHECK(session_metrics(trace, catalog, {}).mean_consecutive_jaccard == 1.0);
    }
    SUBCASE("three-tick toy trace") {
        const std::vector<TickRecord> trace{tick(0, {"a", "b"}, true), tick(60, {"b", "c"}, true),
                                            tick(120, {}, false)};
        const std::vector<std::string> history{"a"};
        const auto m = session_metrics(trace, catalog, history);
        CHECK(m.ticks == 3);
        CHECK(m.distinct_contexts == 1);
        CHECK(m.availability == doctest::Approx(2.0 / 3.0));
        CHECK(m.mean_consecutive_jaccard == doctest::Approx(1.0 / 3.0));  // {b} / {a,b,c}
        CHECK(m.catalog_coverage == doctest::Approx(0.75));
        CHECK(m.mean_novelty == doctest::Approx(0.75));  // (1/2 + 2/2) / 2
        const auto& activity = m.per_feature_status_counts[index_of(FeatureKind::activity)];
        CHECK(activity == StatusCounts{2, 0, 1});
        CHECK(m.per_feature_status_counts[index_of(FeatureKind::mood)] == StatusCounts{0, 0, 3});
        CHECK(metrics_from_json(to_json(m)) == m);
    }
    SUBCASE("an empty tick breaks the consecutive pairs") {
        const std::vector<TickRecord> trace{tick(0, {"a"}, true), tick(60, {}, true), tick(120, {"a"}, true)};
        CHECK(session_metrics(trace, catalog, {}).mean_consecutive_jaccard == 0.0);
    }
    SUBCASE("empty trace") {
        CHECK_THROWS_AS(session_metrics({}, catalog, {}), ValidationError);
    }
}

TEST_CASE("recommendation list JSON") {
    RecommendationList list{60, {{"t1", 0.5}, {"t2", 0.25}}, {"rec_mood"}};
    CHECK(recommendation_list_from_json(to_json(list)) == list);
}
