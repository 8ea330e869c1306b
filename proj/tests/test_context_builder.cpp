#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "ephemera/errors.hpp"
#include "test_support.hpp"

using namespace ephemera;
using ephemera::testing::estimates_with;
using ephemera::testing::Gen;
using ephemera::testing::ok_estimate;

namespace {

constexpr const char* kAnnaId =
    "activity=jogging|speed=fast|social=alone|location=downtown|weather=heavy_rain|"
    "time_of_day=night|physical_state=tired|mood=angry";

EphemeralContext golden_context() {
    const auto scenario = load_scenario(ephemera::testing::data_path("anna_scenario.jsonl"));
    const auto profile = load_profile(ephemera::testing::data_path("anna_profile.json"));
    const auto window = window_readings(scenario, ephemera::testing::kAnnaTick, 60);
    const auto est = infer_features(window, profile, scenario.sources, ephemera::testing::kAnnaTick);
    return build_context(est, default_vocabulary(), ephemera::testing::kAnnaTick);
}

}  // namespace

TEST_CASE("golden context") {
    const auto ctx = golden_context();
    for (auto f : kAllFeatures) CHECK(ctx[f].ok());
    CHECK(ctx.sentence == ephemera::testing::kAnnaSentence);
    CHECK(ctx.id == kAnnaId);
    CHECK(render_sentence(ctx) == ctx.sentence);
    CHECK(context_id(ctx) == ctx.id);
    CHECK(ctx.tick_ts == ephemera::testing::kAnnaTick);
}

TEST_CASE("empty context") {
    const auto ctx = build_context(all_missing(), default_vocabulary(), 0);
    CHECK(ctx.id == "\xE2\x88\x85");
    CHECK(ctx.sentence == "Unknown context");
}

TEST_CASE("sentence clauses") {
    const auto vocab = default_vocabulary();
    auto sentence = [&](std::initializer_list<FeatureEstimate> oks) {
        return build_context(estimates_with(oks), vocab, 0).sentence;
    };
    CHECK(sentence({ok_estimate(FeatureKind::activity, "walking", 0.9)}) == "Walking");
    CHECK(sentence({ok_estimate(FeatureKind::activity, "walking", 0.9),
                    ok_estimate(FeatureKind::time_of_day, "morning", 1.0)}) == "Walking at morning");
    CHECK(sentence({ok_estimate(FeatureKind::social, "in_crowd", 0.5)}) == "In a crowd");
    CHECK(sentence({ok_estimate(FeatureKind::activity, "biking", 0.5),
                    ok_estimate(FeatureKind::social, "with_friends", 0.5)}) == "Biking with friends");
    CHECK(sentence({ok_estimate(FeatureKind::activity, "driving", 0.5),
                    ok_estimate(FeatureKind::weather, "light_rain", 0.5)}) ==
          "Driving under a light rain");
    CHECK(sentence({ok_estimate(FeatureKind::weather, "fog", 0.5)}) == "Under fog");
    CHECK(sentence({ok_estimate(FeatureKind::location, "park", 0.5),
                    ok_estimate(FeatureKind::mood, "happy", 0.5)}) == "In park and happy");

    auto located = ok_estimate(FeatureKind::location, "campus", 0.5);
    located.instance_label = "UNSW campus";
    CHECK(sentence({located}) == "In UNSW campus");
}

TEST_CASE("non-OK estimates are left out") {
    auto est = estimates_with({ok_estimate(FeatureKind::activity, "jogging", 0.9),
                               ok_estimate(FeatureKind::mood, "calm", 0.6)});
    est[index_of(FeatureKind::location)].status = FeatureStatus::conflict;
    const auto ctx = build_context(est, default_vocabulary(), 60);
    CHECK(ctx.id == "activity=jogging|mood=calm");
    CHECK(ctx.sentence == "Jogging and calm");
}

TEST_CASE("conflicting calendar drops location from the golden context") {
    const auto scenario = load_scenario(ephemera::testing::data_path("conflict_scenario.jsonl"));
    const auto profile = load_profile(ephemera::testing::data_path("anna_profile.json"));
    for (std::int64_t tick : tick_timestamps(scenario)) {
        const auto window = window_readings(scenario, tick, 60);
        const auto est = infer_features(window, profile, scenario.sources, tick);
        const auto ctx = build_context(est, default_vocabulary(), tick);
        CHECK(ctx[FeatureKind::location].status == FeatureStatus::conflict);
        CHECK(ctx.id.find("location=") == std::string::npos);
        CHECK(ctx.sentence.find(" in ") == std::string::npos);
        CHECK(ctx.sentence.rfind("In ", 0) == std::string::npos);
        CHECK(ctx.id != "\xE2\x88\x85");
    }
}

TEST_CASE("context_id") {
    const auto vocab = default_vocabulary();
    CHECK(build_context(estimates_with({ok_estimate(FeatureKind::activity, "jogging", 1.0)}), vocab, 0).id ==
          "activity=jogging");

    auto located = ok_estimate(FeatureKind::location, "downtown", 0.8);
    located.instance_label = "downtown of Sydney";
    CHECK(build_context(estimates_with({located}), vocab, 0).id == "location=downtown");
}

TEST_CASE("values outside the vocabulary are rejected") {
    const auto vocab = default_vocabulary();
    CHECK_THROWS_AS(build_context(estimates_with({ok_estimate(FeatureKind::mood, "ecstatic", 0.9)}), vocab, 0),
                    ValidationError);
    // the instance label is free text
    auto located = ok_estimate(FeatureKind::location, "beach", 0.5);
    located.instance_label = "Bondi, not in any list";
    CHECK_NOTHROW(build_context(estimates_with({located}), vocab, 0));
}

TEST_CASE("context_cardinality") {
    ContextVocabulary eight;
    for (auto f : kAllFeatures) {
        for (int i = 0; i < 8; ++i) eight.values[index_of(f)].push_back("v" + std::to_string(i));
    }
    CHECK(context_cardinality(eight) == 16777216u);
    CHECK(context_cardinality(eight) > 16000000u);

    ContextVocabulary single;
    for (auto f : kAllFeatures) single.values[index_of(f)] = {"only"};
    CHECK(context_cardinality(single) == 1u);

    CHECK(context_cardinality(default_vocabulary()) == 589824u);

    // multiplicative: growing one feature from 1 to k values multiplies by k
    for (int k = 1; k <= 9; ++k) {
        auto grown = single;
        grown.values[index_of(FeatureKind::weather)].clear();
        for (int i = 0; i < k; ++i) grown.values[index_of(FeatureKind::weather)].push_back("w" + std::to_string(i));
        CHECK(context_cardinality(grown) == static_cast<std::uint64_t>(k));
        auto both = grown;
        both.values[index_of(FeatureKind::mood)] = {"a", "b", "c"};
        CHECK(context_cardinality(both) == 3u * static_cast<std::uint64_t>(k));
    }
}

TEST_CASE("vocabulary validation and file form") {
    auto v = default_vocabulary();
    CHECK_NOTHROW(validate_vocabulary(v));
    CHECK(vocabulary_from_json(to_json(v)) == v);
    CHECK(load_vocabulary(ephemera::testing::data_path("vocabulary.json")) == v);

    const auto partial = vocabulary_from_json(nlohmann::json{{"mood", {"happy", "sad"}}});
    CHECK(partial.of(FeatureKind::mood) == std::vector<std::string>{"happy", "sad"});
    CHECK(partial.of(FeatureKind::activity) == v.of(FeatureKind::activity));

    CHECK_THROWS_AS(vocabulary_from_json(nlohmann::json{{"colour", {"red"}}}), ValidationError);
    CHECK_THROWS_AS(vocabulary_from_json(nlohmann::json{{"mood", nlohmann::json::array()}}), ValidationError);
    CHECK_THROWS_AS(vocabulary_from_json(nlohmann::json{{"mood", {"sad", "sad"}}}), ValidationError);
}

TEST_CASE("context_id is injective over random assignments") {
    const auto vocab = default_vocabulary();
    Gen g(404);
    std::map<std::string, std::string> seen;  // id -> canonical assignment
    for (int i = 0; i < 5000; ++i) {
        auto est = all_missing();
        std::string assignment;
        for (auto f : kAllFeatures) {
            if (!g.coin(0.6)) continue;
            const auto& value = g.pick(vocab.of(f));
            est[index_of(f)] = ok_estimate(f, value, 0.5);
            assignment += std::string(to_string(f)) + ":" + value + ";";
        }
        const auto ctx = build_context(est, vocab, 0);
        const auto [it, inserted] = seen.emplace(ctx.id, assignment);
        if (!inserted) CHECK(it->second == assignment);

        // changing any one OK value changes the id
        for (auto f : kAllFeatures) {
            if (!est[index_of(f)].ok()) continue;
            for (const auto& other : vocab.of(f)) {
                if (other == est[index_of(f)].value) continue;
                auto changed = est;
                changed[index_of(f)].value = other;
                CHECK(build_context(changed, vocab, 0).id != ctx.id);
            }
            break;
        }
    }
    CHECK(seen.size() > 1000);
}

TEST_CASE("context JSON round trip") {
    const auto ctx = golden_context();
    CHECK(context_from_json(to_json(ctx)) == ctx);
    const auto j = to_json(ctx);
    CHECK(j.at("sentence") == ephemera::testing::kAnnaSentence);
    CHECK(j.at("id") == kAnnaId);
}
