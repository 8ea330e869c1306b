#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ephemera/feature_inference.hpp"

namespace ephemera {

/// Identity of a context in which no feature is known.
inline constexpr std::string_view kEmptyContextId = "\xE2\x88\x85";  // U+2205
inline constexpr std::string_view kUnknownSentence = "Unknown context";

struct ContextVocabulary {
    std::array<std::vector<std::string>, kFeatureCount> values;

    const std::vector<std::string>& of(FeatureKind f) const { return values[index_of(f)]; }
    bool contains(FeatureKind f, std::string_view value) const;
    bool operator==(const ContextVocabulary&) const = default;
};

ContextVocabulary default_vocabulary();
/// Throws ValidationError on an empty list or a repeated value.
void validate_vocabulary(const ContextVocabulary& vocab);
nlohmann::json to_json(const ContextVocabulary& vocab);
/// Features absent from the file keep their default vocabulary.
ContextVocabulary vocabulary_from_json(const nlohmann::json& j);

struct EphemeralContext {
    std::int64_t tick_ts = 0;
    FeatureEstimates estimates = all_missing();
    std::string sentence{kUnknownSentence};
    std::string id{kEmptyContextId};

    const FeatureEstimate& operator[](FeatureKind f) const { return estimates[index_of(f)]; }
    bool operator==(const EphemeralContext&) const = default;
};

/// Throws ValidationError when an OK value (other than a location instance label) is
/// outside the vocabulary.
EphemeralContext build_context(const FeatureEstimates& estimates, const ContextVocabulary& vocab,
                               std::int64_t tick_ts);

std::string render_sentence(const EphemeralContext& context);
std::string context_id(const EphemeralContext& context);

/// Number of distinct fully-specified contexts the vocabulary admits.
std::uint64_t context_cardinality(const ContextVocabulary& vocab);

nlohmann::json to_json(const EphemeralContext& context);
EphemeralContext context_from_json(const nlohmann::json& j);

}  // namespace ephemera
