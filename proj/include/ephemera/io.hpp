#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ephemera/context_builder.hpp"
#include "ephemera/feature_inference.hpp"
#include "ephemera/recommenders.hpp"
#include "ephemera/sensor_model.hpp"

namespace ephemera {

/// Sorted keys, two-space indent, reals fixed to 6 decimals, trailing newline.
/// Equal values always produce identical bytes.
std::string canonical_json(const nlohmann::json& value);

// File helpers. IoError on filesystem failure; ValidationError (with the path
// prefixed) on bad content.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);
nlohmann::json read_json_file(const std::filesystem::path& path);

Scenario load_scenario(const std::filesystem::path& path);
Catalog load_catalog(const std::filesystem::path& path);
UserProfile load_profile(const std::filesystem::path& path);
HybridWeights load_weights(const std::filesystem::path& path);
FaultPlan load_fault_plan(const std::filesystem::path& path);
ContextVocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace ephemera
