#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "ephemera/context_builder.hpp"
#include "ephemera/feature_inference.hpp"
#include "ephemera/recommenders.hpp"
#include "ephemera/sensor_model.hpp"

namespace httplib {
class Server;
}

namespace ephemera {

struct StoredUser {
    UserProfile profile;
    std::vector<std::string> history;
};

/// Persistence for profiles and listening history, keyed by user_id.
class ProfileStore {
public:
    virtual ~ProfileStore() = default;
    virtual std::optional<StoredUser> load(const std::string& user_id) const = 0;
    virtual void save(const StoredUser& user) = 0;
};

class MemoryProfileStore final : public ProfileStore {
public:
    std::optional<StoredUser> load(const std::string& user_id) const override;
    void save(const StoredUser& user) override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, StoredUser> users_;
};

/// One JSON file per user: <root>/<user_id>.json.
class JsonFileProfileStore final : public ProfileStore {
public:
    explicit JsonFileProfileStore(std::filesystem::path root);
    std::optional<StoredUser> load(const std::string& user_id) const override;
    void save(const StoredUser& user) override;

private:
    std::filesystem::path file_for(const std::string& user_id) const;

    std::filesystem::path root_;
    mutable std::mutex mutex_;
};

struct SessionOptions {
    UserProfile profile;
    std::optional<std::string> session_id;
    std::optional<HybridWeights> weights;
    std::optional<ContextVocabulary> vocab;
    std::optional<std::vector<RecommenderSpec>> specs;
    std::vector<SourceDescriptor> sources;
};

SessionOptions session_options_from_json(const nlohmann::json& j);

struct IngestAck {
    std::size_t accepted = 0;
    std::optional<std::int64_t> tick_ts;
    std::string sentence;
};

struct SessionConfig {
    ContextVocabulary vocab;
    std::vector<RecommenderSpec> specs;
    HybridWeights weights;
    std::vector<SourceDescriptor> sources;
    FaultPlan faults;
};

/// Session registry and engine driver behind the HTTP API.
///
/// Each session has a single writer at a time. Readers work on an immutable snapshot
/// and see either the state before or after an ingest, never a mix. Different
/// sessions never contend beyond the registry lookup.
class SessionService {
public:
    SessionService(Catalog catalog, std::shared_ptr<ProfileStore> store,
                   std::int64_t window_seconds = 60);
    ~SessionService();

    std::string open_session(SessionOptions options);

    /// `sources` declares (or redeclares) sources before the readings are validated.
    IngestAck ingest_events(const std::string& session_id, std::vector<SensorReading> readings,
                            std::vector<SourceDescriptor> sources = {});

    EphemeralContext current_context(const std::string& session_id) const;
    FeatureEstimates current_estimates(const std::string& session_id) const;
    RecommendationList current_recommendations(const std::string& session_id, int n) const;
    void update_weights(const std::string& session_id, const HybridWeights& weights);
    void inject_faults(const std::string& session_id, const FaultPlan& plan);
    SessionConfig config(const std::string& session_id) const;
    std::vector<std::string> history(const std::string& session_id) const;

    const Catalog& catalog() const { return catalog_; }

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& session_id) const;

    Catalog catalog_;
    std::shared_ptr<ProfileStore> store_;
    std::int64_t window_seconds_;
    mutable std::shared_mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
};

/// Installs the JSON routes on `server`. The service must outlive the server.
void install_routes(httplib::Server& server, SessionService& service);

/// Blocking HTTP server. Returns false when the port cannot be bound.
bool serve(SessionService& service, const std::string& host, int port);

}  // namespace ephemera
