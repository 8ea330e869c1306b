#include "ephemera/service.hpp"

#include <algorithm>
#include <random>

#include <httplib.h>

#include "ephemera/errors.hpp"
#include "ephemera/io.hpp"

namespace ephemera {

using nlohmann::json;

namespace {

bool safe_user_id(const std::string& id) {
    return !id.empty() && id.size() <= 128 && id != "." && id != ".." &&
           std::all_of(id.begin(), id.end(), [](unsigned char c) {
               return std::isalnum(c) || c == '_' || c == '-' || c == '.';
           });
}

json stored_to_json(const StoredUser& user) {
    return {{"profile", to_json(user.profile)}, {"history", user.history}};
}

StoredUser stored_from_json(const json& j) {
    return {profile_from_json(j.at("profile")),
            j.value("history", std::vector<std::string>{})};
}

void upsert_sources(std::vector<SourceDescriptor>& known, std::vector<SourceDescriptor> incoming) {
    for (auto& s : incoming) {
        auto it = std::find_if(known.begin(), known.end(), [&](const SourceDescriptor& k) {
            return k.source_id == s.source_id;
        });
        if (it == known.end()) {
            known.push_back(std::move(s));
        } else {
            *it = std::move(s);
        }
    }
}

}  // namespace

std::optional<StoredUser> MemoryProfileStore::load(const std::string& user_id) const {
    std::lock_guard lock(mutex_);
    const auto it = users_.find(user_id);
    if (it == users_.end()) return std::nullopt;
    return it->second;
}

void MemoryProfileStore::save(const StoredUser& user) {
    std::lock_guard lock(mutex_);
    users_[user.profile.user_id] = user;
}

JsonFileProfileStore::JsonFileProfileStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw IoError(root_.string(), ec.message());
}

std::filesystem::path JsonFileProfileStore::file_for(const std::string& user_id) const {
    if (!safe_user_id(user_id)) throw ValidationError("user_id '" + user_id + "' is not storable");
    return root_ / (user_id + ".json");
}

std::optional<StoredUser> JsonFileProfileStore::load(const std::string& user_id) const {
    const auto path = file_for(user_id);
    std::lock_guard lock(mutex_);
    if (!std::filesystem::exists(path)) return std::nullopt;
    const auto j = read_json_file(path);
    try {
        return stored_from_json(j);
    } catch (const std::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void JsonFileProfileStore::save(const StoredUser& user) {
    const auto path = file_for(user.profile.user_id);
    std::lock_guard lock(mutex_);
    // Write-then-rename so a crash never leaves a truncated record.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    write_file(tmp, canonical_json(stored_to_json(user)));
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(path.string(), ec.message());
}

SessionOptions session_options_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    if (!j.contains("profile")) throw ValidationError("missing profile");
    SessionOptions o;
    o.profile = profile_from_json(j.at("profile"));
    if (j.contains("session_id")) o.session_id = j.at("session_id").get<std::string>();
    if (j.contains("weights")) o.weights = weights_from_json(j.at("weights"));
    if (j.contains("vocab")) o.vocab = vocabulary_from_json(j.at("vocab"));
    if (j.contains("specs")) o.specs = specs_from_json(j.at("specs"));
    for (const auto& s : j.value("sources", json::array())) o.sources.push_back(source_from_json(s));
    return o;
}

// Everything observable about a session. Never modified once published.
struct SessionState {
    UserProfile profile;
    HybridWeights weights;
    ContextVocabulary vocab;
    std::vector<RecommenderSpec> specs;
    std::vector<SourceDescriptor> sources;
    FaultPlan faults;
    std::uint64_t fault_seed = 0;
    std::vector<SensorReading> buffer;
    std::optional<std::int64_t> tick_ts;
    FeatureEstimates estimates = all_missing();
    EphemeralContext context;
    std::vector<std::string> history;
};

// Readers copy the state pointer and work on that snapshot without holding a lock.
// Writers are serialized by write_mutex and publish a whole new state at once, so
// a steady stream of readers cannot starve an ingest.
struct SessionService::Session {
    std::mutex write_mutex;
    mutable std::mutex state_mutex;
    std::shared_ptr<const SessionState> state;

    std::shared_ptr<const SessionState> snapshot() const {
        std::lock_guard lock(state_mutex);
        return state;
    }
    void publish(std::shared_ptr<const SessionState> next) {
        std::lock_guard lock(state_mutex);
        state = std::move(next);
    }
};

SessionService::SessionService(Catalog catalog, std::shared_ptr<ProfileStore> store,
                               std::int64_t window_seconds)
    : catalog_(std::move(catalog)), store_(std::move(store)), window_seconds_(window_seconds) {
    validate_catalog(catalog_);
    if (window_seconds_ <= 0) throw ValidationError("window must be > 0");
    if (!store_) store_ = std::make_shared<MemoryProfileStore>();
}

SessionService::~SessionService() = default;

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& session_id) const {
    std::shared_lock lock(registry_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + session_id + "'");
    return it->second;
}

std::string SessionService::open_session(SessionOptions options) {
    validate_profile(options.profile);
    if (!safe_user_id(options.profile.user_id)) {
        throw ValidationError("user_id may only contain letters, digits, '_', '-', '.'");
    }
    auto state = std::make_shared<SessionState>();
    state->profile = options.profile;
    state->vocab = options.vocab.value_or(default_vocabulary());
    validate_vocabulary(state->vocab);
    state->specs = normalize_specs(options.specs.value_or(default_specs()));
    state->weights = options.weights.value_or(default_weights_from_survey(state->specs));
    validate_weights(state->weights, state->specs);
    upsert_sources(state->sources, std::move(options.sources));

    if (auto stored = store_->load(options.profile.user_id)) state->history = stored->history;

    auto session = std::make_shared<Session>();
    std::string id;
    {
        std::unique_lock lock(registry_mutex_);
        if (options.session_id) {
            if (options.session_id->empty()) throw ValidationError("empty session_id");
            if (sessions_.count(*options.session_id) > 0) {
                throw ValidationError("session_id '" + *options.session_id + "' already exists");
            }
            id = *options.session_id;
        } else {
            do {
                id = "s" + std::to_string(next_id_++);
            } while (sessions_.count(id) > 0);
        }
        session->state = std::move(state);
        sessions_.emplace(id, session);
    }
    const auto published = session->snapshot();
    store_->save({published->profile, published->history});
    return id;
}

IngestAck SessionService::ingest_events(const std::string& session_id,
                                        std::vector<SensorReading> readings,
                                        std::vector<SourceDescriptor> sources) {
    auto session = find(session_id);
    std::lock_guard writer(session->write_mutex);
    const auto current = session->snapshot();

    auto known = current->sources;
    upsert_sources(known, std::move(sources));
    for (const auto& r : readings) {
        const auto it = std::find_if(known.begin(), known.end(), [&](const SourceDescriptor& s) {
            return s.source_id == r.source_id;
        });
        if (it == known.end()) throw ValidationError("unknown source_id '" + r.source_id + "'");
        if (!payload_matches_kind(r.payload, it->kind)) {
            throw ValidationError("payload " + std::string(payload_tag(r.payload)) +
                                  " not valid for source kind " + std::string(to_string(it->kind)));
        }
    }

    IngestAck ack;
    ack.accepted = readings.size();
    if (readings.empty()) {
        if (known != current->sources) {
            auto next = std::make_shared<SessionState>(*current);
            next->sources = std::move(known);
            session->publish(std::move(next));
        }
        ack.tick_ts = current->tick_ts;
        ack.sentence = current->context.sentence;
        return ack;
    }

    // Build the next state on the side; publish only if every step succeeds.
    auto next = std::make_shared<SessionState>(*current);
    next->sources = std::move(known);
    auto faulted = apply_fault_plan(readings, next->faults, next->fault_seed);
    std::int64_t tick = next->tick_ts.value_or(0);
    for (const auto& r : readings) tick = std::max(tick, r.timestamp);

    for (const auto& r : faulted) {
        if (const auto* play = std::get_if<PlayEvent>(&r.payload)) next->history.push_back(play->track_id);
    }
    next->buffer.insert(next->buffer.end(), std::make_move_iterator(faulted.begin()),
                        std::make_move_iterator(faulted.end()));
    std::erase_if(next->buffer, [&](const SensorReading& r) { return r.timestamp <= tick - window_seconds_; });

    const auto window = window_readings(next->buffer, tick, window_seconds_);
    next->estimates = infer_features(window, next->profile, next->sources, tick);
    next->context = build_context(next->estimates, next->vocab, tick);
    next->tick_ts = tick;

    if (next->history.size() != current->history.size()) store_->save({next->profile, next->history});

    ack.tick_ts = tick;
    ack.sentence = next->context.sentence;
    session->publish(std::move(next));
    return ack;
}

EphemeralContext SessionService::current_context(const std::string& session_id) const {
    return find(session_id)->snapshot()->context;
}

FeatureEstimates SessionService::current_estimates(const std::string& session_id) const {
    return find(session_id)->snapshot()->estimates;
}

RecommendationList SessionService::current_recommendations(const std::string& session_id,
                                                           int n) const {
    if (n < 1) throw ValidationError("n must be >= 1");
    const auto state = find(session_id)->snapshot();
    if (!state->tick_ts) return RecommendationList{};
    return blend_hybrid(state->specs, state->weights, state->estimates, catalog_, n, *state->tick_ts);
}

void SessionService::update_weights(const std::string& session_id, const HybridWeights& weights) {
    auto session = find(session_id);
    std::lock_guard writer(session->write_mutex);
    const auto current = session->snapshot();
    validate_weights(weights, current->specs);
    auto next = std::make_shared<SessionState>(*current);
    next->weights = weights;
    session->publish(std::move(next));
}

void SessionService::inject_faults(const std::string& session_id, const FaultPlan& plan) {
    auto session = find(session_id);
    std::lock_guard writer(session->write_mutex);
    const auto current = session->snapshot();
    validate_fault_plan(plan, current->sources);
    auto next = std::make_shared<SessionState>(*current);
    next->faults = plan;
    session->publish(std::move(next));
}

SessionConfig SessionService::config(const std::string& session_id) const {
    const auto s = find(session_id)->snapshot();
    return {s->vocab, s->specs, s->weights, s->sources, s->faults};
}

std::vector<std::string> SessionService::history(const std::string& session_id) const {
    return find(session_id)->snapshot()->history;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& error,
                const std::string& detail) {
    send_json(res, status, {{"error", error}, {"detail", detail}});
}

template <class Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const NotFoundError& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const ValidationError& e) {
            send_error(res, 422, "validation", e.what());
        } catch (const json::exception& e) {
            send_error(res, 422, "validation", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON body: ") + e.what());
    }
}

json config_to_json(const SessionConfig& c) {
    json sources = json::array();
    for (const auto& s : c.sources) sources.push_back(to_json(s));
    return {{"vocab", to_json(c.vocab)},
            {"specs", to_json(std::span<const RecommenderSpec>(c.specs))},
            {"weights", to_json(c.weights)},
            {"sources", sources},
            {"faults", to_json(c.faults)}};
}

}  // namespace

void install_routes(httplib::Server& server, SessionService& service) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
        const auto id = service.open_session(session_options_from_json(parse_body(req)));
        send_json(res, 201, {{"session_id", id}});
    }));

    server.Post(R"(/sessions/([^/]+)/events)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req);
                    std::vector<SourceDescriptor> sources;
                    for (const auto& s : body.value("sources", json::array())) {
                        sources.push_back(source_from_json(s));
                    }
                    std::vector<SensorReading> readings;
                    for (const auto& r : body.value("readings", json::array())) {
                        readings.push_back(reading_from_json(r));
                    }
                    const auto ack =
                        service.ingest_events(req.matches[1], std::move(readings), std::move(sources));
                    send_json(res, 200,
                              {{"accepted", ack.accepted},
                               {"tick_ts", ack.tick_ts ? json(*ack.tick_ts) : json(nullptr)},
                               {"sentence", ack.sentence}});
                }));

    server.Get(R"(/sessions/([^/]+)/context)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, to_json(service.current_context(req.matches[1])));
               }));

    server.Get(R"(/sessions/([^/]+)/recommendations)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   int n = 10;
                   if (req.has_param("n")) {
                       const auto raw = req.get_param_value("n");
                       std::size_t used = 0;
                       try {
                           n = std::stoi(raw, &used);
                       } catch (const std::exception&) {
                           used = 0;
                       }
                       if (used == 0 || used != raw.size()) {
                           throw ValidationError("n must be an integer");
                       }
                   }
                   send_json(res, 200, to_json(service.current_recommendations(req.matches[1], n)));
               }));

    server.Put(R"(/sessions/([^/]+)/weights)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   service.update_weights(req.matches[1], weights_from_json(parse_body(req)));
                   send_json(res, 200, {{"ok", true}});
               }));

    server.Post(R"(/sessions/([^/]+)/faults)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    service.inject_faults(req.matches[1], fault_plan_from_json(parse_body(req)));
                    send_json(res, 200, {{"ok", true}});
                }));

    server.Get(R"(/sessions/([^/]+)/config)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, config_to_json(service.config(req.matches[1])));
               }));

    server.Get("/catalog", guarded([&service](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, to_json(service.catalog()));
    }));
}

bool serve(SessionService& service, const std::string& host, int port) {
    httplib::Server server;
    install_routes(server, service);
    return server.listen(host, port);
}

}  // namespace ephemera
