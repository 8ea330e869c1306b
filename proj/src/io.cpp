#include "ephemera/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ephemera/errors.hpp"

namespace ephemera {

using nlohmann::json;

namespace {

void write_canonical(const json& v, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
    const std::string close_pad(static_cast<std::size_t>(depth) * 2, ' ');
    switch (v.type()) {
        case json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [key, item] : v.items()) {  // std::map: already sorted
                if (!first) out += ",\n";
                first = false;
                out += pad;
                out += json(key).dump(-1, ' ', false, json::error_handler_t::strict);
                out += ": ";
                write_canonical(item, depth + 1, out);
            }
            out += '\n';
            out += close_pad;
            out += '}';
            return;
        }
        case json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i > 0) out += ",\n";
                out += pad;
                write_canonical(v[i], depth + 1, out);
            }
            out += '\n';
            out += close_pad;
            out += ']';
            return;
        }
        case json::value_t::number_float: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", v.get<double>());
            std::string s = buf;
            if (s == "-0.000000") s = "0.000000";
            out += s;
            return;
        }
        default: out += v.dump(); return;
    }
}

template <class F>
auto with_path(const std::filesystem::path& path, F&& load) {
    try {
        return load();
    } catch (const ParseError& e) {
        throw ParseError(path.string(), e);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace

std::string canonical_json(const json& value) {
    std::string out;
    write_canonical(value, 0, out);
    out += '\n';
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), std::strerror(errno));
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError(path.string(), "read failed");
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), std::strerror(errno));
    out << content;
    out.flush();
    if (!out) throw IoError(path.string(), "write failed");
}

json read_json_file(const std::filesystem::path& path) {
    const auto text = read_file(path);
    return with_path(path, [&] { return json::parse(text); });
}

Scenario load_scenario(const std::filesystem::path& path) {
    const auto text = read_file(path);
    return with_path(path, [&] { return parse_scenario(text); });
}

Catalog load_catalog(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    return with_path(path, [&] { return catalog_from_json(j); });
}

UserProfile load_profile(const std::filesystem::path& path) {
    const auto text = read_file(path);
    return with_path(path, [&] {
        // Baseline order matters (the first one is the fallback), and json sorts
        // object keys on parse. Rewrite the object form as an array of pairs first.
        const auto ordered = nlohmann::ordered_json::parse(text);
        auto j = json::parse(text);
        if (ordered.is_object() && ordered.contains("activity_speed_baselines") &&
            ordered["activity_speed_baselines"].is_object()) {
            json pairs = json::array();
            for (const auto& [activity, kmh] : ordered["activity_speed_baselines"].items()) {
                pairs.push_back({activity, json::parse(kmh.dump())});
            }
            j["activity_speed_baselines"] = pairs;
        }
        return profile_from_json(j);
    });
}

HybridWeights load_weights(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    return with_path(path, [&] { return weights_from_json(j); });
}

FaultPlan load_fault_plan(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    return with_path(path, [&] { return fault_plan_from_json(j); });
}

ContextVocabulary load_vocabulary(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    return with_path(path, [&] { return vocabulary_from_json(j); });
}

}  // namespace ephemera
