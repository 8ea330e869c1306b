// ephemera: scenario replay, dropout sweeps, and the HTTP service.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ephemera/errors.hpp"
#include "ephemera/io.hpp"
#include "ephemera/service.hpp"
#include "ephemera/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct ReplayArgs {
    std::string scenario;
    std::string catalog;
    std::string profile;
    std::string weights;
    std::string faults;
    std::string vocab;
    std::uint64_t seed = 42;
    int top_n = 10;
};

void add_replay_inputs(CLI::App& cmd, ReplayArgs& args) {
    cmd.add_option("--scenario", args.scenario, "Scenario file (line-delimited JSON)")->required();
    cmd.add_option("--catalog", args.catalog, "Track catalog (JSON)")->required();
    cmd.add_option("--profile", args.profile, "User profile (JSON)")->required();
    cmd.add_option("--weights", args.weights, "Hybrid weights (JSON); survey defaults otherwise");
    cmd.add_option("--faults", args.faults, "Fault plan (JSON)");
    cmd.add_option("--vocab", args.vocab, "Context vocabulary (JSON)");
    cmd.add_option("--seed", args.seed, "Seed for corruption randomness")->capture_default_str();
    cmd.add_option("--top-n", args.top_n, "Recommendations per tick")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

ephemera::ReplayConfig load_config(const ReplayArgs& args) {
    ephemera::ReplayConfig config;
    config.scenario = ephemera::load_scenario(args.scenario);
    config.catalog = ephemera::load_catalog(args.catalog);
    config.profile = ephemera::load_profile(args.profile);
    if (!args.vocab.empty()) config.vocab = ephemera::load_vocabulary(args.vocab);
    if (!args.weights.empty()) config.weights = ephemera::load_weights(args.weights);
    if (!args.faults.empty()) config.faults = ephemera::load_fault_plan(args.faults);
    config.seed = args.seed;
    config.top_n = args.top_n;
    return config;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value != nullptr && *value != '\0' ? std::string(value) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ephemeral-context music recommendation engine"};
    app.require_subcommand(1);

    ReplayArgs replay_args;
    std::string trace_out;
    std::string report_out;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a scenario and write trace + report");
    add_replay_inputs(*replay_cmd, replay_args);
    replay_cmd->add_option("--out", trace_out, "Trace output path")->required();
    replay_cmd->add_option("--report", report_out, "Metrics report output path")->required();

    ReplayArgs sweep_args;
    std::string out_dir;
    auto* sweep_cmd = app.add_subcommand("sweep", "Single-source dropout sweep");
    add_replay_inputs(*sweep_cmd, sweep_args);
    sweep_cmd->add_option("--out-dir", out_dir, "Directory for sweep reports")->required();

    int port = 8080;
    std::string host = "0.0.0.0";
    std::string catalog_path;
    std::string data_dir;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--port", port, "Listen port")->capture_default_str();
    serve_cmd->add_option("--host", host, "Listen address")->capture_default_str();
    serve_cmd->add_option("--catalog", catalog_path, "Catalog path (default $EPHEMERA_CATALOG)");
    serve_cmd->add_option("--data-dir", data_dir, "Persistence root (default $EPHEMERA_DATA_DIR)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*replay_cmd) {
            const auto result = ephemera::replay(load_config(replay_args));
            ephemera::emit_trace(result.trace, trace_out);
            ephemera::emit_report(result.report, report_out);
            std::cout << "ticks=" << result.report.ticks
                      << " distinct_contexts=" << result.report.distinct_contexts
                      << " availability=" << result.report.availability << '\n';
        } else if (*sweep_cmd) {
            const auto sweep = ephemera::dropout_sweep(load_config(sweep_args));
            std::error_code ec;
            std::filesystem::create_directories(out_dir, ec);
            if (ec) throw ephemera::IoError(out_dir, ec.message());
            const std::filesystem::path dir(out_dir);
            ephemera::emit_report(sweep, dir / "sweep.json");
            ephemera::emit_report(sweep.baseline, dir / "baseline.json");
            for (const auto& [source, report] : sweep.drops) {
                ephemera::emit_report(report, dir / ("drop_" + source + ".json"));
            }
            std::cout << "entries=" << sweep.size() << " written to " << out_dir << '\n';
        } else if (*serve_cmd) {
            if (catalog_path.empty()) catalog_path = env_or("EPHEMERA_CATALOG", "");
            if (catalog_path.empty()) {
                throw ephemera::ValidationError("no catalog: pass --catalog or set EPHEMERA_CATALOG");
            }
            if (data_dir.empty()) data_dir = env_or("EPHEMERA_DATA_DIR", "ephemera-data");
            auto catalog = ephemera::load_catalog(catalog_path);
            ephemera::SessionService service(
                std::move(catalog), std::make_shared<ephemera::JsonFileProfileStore>(data_dir));
            std::cout << "listening on " << host << ":" << port << std::endl;
            if (!ephemera::serve(service, host, port)) {
                std::cerr << "error: cannot listen on " << host << ":" << port << '\n';
                return kExitIo;
            }
        }
    } catch (const ephemera::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ephemera::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitOk;
}
