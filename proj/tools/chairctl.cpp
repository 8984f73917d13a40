// chairctl: run the hub, simulated chairs, scenarios and store maintenance.
#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "chairmon/cli/commands.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
    using namespace chairmon::cli;

    CLI::App app{"Smart-chair posture hub and tools"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    HubOptions hub;
    auto* hub_cmd = app.add_subcommand("hub", "Run the hub");
    hub_cmd->add_option("--config", hub.config, "Hub config JSON")->check(CLI::ExistingFile);
    hub_cmd->add_option("--bus", hub.bus, "memory or mqtt://host:port")->capture_default_str();
    hub_cmd->add_option("--ws-port", hub.ws_port, "WebSocket/HTTP port, -1 to disable")->capture_default_str();
    hub_cmd->add_option("--ws-address", hub.ws_address, "Bind address")->capture_default_str();
    hub_cmd->add_option("--store-dir", hub.store_dir, "Persist samples and sessions here");
    hub_cmd->add_option("--speed", hub.speed, "Virtual seconds per wall second")->capture_default_str();
    hub_cmd->add_option("--sim", hub.sim_chairs, "Also simulate these chairs in-process")->delimiter(',');
    hub_cmd->add_option("--posture", hub.sim_posture, "Posture 1-9 for simulated chairs")->capture_default_str();
    hub_cmd->add_option("--seed", hub.seed, "Simulator seed")->capture_default_str();
    hub_cmd->add_option("--duration", hub.duration, "Stop after this many virtual seconds");

    SimOptions sim;
    auto* sim_cmd = app.add_subcommand("sim", "Run simulated chairs against a broker");
    sim_cmd->add_option("--chairs", sim.chairs, "Chair ids")->delimiter(',');
    sim_cmd->add_option("--posture", sim.posture, "Posture 1-9")->capture_default_str();
    sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
    sim_cmd->add_option("--rate", sim.rate, "Frames per second")->capture_default_str();
    sim_cmd->add_option("--bus", sim.bus)->capture_default_str();
    sim_cmd->add_option("--duration", sim.duration, "Stop after this many seconds");

    ScenarioOptions scen;
    std::uint64_t scen_seed = 0;
    auto* scen_cmd = app.add_subcommand("scenario", "Run a scripted scenario on a virtual clock");
    scen_cmd->add_option("file", scen.file, "Scenario JSON")->required();
    auto* seed_opt = scen_cmd->add_option("--seed", scen_seed, "Override the script's seed");
    scen_cmd->add_option("--speed", scen.speed, "Virtual seconds per wall second, 0 = unthrottled")
        ->capture_default_str();
    scen_cmd->add_option("--store-dir", scen.store_dir);
    scen_cmd->add_option("--bus", scen.bus)->capture_default_str();
    scen_cmd->add_flag("-v,--verbose", scen.verbose, "Print the event log");

    ReplayOptions replay;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run a stored day and print the appData stream");
    replay_cmd->add_option("--store-dir", replay.store_dir)->required();
    replay_cmd->add_option("--day", replay.day, "YYYY-MM-DD")->required();
    replay_cmd->add_option("--chair", replay.chair, "0 for every chair")->capture_default_str();
    replay_cmd->add_option("--config", replay.config, "Hub config for thresholds")->check(CLI::ExistingFile);

    ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Print a daily report");
    report_cmd->add_option("--store-dir", report.store_dir)->required();
    report_cmd->add_option("--day", report.day, "YYYY-MM-DD, default today (UTC)");
    report_cmd->add_option("--chair", report.chair, "0 for every chair")->capture_default_str();

    CompactOptions compact;
    auto* compact_cmd = app.add_subcommand("compact", "Drop raw samples older than N days");
    compact_cmd->add_option("--store-dir", compact.store_dir)->required();
    compact_cmd->add_option("--days", compact.keep_days)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    const auto level = spdlog::level::from_str(log_level);
    if (level == spdlog::level::off && log_level != "off") {
        std::cerr << "error: unknown log level '" << log_level << "'\n";
        return kConfigError;
    }
    // stdout carries command output (replay emits NDJSON); logs go to stderr.
    spdlog::set_default_logger(spdlog::stderr_color_mt("chairctl"));
    spdlog::set_level(level);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    if (*hub_cmd) return run_hub(hub, std::cout, std::cerr, g_stop);
    if (*sim_cmd) return run_sim(sim, std::cout, std::cerr, g_stop);
    if (*scen_cmd) {
        if (*seed_opt) scen.seed = scen_seed;
        return run_scenario_file(scen, std::cout, std::cerr);
    }
    if (*replay_cmd) return run_replay(replay, std::cout, std::cerr);
    if (*report_cmd) return run_report(report, std::cout, std::cerr);
    return run_compact(compact, std::cout, std::cerr);
}
