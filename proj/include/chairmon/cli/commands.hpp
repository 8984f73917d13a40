#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "chairmon/core/model.hpp"

namespace chairmon::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;
inline constexpr int kConfigError = 2;

struct HubOptions {
    std::optional<std::filesystem::path> config;
    std::string bus = "memory";
    int ws_port = 8080;  // negative disables the web server
    std::string ws_address = "127.0.0.1";
    std::optional<std::filesystem::path> store_dir;
    double speed = 1.0;
    // Chairs simulated in-process, attached to the same bus.
    std::vector<ChairId> sim_chairs;
    int sim_posture = 1;
    std::uint64_t seed = 1;
    double duration = 0.0;  // virtual seconds; 0 runs until stopped
};

struct SimOptions {
    std::vector<ChairId> chairs{1};
    int posture = 1;
    std::uint64_t seed = 1;
    double rate = 1.0;  // frames per second
    std::string bus = "mqtt://127.0.0.1:1883";
    double duration = 0.0;
};

struct ScenarioOptions {
    std::filesystem::path file;
    std::optional<std::uint64_t> seed;
    double speed = 0.0;
    std::optional<std::filesystem::path> store_dir;
    std::string bus = "memory";
    bool verbose = false;
};

struct ReplayOptions {
    std::filesystem::path store_dir;
    std::string day;
    ChairId chair = 0;  // 0: every chair in the store
    std::optional<std::filesystem::path> config;
};

struct ReportOptions {
    std::filesystem::path store_dir;
    std::string day;  // empty: today (UTC)
    ChairId chair = 0;
};

struct CompactOptions {
    std::filesystem::path store_dir;
    int keep_days = 30;
};

/// Each returns a process exit code. `stop` ends the long-running ones early.
int run_hub(const HubOptions& opts, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop);
int run_sim(const SimOptions& opts, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop);
int run_scenario_file(const ScenarioOptions& opts, std::ostream& out, std::ostream& err);
int run_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err);
int run_report(const ReportOptions& opts, std::ostream& out, std::ostream& err);
int run_compact(const CompactOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace chairmon::cli
