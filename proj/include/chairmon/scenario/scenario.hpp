#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chairmon/hub/hub.hpp"

namespace chairmon::scenario {

enum class ActionKind { Login, Logout, SetPosture, DropFrames, ExpectState, ExpectCommand };

std::string_view to_string(ActionKind k) noexcept;

struct Action {
    double at = 0.0;  // virtual seconds from scenario start
    ActionKind kind = ActionKind::Login;
    ChairId chair = 1;
    std::string client = "client";

    // login / logout: check the appStatus reply.
    std::optional<bool> expect_success;

    // set_posture: built-in posture id or a full profile object.
    nlohmann::json posture;

    // drop_frames
    double duration = 0.0;

    // expect_state: `state` seen on appData within [at, at + within].
    // With within == 0 the latest state at `at` must match.
    SittingState state = SittingState::Green;
    double within = 0.0;

    // expect_command
    CommandKind command = CommandKind::Start;
};

struct Scenario {
    std::string name;
    std::vector<ChairId> chairs{1};
    std::uint64_t seed = 1;
    Timestamp epoch = 1601453768.0;  // virtual t = 0
    double duration = 0.0;           // 0: until the last expectation closes
    nlohmann::json hub;              // optional hub config overrides (thresholds, timeout)
    std::vector<Action> timeline;
};

/// Throws ConfigError for malformed scripts, non-decreasing time violations,
/// or expectations on chairs never logged in before.
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

struct RunOptions {
    std::optional<std::uint64_t> seed;  // overrides the script
    // Virtual seconds per wall-clock second; 0 runs unthrottled.
    double speed = 0.0;
    std::optional<std::filesystem::path> store_dir;
    double tick = 0.25;
};

struct ExpectationResult {
    std::size_t index = 0;  // position in the timeline
    std::string description;
    bool passed = false;
    std::string detail;  // expected vs observed on failure
};

struct ScenarioResult {
    bool passed = true;
    std::vector<ExpectationResult> expectations;
    std::vector<std::string> log;
    // Every appData payload in publish order, exactly as sent.
    std::vector<std::string> app_data;
    hub::HubStats hub_stats;
    double virtual_seconds = 0.0;

    int exit_code() const { return passed ? 0 : 1; }
};

ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& opts = {});

}  // namespace chairmon::scenario
