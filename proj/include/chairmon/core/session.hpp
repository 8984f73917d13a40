#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include <json.hpp>

#include "chairmon/core/model.hpp"

namespace chairmon {

struct HistoryEntry {
    Timestamp timestamp = 0.0;
    int sitting_status = 0;

    bool operator==(const HistoryEntry&) const = default;
};

/// The `chdata` object streamed to clients with every frame.
struct ChData {
    SittingState actual_sitting_state = SittingState::Green;
    double avg_deviation = 0.0;
    double avg_back_deviation = 0.0;
    ChairId chair_id = 0;
    std::int64_t actual_sitting_time = 0;
    int back_data_present = 0;
    int long_sitting = 0;
    std::int64_t duration = 0;
    Timestamp start_time = 0.0;
    std::vector<HistoryEntry> sitting_history;
    int actual_sitting_status = 0;

    bool operator==(const ChData&) const = default;
};

/// Field order follows the wire example (not alphabetical).
nlohmann::ordered_json to_json(const ChData& d);
ChData chdata_from_json(const nlohmann::json& j);

struct SessionDiagnostics {
    std::uint64_t non_monotonic = 0;
};

/// Per-chair evaluation state between login and logout. Single owner; not thread-safe.
struct ChairSession {
    ChairId chair_id = 0;
    Timestamp start_time = 0.0;

    // Most recent frames, oldest first; capped at presence_window.
    std::deque<SampleStats> stats_window;
    std::deque<Timestamp> window_times;

    bool sitting = false;
    double sitting_time = 0.0;
    bool long_sitting = false;
    SittingState state = SittingState::Green;
    double avg_deviation = 0.0;
    double avg_back_deviation = 0.0;
    bool back_data_present = false;
    std::vector<HistoryEntry> sitting_history;
    double duration = 0.0;

    // Latest timestamp seen; arrival order is processed even when it regresses.
    std::optional<Timestamp> last_update;

    // State changes as (timestamp, new state); starts Green at start_time.
    std::vector<std::pair<Timestamp, SittingState>> state_log;
    std::uint32_t red_episodes = 0;
    std::uint32_t long_sitting_episodes = 0;

    SessionDiagnostics diagnostics;

    ChData snapshot() const;
};

ChairSession open_session(ChairId chair_id, Timestamp now);

/// Apply one frame. Mutates `state` and returns the post-update snapshot.
/// Throws RoutingError if the frame belongs to another chair.
ChData update_session(ChairSession& state, const PressureSample& sample, Timestamp now,
                      const Thresholds& thresholds);

}  // namespace chairmon
