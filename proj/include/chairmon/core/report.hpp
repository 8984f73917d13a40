#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "chairmon/core/session.hpp"

namespace chairmon {

/// A closed session as persisted by the store.
struct SessionRecord {
    ChairId chair_id = 0;
    Timestamp start_time = 0.0;
    Timestamp end_time = 0.0;
    std::vector<HistoryEntry> sitting_history;
    // Seated seconds per state, indexed by severity(). Sums to the seated time.
    std::array<double, 3> state_seconds{};
    std::uint32_t long_sitting_episodes = 0;
    std::uint32_t red_episodes = 0;

    bool operator==(const SessionRecord&) const = default;
};

nlohmann::json to_json(const SessionRecord& r);
SessionRecord session_record_from_json(const nlohmann::json& j);

/// Close out a live session at `end`. A chair still occupied counts as seated up to `end`.
SessionRecord close_session(const ChairSession& session, Timestamp end);

struct Report {
    std::size_t sessions = 0;
    double total_duration = 0.0;
    double total_seated = 0.0;
    std::array<double, 3> state_seconds{};
    double longest_sit = 0.0;
    std::uint32_t red_episodes = 0;
    std::uint32_t long_sitting_episodes = 0;

    bool operator==(const Report&) const = default;
};

nlohmann::json to_json(const Report& r);

/// Seated intervals reconstructed from a transition history, clipped to [start, end].
std::vector<std::pair<Timestamp, Timestamp>> seated_intervals(std::span<const HistoryEntry> history,
                                                              Timestamp start, Timestamp end);

/// Aggregate a day's sessions. Empty input yields an empty report.
Report daily_report(std::span<const SessionRecord> sessions);

}  // namespace chairmon
