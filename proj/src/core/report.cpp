#include "chairmon/core/report.hpp"

#include <algorithm>

namespace chairmon {

nlohmann::json to_json(const SessionRecord& r) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : r.sitting_history) {
        hist.push_back({{"timestamp", h.timestamp}, {"sitting_status", h.sitting_status}});
    }
    return {
        {"chairId", r.chair_id},
        {"start_time", r.start_time},
        {"end_time", r.end_time},
        {"sitting_history", std::move(hist)},
        {"totals",
         {{"green", r.state_seconds[0]}, {"orange", r.state_seconds[1]}, {"red", r.state_seconds[2]}}},
        {"long_sitting_episodes", r.long_sitting_episodes},
        {"red_episodes", r.red_episodes},
    };
}

SessionRecord session_record_from_json(const nlohmann::json& j) {
    SessionRecord r;
    r.chair_id = j.at("chairId").get<ChairId>();
    r.start_time = j.at("start_time").get<double>();
    r.end_time = j.at("end_time").get<double>();
    for (const auto& e : j.at("sitting_history")) {
        r.sitting_history.push_back({e.at("timestamp").get<double>(), e.at("sitting_status").get<int>()});
    }
    const auto& t = j.at("totals");
    r.state_seconds = {t.at("green").get<double>(), t.at("orange").get<double>(), t.at("red").get<double>()};
    r.long_sitting_episodes = j.value("long_sitting_episodes", 0u);
    r.red_episodes = j.value("red_episodes", 0u);
    return r;
}

nlohmann::json to_json(const Report& r) {
    return {
        {"sessions", r.sessions},
        {"total_duration", r.total_duration},
        {"total_seated", r.total_seated},
        {"green", r.state_seconds[0]},
        {"orange", r.state_seconds[1]},
        {"red", r.state_seconds[2]},
        {"longest_sit", r.longest_sit},
        {"red_episodes", r.red_episodes},
        {"long_sitting_episodes", r.long_sitting_episodes},
    };
}

std::vector<std::pair<Timestamp, Timestamp>> seated_intervals(std::span<const HistoryEntry> history,
                                                              Timestamp start, Timestamp end) {
    std::vector<std::pair<Timestamp, Timestamp>> out;
    std::optional<Timestamp> open;
    for (const auto& h : history) {
        const Timestamp t = std::clamp(h.timestamp, start, end);
        if (h.sitting_status == 1 && !open) {
            open = t;
        } else if (h.sitting_status == 0 && open) {
            out.emplace_back(*open, t);
            open.reset();
        }
    }
    if (open) out.emplace_back(*open, end);
    return out;
}

SessionRecord close_session(const ChairSession& s, Timestamp end) {
    SessionRecord r;
    r.chair_id = s.chair_id;
    r.start_time = s.start_time;
    r.end_time = std::max(end, s.last_update.value_or(s.start_time));
    r.sitting_history = s.sitting_history;
    r.long_sitting_episodes = s.long_sitting_episodes;
    r.red_episodes = s.red_episodes;

    // Intersect the state timeline with the seated intervals.
    const auto seated = seated_intervals(r.sitting_history, r.start_time, r.end_time);
    for (std::size_t i = 0; i < s.state_log.size(); ++i) {
        const Timestamp a = s.state_log[i].first;
        const Timestamp b = i + 1 < s.state_log.size() ? s.state_log[i + 1].first : r.end_time;
        auto& slot = r.state_seconds[static_cast<std::size_t>(severity(s.state_log[i].second))];
        for (auto [x, y] : seated) slot += std::max(0.0, std::min(b, y) - std::max(a, x));
    }
    return r;
}

Report daily_report(std::span<const SessionRecord> sessions) {
    Report rep;
    for (const auto& s : sessions) {
        ++rep.sessions;
        rep.total_duration += s.end_time - s.start_time;
        for (std::size_t i = 0; i < rep.state_seconds.size(); ++i) rep.state_seconds[i] += s.state_seconds[i];
        for (auto [a, b] : seated_intervals(s.sitting_history, s.start_time, s.end_time)) {
            rep.total_seated += b - a;
            rep.longest_sit = std::max(rep.longest_sit, b - a);
        }
        rep.red_episodes += s.red_episodes;
        rep.long_sitting_episodes += s.long_sitting_episodes;
    }
    return rep;
}

}  // namespace chairmon
