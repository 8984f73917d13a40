#include "chairmon/core/session.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chairmon/core/errors.hpp"

namespace chairmon {

namespace {

std::int64_t whole_seconds(double s) { return static_cast<std::int64_t>(std::floor(s)); }

void push_history(ChairSession& st, Timestamp ts, int status) {
    if (!st.sitting_history.empty() && ts <= st.sitting_history.back().timestamp) {
        ts = std::nextafter(st.sitting_history.back().timestamp, std::numeric_limits<double>::infinity());
    }
    st.sitting_history.push_back({ts, status});
}

template <typename Proj>
double tail_mean(const std::deque<SampleStats>& window, std::size_t n, Proj proj) {
    n = std::min(n, window.size());
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (auto it = window.end() - static_cast<std::ptrdiff_t>(n); it != window.end(); ++it) acc += proj(*it);
    return acc / static_cast<double>(n);
}

}  // namespace

nlohmann::ordered_json to_json(const ChData& d) {
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto& h : d.sitting_history) {
        nlohmann::ordered_json e;
        e["timestamp"] = h.timestamp;
        e["sitting_status"] = h.sitting_status;
        hist.push_back(std::move(e));
    }
    nlohmann::ordered_json j;
    j["actual_sitting_state"] = std::string(to_string(d.actual_sitting_state));
    j["avg_deviation"] = d.avg_deviation;
    j["avg_back_deviation"] = d.avg_back_deviation;
    j["chair_id"] = d.chair_id;
    j["actual_sitting_time"] = d.actual_sitting_time;
    j["back_data_present"] = d.back_data_present;
    j["long_sitting"] = d.long_sitting;
    j["duration"] = d.duration;
    j["start_time"] = d.start_time;
    j["sitting_history"] = std::move(hist);
    j["actual_sitting_status"] = d.actual_sitting_status;
    return j;
}

ChData chdata_from_json(const nlohmann::json& j) {
    ChData d;
    auto state = parse_sitting_state(j.at("actual_sitting_state").get<std::string>());
    if (!state) throw ValidationError("actual_sitting_state", "unknown state");
    d.actual_sitting_state = *state;
    d.avg_deviation = j.at("avg_deviation").get<double>();
    d.avg_back_deviation = j.at("avg_back_deviation").get<double>();
    d.chair_id = j.at("chair_id").get<ChairId>();
    d.actual_sitting_time = j.at("actual_sitting_time").get<std::int64_t>();
    d.back_data_present = j.at("back_data_present").get<int>();
    d.long_sitting = j.at("long_sitting").get<int>();
    d.duration = j.at("duration").get<std::int64_t>();
    d.start_time = j.at("start_time").get<double>();
    for (const auto& e : j.at("sitting_history")) {
        d.sitting_history.push_back({e.at("timestamp").get<double>(), e.at("sitting_status").get<int>()});
    }
    d.actual_sitting_status = j.at("actual_sitting_status").get<int>();
    return d;
}

ChData ChairSession::snapshot() const {
    ChData d;
    d.actual_sitting_state = state;
    d.avg_deviation = avg_deviation;
    d.avg_back_deviation = avg_back_deviation;
    d.chair_id = chair_id;
    d.actual_sitting_time = whole_seconds(sitting_time);
    d.back_data_present = back_data_present ? 1 : 0;
    d.long_sitting = long_sitting ? 1 : 0;
    d.duration = whole_seconds(duration);
    d.start_time = start_time;
    d.sitting_history = sitting_history;
    d.actual_sitting_status = sitting ? 1 : 0;
    return d;
}

ChairSession open_session(ChairId chair_id, Timestamp now) {
    ChairSession s;
    s.chair_id = chair_id;
    s.start_time = now;
    s.state_log.emplace_back(now, SittingState::Green);
    return s;
}

ChData update_session(ChairSession& st, const PressureSample& sample, Timestamp now,
                      const Thresholds& th) {
    if (sample.chair_id != st.chair_id) {
        throw RoutingError("frame for chair " + std::to_string(sample.chair_id) + " routed to session of chair " +
                           std::to_string(st.chair_id));
    }
    const SampleStats stats = compute_sample_stats(sample, th);

    const Timestamp prev = st.last_update.value_or(st.start_time);
    double dt = now - prev;
    if (dt < 0.0) {
        if (st.last_update) ++st.diagnostics.non_monotonic;
        dt = 0.0;
    }
    if (st.sitting) st.sitting_time += dt;
    st.last_update = std::max(prev, now);

    st.stats_window.push_back(stats);
    st.window_times.push_back(now);
    while (st.stats_window.size() > th.presence_window) {
        st.stats_window.pop_front();
        st.window_times.pop_front();
    }

    // Nothing is evaluated until the occupancy window is full.
    if (st.stats_window.size() >= th.presence_window) {
        auto first_seated = std::find_if(st.stats_window.begin(), st.stats_window.end(),
                                         [&](const SampleStats& s) { return s.sum >= th.presence_sum; });
        const bool seated_now = first_seated != st.stats_window.end();

        if (!st.sitting && seated_now) {
            const auto idx = static_cast<std::size_t>(first_seated - st.stats_window.begin());
            const Timestamp sat_at = std::clamp(st.window_times[idx], st.start_time, *st.last_update);
            st.sitting = true;
            st.sitting_time = *st.last_update - sat_at;
            push_history(st, sat_at, 1);
        } else if (st.sitting && !seated_now) {
            // Leaving is dated to the first frame of the vacant run.
            const Timestamp left_at = std::max(st.window_times.front(), st.start_time);
            st.sitting = false;
            st.sitting_time = 0.0;
            push_history(st, left_at, 0);
        }

        const bool was_long = st.long_sitting;
        st.long_sitting = st.sitting && st.sitting_time >= th.long_sit_secs;
        if (st.long_sitting && !was_long) ++st.long_sitting_episodes;

        st.avg_deviation =
            tail_mean(st.stats_window, th.dispersion_window, [](const SampleStats& s) { return s.seat_dispersion; });
        st.avg_back_deviation =
            tail_mean(st.stats_window, th.dispersion_window, [](const SampleStats& s) { return s.back_dispersion; });
        st.back_data_present = st.stats_window.back().back_present;

        // A vacant chair shows green ("Free").
        const SittingState next =
            st.sitting ? classify(st.avg_deviation, st.back_data_present, st.long_sitting, th) : SittingState::Green;
        if (next == SittingState::Red && st.state != SittingState::Red) ++st.red_episodes;
        if (next != st.state) st.state_log.emplace_back(*st.last_update, next);
        st.state = next;
    }

    st.duration = *st.last_update - st.start_time;
    return st.snapshot();
}

}  // namespace chairmon
