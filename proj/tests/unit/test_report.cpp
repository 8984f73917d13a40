#include <doctest.h>

#include <random>

#include "chairmon/core/report.hpp"

using namespace chairmon;

namespace {

SessionRecord record(Timestamp start, Timestamp end, std::vector<HistoryEntry> hist, std::array<double, 3> totals) {
    SessionRecord r;
    r.chair_id = 1;
    r.start_time = start;
    r.end_time = end;
    r.sitting_history = std::move(hist);
    r.state_seconds = totals;
    return r;
}

}  // namespace

TEST_CASE("empty input gives an empty report") {
    const auto rep = daily_report({});
    CHECK(rep == Report{});
}

TEST_CASE("single green session") {
    const std::vector<SessionRecord> day{record(0, 600, {{0, 1}}, {600, 0, 0})};
    const auto rep = daily_report(day);
    CHECK(rep.state_seconds[0] == 600);
    CHECK(rep.state_seconds[1] == 0);
    CHECK(rep.state_seconds[2] == 0);
    CHECK(rep.longest_sit == 600);
    CHECK(rep.total_seated == 600);
}

TEST_CASE("interrupted sitting") {
    const double t0 = 1601453768.0;
    const std::vector<SessionRecord> day{record(t0, t0 + 300, {{t0, 1}, {t0 + 100, 0}, {t0 + 200, 1}}, {150, 50, 0})};
    const auto rep = daily_report(day);
    CHECK(rep.longest_sit == 100);
    CHECK(rep.total_seated == 200);
    CHECK(rep.total_duration == 300);
    CHECK(rep.state_seconds[0] + rep.state_seconds[1] + rep.state_seconds[2] == rep.total_seated);
}

TEST_CASE("reports are additive over sessions") {
    const auto a = record(0, 300, {{10, 1}, {110, 0}}, {70, 30, 0});
    auto b = record(1000, 1500, {{1000, 1}}, {100, 100, 300});
    b.red_episodes = 2;
    const std::vector<SessionRecord> both{a, b};
    const auto ra = daily_report(std::span(&a, 1));
    const auto rb = daily_report(std::span(&b, 1));
    const auto rab = daily_report(both);
    CHECK(rab.total_seated == ra.total_seated + rb.total_seated);
    CHECK(rab.total_duration == ra.total_duration + rb.total_duration);
    for (int i = 0; i < 3; ++i) CHECK(rab.state_seconds[i] == ra.state_seconds[i] + rb.state_seconds[i]);
    CHECK(rab.longest_sit == 500);
    CHECK(rab.red_episodes == 2);
    CHECK(rab.sessions == 2);
}

TEST_CASE("closing a live session splits the seated time across states") {
    Thresholds th;
    auto s = open_session(1, 50.0);
    PressureSample f;
    f.chair_id = 1;
    f.seat = {5.63, 5.70, 5.61, 5.51};
    f.back = {2.64, 5.71};
    for (int i = 0; i < 30; ++i) update_session(s, f, 51.0 + i, th);
    const auto rec = close_session(s, 100.0);
    CHECK(rec.end_time == 100.0);
    CHECK(session_record_from_json(to_json(rec)) == rec);

    // Seated from the first loaded frame at 51 until close at 100.
    const auto rep = daily_report(std::span(&rec, 1));
    CHECK(rep.total_seated == doctest::Approx(49.0));
    CHECK(rec.state_seconds[0] + rec.state_seconds[1] + rec.state_seconds[2] == doctest::Approx(49.0));
    // Still green before the window fills at 60, classified afterwards.
    const auto after = static_cast<std::size_t>(severity(s.state));
    CHECK(rec.state_seconds[after] >= doctest::Approx(40.0));
}

TEST_CASE("hand-built three-session day") {
    // Morning: seated 08:00-09:10 with a 10 min break at 08:30, 20 min of it red.
    const double d = 1601424000.0;  // 2020-09-30 00:00 UTC
    auto morning = record(d + 8 * 3600, d + 9 * 3600 + 600,
                          {{d + 8 * 3600, 1}, {d + 8 * 3600 + 1800, 0}, {d + 8 * 3600 + 2400, 1}},
                          {2400, 0, 1200});
    morning.red_episodes = 1;
    // Noon: logged in but never sat.
    const auto noon = record(d + 12 * 3600, d + 12 * 3600 + 300, {}, {0, 0, 0});
    // Afternoon: one 90 min sit that crossed the hour.
    auto afternoon = record(d + 14 * 3600, d + 15 * 3600 + 1800, {{d + 14 * 3600, 1}}, {3000, 600, 1800});
    afternoon.red_episodes = 1;
    afternoon.long_sitting_episodes = 1;

    const std::vector<SessionRecord> day{morning, noon, afternoon};
    const auto rep = daily_report(day);
    CHECK(rep.sessions == 3);
    CHECK(rep.total_duration == 4200 + 300 + 5400);
    CHECK(rep.total_seated == 1800 + 1800 + 5400);
    CHECK(rep.longest_sit == 5400);
    CHECK(rep.state_seconds[0] == 5400);
    CHECK(rep.state_seconds[1] == 600);
    CHECK(rep.state_seconds[2] == 3000);
    CHECK(rep.red_episodes == 2);
    CHECK(rep.long_sitting_episodes == 1);
}

TEST_CASE("property: closed-session state totals sum to the seated time") {
    Thresholds th;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> force(0.0, 15.0);
    std::bernoulli_distribution vacant(0.2), flip(0.05);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = open_session(3, 1000.0);
        bool empty = false;
        double t = 1000.0;
        for (int i = 0; i < 400; ++i) {
            if (flip(rng)) empty = !empty;
            PressureSample f;
            f.chair_id = 3;
            for (auto& v : f.seat) v = empty || vacant(rng) ? 0.0 : force(rng);
            for (auto& v : f.back) v = empty ? 0.0 : force(rng) / 3;
            t += 1.0;
            update_session(s, f, t, th);
        }
        const auto rec = close_session(s, t + 5.0);
        const auto rep = daily_report(std::span(&rec, 1));
        INFO("trial " << trial);
        CHECK(rec.state_seconds[0] + rec.state_seconds[1] + rec.state_seconds[2] == doctest::Approx(rep.total_seated));
        CHECK(rec.start_time <= rec.end_time);
    }
}
