// Acceptance suite: one PASS/FAIL line per criterion; exits 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "chairmon/core/model.hpp"
#include "chairmon/core/session.hpp"
#include "chairmon/hub/replay.hpp"
#include "chairmon/scenario/scenario.hpp"
#include "chairmon/sim/posture.hpp"
#include "chairmon/transport/bus.hpp"
#include "common/bus_conformance.hpp"
#include "unit/temp_dir.hpp"

using namespace chairmon;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Worked example: seat sensors from the published appData message.
constexpr double kWorkedTolerance = 1e-9;
constexpr std::array<double, 4> kWorkedSeat = {5.63, 5.70, 5.61, 5.51};
constexpr std::array<double, 2> kWorkedBack = {2.64, 5.71};
constexpr double kWorkedSum = 30.80;
constexpr double kWorkedAvg = 5.612500000000001;
constexpr double kWorkedDeviation = 0.00461875;

Outcome worked_example() {
    PressureSample s;
    s.chair_id = 1;
    s.seat = kWorkedSeat;
    s.back = kWorkedBack;
    const auto st = compute_sample_stats(s, Thresholds{});

    // Independent recomputation in extended precision.
    long double sum = 0, mean = 0, var = 0;
    for (double v : kWorkedSeat) mean += v;
    mean /= 4;
    for (double v : kWorkedSeat) var += (v - mean) * (v - mean);
    var /= 4;
    for (double v : kWorkedSeat) sum += v;
    for (double v : kWorkedBack) sum += v;

    const double e_sum = std::abs(st.sum - kWorkedSum);
    const double e_avg = std::abs(st.seat_avg - kWorkedAvg);
    const double e_dev = std::abs(st.seat_dispersion - kWorkedDeviation);
    const double e_oracle = std::max({std::abs(st.sum - double(sum)), std::abs(st.seat_avg - double(mean)),
                                      std::abs(st.seat_dispersion - double(var))});
    const double worst = std::max({e_sum, e_avg, e_dev, e_oracle});
    return {worst <= kWorkedTolerance,
            fmt::format("sum={:.10g} avg={:.10g} deviation={:.10g}; max error {:.2e} (tol {:.0e})", st.sum,
                        st.seat_avg, st.seat_dispersion, worst, kWorkedTolerance)};
}

// Rule table rows transcribed literally (strict comparisons). Where rows
// overlap (no backrest, ODT < d < RDT) the more severe one wins; the points
// no row covers get the documented boundary decisions.
SittingState rule_table(double d, bool back, bool long_sit, const Thresholds& t, int& rows_matched) {
    const bool green = d < t.odt && back;
    const bool orange = (d > t.odt && d < t.rdt) || (d > t.ocdt && d < t.odt && !back);
    const bool red = d > t.rdt || (d > t.odt && !back);
    rows_matched = int(green) + int(orange) + int(red);
    if (long_sit) return SittingState::Red;
    if (red) return SittingState::Red;
    if (orange) return SittingState::Orange;
    if (green) return SittingState::Green;
    // Uncovered: d == ODT, d == RDT, and d <= OCDT without backrest contact.
    if (d == t.rdt) return SittingState::Red;
    if (d == t.odt) return back ? SittingState::Orange : SittingState::Red;
    return SittingState::Orange;
}

Outcome rule_table_equivalence() {
    const Thresholds t;
    constexpr int kGrid = 10000;
    int disagreements = 0, overlaps = 0, points = 0;
    std::string first;
    for (int i = 0; i < kGrid; ++i) {
        const double d = i / 500.0;  // [0, 20) in steps of 0.002; hits 0.8, 3.0 and 6.8 exactly
        for (bool back : {false, true}) {
            for (bool ls : {false, true}) {
                ++points;
                int rows = 0;
                const auto want = rule_table(d, back, ls, t, rows);
                overlaps += rows > 1;
                const auto got = classify(d, back, ls, t);
                if (got != want) {
                    if (!disagreements++) {
                        first = fmt::format("; first at d={} back={} long={}: {} vs {}", d, back, ls, to_string(got),
                                            to_string(want));
                    }
                }
            }
        }
    }
    return {disagreements == 0,
            fmt::format("{} points, {} disagreements ({} points matched two rows, severe one taken){}", points,
                        disagreements, overlaps, first)};
}

PressureSample frame(double level) {
    PressureSample s;
    s.chair_id = 1;
    s.seat = {level, level, level, level};
    s.back = {level / 2, level / 2};
    return s;
}

Outcome hysteresis() {
    const Thresholds th;
    auto run = [&](int vacant, std::size_t& transitions_after) {
        auto s = open_session(1, 0.0);
        double t = 0;
        ChData d;
        for (int i = 0; i < 30; ++i) d = update_session(s, frame(5.0), t++, th);
        const auto before = d.sitting_history.size();
        for (int i = 0; i < vacant; ++i) d = update_session(s, frame(0.0), t++, th);
        transitions_after = d.sitting_history.size() - before;
        return d.actual_sitting_status;
    };
    std::size_t tr9 = 0, tr10 = 0;
    const int s9 = run(9, tr9);
    const int s10 = run(10, tr10);
    return {s9 == 1 && tr9 == 0 && s10 == 0 && tr10 == 1,
            fmt::format("9 vacant: status {} (+{} transitions); 10 vacant: status {} (+{} transitions)", s9, tr9, s10,
                        tr10)};
}

Outcome long_sitting() {
    const auto sc = scenario::parse_scenario(nlohmann::json::parse(R"({
      "chairs": [1], "seed": 5, "duration": 3700,
      "script": [{"at": 0, "action": "login", "chair": 1, "client": "a"}]})"));
    const auto t0 = Clock::now();
    const auto res = scenario::run_scenario(sc);
    const double wall = seconds_since(t0);

    int early = 0, late_wrong = 0, frames = 0;
    std::optional<std::int64_t> first_long;
    for (const auto& p : res.app_data) {
        const auto m = parse_app_data(p);
        const auto& c = m.chdata;
        ++frames;
        if (c.actual_sitting_time < 3600) {
            early += c.long_sitting != 0 || c.actual_sitting_state == SittingState::Red;
        } else {
            late_wrong += c.long_sitting != 1 || c.actual_sitting_state != SittingState::Red;
            if (!first_long && c.long_sitting) first_long = c.actual_sitting_time;
        }
    }
    const double accel = res.virtual_seconds / std::max(wall, 1e-9);
    const bool on_time = first_long && *first_long >= 3600 && *first_long <= 3601;
    return {on_time && early == 0 && late_wrong == 0 && wall < 5.0 && accel >= 1000.0,
            fmt::format("{} frames at 1 Hz; long_sitting first at {} s; early flags {}, missing after {}; "
                        "{:.2f} s wall ({:.0f}x)",
                        frames, first_long ? std::to_string(*first_long) : "never", early, late_wrong, wall, accel)};
}

// Mean seat variance per posture, from the published measurements.
constexpr std::array<double, 9> kTable3 = {0.266, 0.850, 3.758, 4.576, 3.431, 9.573, 6.865, 7.698, 7.959};
constexpr double kCalibrationTolerance = 0.15;

Outcome calibration() {
    std::string detail;
    bool ok = true;
    for (int posture = 1; posture <= 9; ++posture) {
        const auto profile = sim::default_profile(posture, 1000 + posture);
        sim::Rng rng(42 + posture);
        double total = 0;
        for (int i = 0; i < 1000; ++i) {
            const auto f = sim::generate_frame(profile, rng);
            double mean = 0, var = 0;
            for (double v : f.seat) mean += v / 4;
            for (double v : f.seat) var += (v - mean) * (v - mean) / 4;
            total += var;
        }
        const double m = total / 1000;
        const double rel = std::abs(m - kTable3[posture - 1]) / kTable3[posture - 1];
        ok = ok && rel <= kCalibrationTolerance;
        detail += fmt::format("{}{}:{:.3f}({:+.1f}%)", detail.empty() ? "" : " ", posture, m,
                              100 * (m - kTable3[posture - 1]) / kTable3[posture - 1]);
    }
    return {ok, detail};
}

constexpr const char* kDailyRoutine = R"({
  "name": "daily routine", "chairs": [1], "seed": 7,
  "script": [
    {"at": 0, "action": "login", "chair": 1, "client": "alice", "expect_success": true},
    {"at": 0, "action": "expect_command", "chair": 1, "command": "start"},
    {"at": 0, "action": "set_posture", "chair": 1, "posture": 1},
    {"at": 60, "action": "expect_state", "chair": 1, "state": "green"},
    {"at": 60, "action": "set_posture", "chair": 1, "posture": 8},
    {"at": 60, "action": "expect_state", "chair": 1, "state": "red", "within": 15},
    {"at": 80, "action": "login", "chair": 1, "client": "bob", "expect_success": false},
    {"at": 90, "action": "logout", "chair": 1, "client": "alice", "expect_success": true},
    {"at": 90, "action": "expect_command", "chair": 1, "command": "stop"},
    {"at": 95, "action": "login", "chair": 1, "client": "bob", "expect_success": true}
  ]})";

Outcome end_to_end() {
    const auto sc = scenario::parse_scenario(nlohmann::json::parse(kDailyRoutine));
    const auto t0 = Clock::now();
    const auto a = scenario::run_scenario(sc);
    const auto b = scenario::run_scenario(sc);
    const double wall = seconds_since(t0);

    // Posture 1 must also be green on every full-window frame before the switch.
    int green_frames = 0, other = 0;
    for (const auto& p : a.app_data) {
        const auto m = parse_app_data(p);
        const auto& c = m.chdata;
        if (m.actual_time >= sc.epoch + 15 && m.actual_time < sc.epoch + 60) {
            (c.actual_sitting_state == SittingState::Green ? green_frames : other)++;
        }
    }
    std::size_t passed = 0;
    std::string failed;
    for (const auto& e : a.expectations) {
        passed += e.passed;
        if (!e.passed) failed += "; " + e.description + ": " + e.detail;
    }
    const bool deterministic = a.log == b.log && a.app_data == b.app_data;
    return {a.passed && deterministic && other == 0 && wall < 10.0,
            fmt::format("{}/{} expectations, {} green frames in 15-60 s ({} not green), deterministic={}, "
                        "{:.3f} s wall for two runs{}",
                        passed, a.expectations.size(), green_frames, other, deterministic, wall, failed)};
}

Outcome replay_oracle() {
    TempDir dir;
    scenario::RunOptions opts;
    opts.store_dir = dir.path();
    const auto sc = scenario::parse_scenario(nlohmann::json::parse(R"({
      "chairs": [1, 2], "seed": 3,
      "script": [
        {"at": 0, "action": "login", "chair": 1, "client": "a"},
        {"at": 3, "action": "login", "chair": 2, "client": "b"},
        {"at": 40, "action": "set_posture", "chair": 1, "posture": 6},
        {"at": 50, "action": "set_posture", "chair": 2, "posture": 2},
        {"at": 70, "action": "drop_frames", "chair": 2, "duration": 15},
        {"at": 100, "action": "logout", "chair": 1, "client": "a"},
        {"at": 110, "action": "login", "chair": 1, "client": "c"},
        {"at": 200, "action": "logout", "chair": 2, "client": "b"}
      ]})"));
    const auto live = scenario::run_scenario(sc, opts);

    store::NdjsonOptions ro;
    ro.read_only = true;
    store::NdjsonStore st(dir.path(), ro);
    const auto [d0, d1] = store::day_bounds(store::utc_day(sc.epoch));
    hub::HubConfig cfg;
    cfg.chairs = {1, 2};

    std::size_t compared = 0, mismatched = 0, live_total = 0;
    for (ChairId chair : {1u, 2u}) {
        const auto replayed = hub::replay_samples(st.query(chair, d0, d1), cfg);
        std::vector<std::string> expected;
        for (const auto& p : live.app_data) {
            if (parse_app_data(p).chair_id == chair) expected.push_back(p);
        }
        live_total += expected.size();
        if (replayed.size() != expected.size()) {
            return {false, fmt::format("chair {}: {} replayed vs {} live snapshots", chair, replayed.size(),
                                       expected.size())};
        }
        for (std::size_t i = 0; i < replayed.size(); ++i, ++compared) mismatched += encode(replayed[i]) != expected[i];
    }
    return {compared > 0 && mismatched == 0 && compared == live_total,
            fmt::format("{} snapshots across 2 chairs and 3 sessions, {} differ byte-wise", compared, mismatched)};
}

class CountingChecker : public conformance::Checker {
public:
    void fail(const std::string& what) override {
        ++failures;
        if (first.empty()) first = what;
    }
    void pass() override { ++passes; }
    int failures = 0, passes = 0;
    std::string first;
};

std::string run_legs(const conformance::BusFactory& make, CountingChecker& c) {
    for (const auto& leg : conformance::kLegs) {
        try {
            leg.run(c, make);
        } catch (const std::exception& e) {
            c.fail(std::string(leg.name) + ": " + e.what());
        }
    }
    return fmt::format("{} checks, {} failed{}", c.passes + c.failures, c.failures,
                       c.first.empty() ? "" : " (" + c.first + ")");
}

Outcome transport_conformance() {
    transport::MemoryBus broker;
    int n = 0;
    CountingChecker mem;
    const auto mem_detail = run_legs([&] { return broker.connect("client-" + std::to_string(++n)); }, mem);

    std::string mqtt_detail = "skipped (CHAIRMON_MQTT_URL not set)";
    bool mqtt_ok = true;
    if (const char* url = std::getenv("CHAIRMON_MQTT_URL")) {
        CountingChecker mq;
        const std::string u = url;
        mqtt_detail = run_legs([u] { return transport::make_bus(u); }, mq);
        mqtt_ok = mq.failures == 0;
    }
    return {mem.failures == 0 && mqtt_ok, "memory: " + mem_detail + "; mqtt: " + mqtt_detail};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::off);
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"worked-example", worked_example},
        {"rule-table-equivalence", rule_table_equivalence},
        {"occupancy-hysteresis", hysteresis},
        {"long-sitting", long_sitting},
        {"simulator-calibration", calibration},
        {"end-to-end-scenario", end_to_end},
        {"replay-oracle", replay_oracle},
        {"transport-conformance", transport_conformance},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %-24s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
