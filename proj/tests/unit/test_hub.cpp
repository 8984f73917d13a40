#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "chairmon/core/errors.hpp"
#include "chairmon/hub/hub.hpp"

using namespace chairmon;
using namespace chairmon::hub;
using namespace chairmon::transport;

namespace {

const bool kQuiet = [] {
    spdlog::set_level(spdlog::level::off);
    return true;
}();

const std::string kFrame = R"({"chairId":1,"data":["6.04","6.21","7.80","6.75","2.21","1.35"]})";

class RecordingStore : public store::Store {
public:
    void append_sample(const store::SampleRecord& rec) override {
        std::lock_guard lock(mu);
        if (fail_chair == rec.chair_id) throw StorageError("disk full");
        samples.push_back(rec);
    }
    void close_session(const SessionRecord& rec) override {
        std::lock_guard lock(mu);
        sessions_.push_back(rec);
    }
    std::vector<store::SampleRecord> query(ChairId, Timestamp, Timestamp) const override { return {}; }
    std::vector<SessionRecord> sessions(ChairId, std::string_view) const override {
        std::lock_guard lock(mu);
        return sessions_;
    }

    mutable std::mutex mu;
    std::vector<store::SampleRecord> samples;
    std::vector<SessionRecord> sessions_;
    ChairId fail_chair = 0;
};

class RecordingSink : public LiveSink {
public:
    void broadcast(ChairId chair, const std::string& payload) override {
        if (chair == fail_chair) throw std::runtime_error("socket gone");
        got.emplace_back(chair, payload);
    }
    std::vector<std::pair<ChairId, std::string>> got;
    ChairId fail_chair = 0;
};

struct Rig {
    double now = 1601453768.0;
    MemoryBus bus{[this] { return now; }};
    RecordingStore store;
    RecordingSink sink;
    SubscriptionPtr status = bus.subscribe(std::string(kTopicPrefix) + "+/appStatus");
    SubscriptionPtr shared_status = bus.subscribe(std::string(kTopicPrefix) + "appStatus");
    SubscriptionPtr commands = bus.subscribe(std::string(kTopicPrefix) + "+/sendingEnabled");
    SubscriptionPtr app_data = bus.subscribe(std::string(kTopicPrefix) + "+/appData");
    Hub hub;

    explicit Rig(std::vector<ChairId> chairs = {1, 2, 3})
        : hub(HubConfig{std::move(chairs), {}, 600.0}, bus, &store, [this] { return now; }) {
        hub.add_sink(&sink);
    }

    AppStatusMsg login(ChairId chair, const std::string& client) {
        return hub.handle_login_payload(encode_login({chair, LoginQuery::Login, client}), client);
    }
    AppStatusMsg logout(ChairId chair, const std::string& client) {
        return hub.handle_login_payload(encode_login({chair, LoginQuery::Logout, client}), client);
    }
    std::vector<std::pair<std::string, std::optional<CommandKind>>> drain_commands() {
        std::vector<std::pair<std::string, std::optional<CommandKind>>> out;
        for (auto& m : commands->drain()) out.emplace_back(m.topic, parse_command(m.payload));
        return out;
    }
    std::string frame(ChairId chair, std::array<double, 6> v) { return encode_pressure(chair, v); }
};

}  // namespace

TEST_CASE("login on a free chair starts it and opens a session") {
    Rig r;
    const auto st = r.login(1, "alice");
    CHECK(st.success);
    CHECK(st.reason.empty());
    const auto cmds = r.drain_commands();
    REQUIRE(cmds.size() == 1);
    CHECK(cmds[0].first == "qiot/things/Matuska/chairs/ch1/sendingEnabled");
    CHECK(cmds[0].second == CommandKind::Start);

    const auto replies = r.status->drain();
    REQUIRE(replies.size() == 1);
    CHECK(replies[0].topic == "qiot/things/Matuska/chairs/ch1/appStatus");
    const auto parsed = parse_app_status(replies[0].payload);
    CHECK(parsed.success);
    CHECK(parsed.query == "login");

    const auto c = r.hub.chair(1);
    REQUIRE(c);
    CHECK(c->occupied);
    CHECK(c->owner == "alice");
    CHECK(c->session_start == r.now);
    CHECK(r.hub.snapshot(1).has_value());
}

TEST_CASE("login on an occupied chair is refused without a command") {
    Rig r;
    REQUIRE(r.login(1, "alice").success);
    r.drain_commands();
    const auto st = r.login(1, "bob");
    CHECK_FALSE(st.success);
    CHECK(st.reason == "chair occupied");
    CHECK(r.drain_commands().empty());
    CHECK(r.hub.chair(1)->owner == "alice");
}

TEST_CASE("logout by the owner frees the chair for someone else") {
    Rig r;
    REQUIRE(r.login(1, "alice").success);
    r.now += 120;
    CHECK(r.logout(1, "alice").success);
    const auto cmds = r.drain_commands();
    REQUIRE(cmds.size() == 2);
    CHECK(cmds[1].second == CommandKind::Stop);
    CHECK_FALSE(r.hub.chair(1)->occupied);
    REQUIRE(r.store.sessions_.size() == 1);
    CHECK(r.store.sessions_[0].start_time == r.now - 120);
    CHECK(r.store.sessions_[0].end_time == r.now);

    CHECK(r.login(1, "bob").success);
    CHECK(r.hub.chair(1)->owner == "bob");
}

TEST_CASE("logout by a non-owner is refused") {
    Rig r;
    REQUIRE(r.login(2, "alice").success);
    r.drain_commands();
    const auto st = r.logout(2, "mallory");
    CHECK_FALSE(st.success);
    CHECK(st.reason == "not the owner");
    CHECK(r.drain_commands().empty());
    CHECK(r.hub.chair(2)->occupied);
    CHECK_FALSE(r.logout(3, "alice").success);
}

TEST_CASE("unknown chair and malformed payloads") {
    Rig r;
    const auto st = r.login(42, "alice");
    CHECK_FALSE(st.success);
    CHECK(st.reason == "unknown chair");

    const auto before = r.hub.chairs();
    const auto bad = r.hub.handle_login_payload(R"({"chairId":1,"query":"login")", "alice");
    CHECK_FALSE(bad.success);
    CHECK_FALSE(bad.reason.empty());
    CHECK(r.shared_status->drain().size() == 1);

    const auto bad_query = r.hub.handle_login_payload(R"({"chairId":1,"query":"sit"})", "alice");
    CHECK_FALSE(bad_query.success);
    CHECK(bad_query.chair_id == 1);

    const auto after = r.hub.chairs();
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].occupied == after[i].occupied);
    CHECK(r.drain_commands().empty());
    CHECK(r.hub.stats().malformed == 2);
}

TEST_CASE("the example frame sums to 30.36 in the stored record") {
    Rig r;
    r.hub.handle_pressure_payload(kFrame);
    REQUIRE(r.store.samples.size() == 1);
    const auto& rec = r.store.samples[0];
    CHECK(rec.sum == doctest::Approx(6.04 + 6.21 + 7.80 + 6.75 + 2.21 + 1.35).epsilon(1e-12));
    CHECK(std::abs(rec.sum - 30.36) < 1e-9);
    CHECK(rec.ts == r.now);
    CHECK_FALSE(rec.session);
}

TEST_CASE("frames for an occupied chair produce appData on both fan-outs") {
    Rig r;
    REQUIRE(r.login(1, "alice").success);
    const auto out = r.hub.handle_pressure_payload(kFrame);
    REQUIRE(out);
    const auto msgs = r.app_data->drain();
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0].topic == "qiot/things/Matuska/chairs/ch1/appData");
    const auto parsed = parse_app_data(msgs[0].payload);
    CHECK(parsed.chair_id == 1);
    CHECK(parsed.actual_time == 1601453768);
    CHECK(parsed.chdata.chair_id == 1);
    CHECK(parsed.chdata.start_time == r.now);
    CHECK(std::abs(parsed.sum - 30.36) < 1e-9);
    REQUIRE(r.sink.got.size() == 1);
    CHECK(r.sink.got[0].first == 1);
    CHECK(r.sink.got[0].second == msgs[0].payload);
    REQUIRE(r.store.samples.size() == 1);
    CHECK(r.store.samples[0].session == r.now);
}

TEST_CASE("frames for a free or unknown chair are stored but not classified") {
    Rig r;
    CHECK_FALSE(r.hub.handle_pressure_payload(kFrame));
    CHECK_FALSE(r.hub.handle_pressure_payload(r.frame(77, {1, 1, 1, 1, 1, 1})));
    CHECK(r.app_data->drain().empty());
    CHECK(r.sink.got.empty());
    CHECK(r.store.samples.size() == 2);
    CHECK(r.hub.stats().unclassified == 2);
}

TEST_CASE("malformed frames are counted and dropped") {
    Rig r;
    REQUIRE(r.login(1, "alice").success);
    r.hub.handle_pressure_payload("not json");
    r.hub.handle_pressure_payload(R"({"chairId":1,"data":["1","2"]})");
    r.hub.handle_pressure_payload(R"({"chairId":1,"data":["1","2","3","4","5","16"]})");
    r.hub.handle_pressure_payload(R"({"chairId":1,"data":["1","2","x","4","5","6"]})");
    CHECK(r.hub.stats().malformed == 4);
    CHECK(r.store.samples.empty());
    CHECK(r.app_data->drain().empty());
}

TEST_CASE("pings refresh liveness without producing data") {
    Rig r;
    REQUIRE(r.login(1, "alice").success);
    CHECK_FALSE(r.hub.chair(1)->last_seen);
    r.now += 5;
    r.hub.handle_pressure_payload(encode_ping(1));
    CHECK(r.hub.chair(1)->last_seen == r.now);
    CHECK(r.hub.stats().pings == 1);
    CHECK(r.app_data->drain().empty());
    CHECK(r.store.samples.empty());
}

TEST_CASE("silent sessions expire, stop the chair and are persisted") {
    Rig r;
    REQUIRE(r.login(1, "alice").success);
    REQUIRE(r.login(2, "bob").success);
    r.drain_commands();
    r.now += 300;
    r.hub.handle_pressure_payload(r.frame(2, {5, 5, 5, 5, 2, 2}));
    r.now += 299;
    CHECK(r.hub.expire_idle() == 0);
    r.now += 1;
    CHECK(r.hub.expire_idle() == 1);
    const auto cmds = r.drain_commands();
    REQUIRE(cmds.size() == 1);
    CHECK(cmds[0].first == topic_for(1, Channel::SendingEnabled));
    CHECK(cmds[0].second == CommandKind::Stop);
    CHECK_FALSE(r.hub.chair(1)->occupied);
    CHECK(r.hub.chair(2)->occupied);
    CHECK(r.store.sessions_.size() == 1);
    r.now += 300;
    CHECK(r.hub.expire_idle() == 1);
    CHECK(r.hub.stats().expired == 2);
}

TEST_CASE("the hub drains logins and frames from the bus in order") {
    Rig r;
    r.hub.start();
    r.bus.publish(topic_for(1, Channel::AppLogin), R"({"chairId":1,"query":"login","clientId":"alice"})");
    for (int i = 0; i < 3; ++i) r.bus.publish(topic_for(1, Channel::PressureData), kFrame);
    r.bus.publish(topic_for(1, Channel::AppLogin), R"({"chairId":1,"query":"logout","clientId":"alice"})");
    r.bus.publish(topic_for(1, Channel::PressureData), kFrame);
    CHECK(r.hub.pump() == 6);
    CHECK(r.app_data->drain().size() == 3);
    CHECK(r.store.samples.size() == 4);
    CHECK(r.store.sessions_.size() == 1);

    // Paper-format logins carry no identity and share one.
    r.bus.publish(topic_for(1, Channel::AppLogin), R"({"chairId":1,"query":"login"})");
    r.hub.pump();
    CHECK(r.hub.chair(1)->owner == "anonymous");
    r.bus.publish(topic_for(1, Channel::AppLogin), "{{{");
    r.hub.pump();
    CHECK(r.hub.chair(1)->occupied);
    CHECK(r.hub.stats().malformed == 1);
}

TEST_CASE("stop closes open sessions") {
    Rig r;
    REQUIRE(r.login(3, "alice").success);
    r.drain_commands();
    r.hub.stop();
    CHECK(r.store.sessions_.size() == 1);
    const auto cmds = r.drain_commands();
    REQUIRE(cmds.size() == 1);
    CHECK(cmds[0].second == CommandKind::Stop);
}

TEST_CASE("a failing sink or store for one chair leaves the other untouched") {
    Rig r;
    r.sink.fail_chair = 2;
    r.store.fail_chair = 2;
    REQUIRE(r.login(1, "alice").success);
    REQUIRE(r.login(2, "bob").success);
    for (int i = 0; i < 20; ++i) {
        r.now += 1;
        r.hub.handle_pressure_payload(r.frame(2, {5, 6, 5, 6, 2, 2}));
        r.hub.handle_pressure_payload(r.frame(1, {5, 6, 5, 6, 2, 2}));
    }
    std::size_t ch1 = 0;
    std::size_t ch2 = 0;
    for (const auto& m : r.app_data->drain()) (m.topic.find("/ch1/") != std::string::npos ? ch1 : ch2)++;
    CHECK(ch1 == 20);
    CHECK(ch2 == 20);  // the bus path for chair 2 still works
    CHECK(r.sink.got.size() == 20);
    for (const auto& [chair, _] : r.sink.got) CHECK(chair == 1);
    CHECK(r.store.samples.size() == 20);
    CHECK(r.hub.stats().sink_errors == 20);
    CHECK(r.hub.stats().storage_errors == 20);
    CHECK(r.hub.snapshot(1)->actual_sitting_status == 1);
    CHECK(r.hub.snapshot(2)->actual_sitting_status == 1);
}

TEST_CASE("property: appData only for open sessions and never more than frames") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        Rig r;
        std::map<ChairId, bool> open;
        std::size_t frames = 0;
        std::size_t expected = 0;
        std::uniform_int_distribution<int> op(0, 9);
        std::uniform_int_distribution<ChairId> chair(1, 4);
        for (int i = 0; i < 300; ++i) {
            r.now += 1;
            const ChairId c = chair(rng);
            const int o = op(rng);
            if (o == 0) {
                const bool ok = r.login(c, "u" + std::to_string(c)).success;
                CHECK(ok == (c <= 3 && !open[c]));
                if (ok) open[c] = true;
            } else if (o == 1) {
                const bool ok = r.logout(c, "u" + std::to_string(c)).success;
                CHECK(ok == open[c]);
                open[c] = false;
            } else {
                ++frames;
                if (open[c]) ++expected;
                r.hub.handle_pressure_payload(r.frame(c, {3, 4, 5, 6, 1, 1}));
            }
            for (const auto& s : r.hub.chairs()) CHECK(s.occupied == !s.owner.empty());
        }
        const auto sent = r.app_data->drain().size();
        CHECK(sent == expected);
        CHECK(sent <= frames);
        CHECK(r.sink.got.size() == expected);
    }
}

TEST_CASE("concurrent login races yield exactly one owner") {
    for (int round = 0; round < 25; ++round) {
        Rig r({1});
        std::atomic<int> holders{0};
        std::atomic<int> max_holders{0};
        std::atomic<int> wins{0};
        std::atomic<bool> go{false};
        std::vector<std::thread> threads;
        for (int t = 0; t < 8; ++t) {
            threads.emplace_back([&, t] {
                const std::string me = "client-" + std::to_string(t);
                while (!go) std::this_thread::yield();
                for (int k = 0; k < 50; ++k) {
                    if (!r.login(1, me).success) continue;
                    ++wins;
                    const int h = ++holders;
                    int prev = max_holders;
                    while (h > prev && !max_holders.compare_exchange_weak(prev, h)) {
                    }
                    CHECK(r.hub.chair(1)->owner == me);
                    --holders;
                    CHECK(r.logout(1, me).success);
                }
            });
        }
        go = true;
        for (auto& th : threads) th.join();
        CHECK(max_holders == 1);
        CHECK(wins >= 1);
        CHECK(r.store.sessions_.size() == static_cast<std::size_t>(wins.load()));
    }

    // A single simultaneous burst: exactly one success.
    Rig r({1});
    std::atomic<int> wins{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 16; ++t) {
        threads.emplace_back([&, t] {
            if (r.login(1, "c" + std::to_string(t)).success) ++wins;
        });
    }
    for (auto& th : threads) th.join();
    CHECK(wins == 1);
}

TEST_CASE("hub config") {
    const auto cfg = parse_hub_config(nlohmann::json::parse(R"({"chairs":[1,2,5],"thresholds":{"odt":2.5}})"));
    CHECK(cfg.chairs == std::vector<ChairId>{1, 2, 5});
    CHECK(cfg.thresholds.odt == 2.5);
    CHECK(cfg.thresholds.rdt == 6.8);
    CHECK(cfg.session_timeout_secs == 600.0);
    CHECK_THROWS_AS(parse_hub_config(nlohmann::json::parse(R"({"chairs":[]})")), ConfigError);
    CHECK_THROWS_AS(parse_hub_config(nlohmann::json::parse(R"({"chairs":[0]})")), ConfigError);
    CHECK_THROWS_AS(parse_hub_config(nlohmann::json::parse(R"({"chairs":[1,1]})")), ConfigError);
    CHECK_THROWS_AS(parse_hub_config(nlohmann::json::parse(R"({"chairs":[1],"thresholds":{"odt":9}})")),
                    ConfigError);
    CHECK_THROWS_AS(load_hub_config("/nonexistent/hub.json"), ConfigError);
}
