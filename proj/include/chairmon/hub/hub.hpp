#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chairmon/core/report.hpp"
#include "chairmon/hub/messages.hpp"
#include "chairmon/hub/topics.hpp"
#include "chairmon/store/store.hpp"
#include "chairmon/transport/bus.hpp"

namespace chairmon::hub {

struct HubConfig {
    std::vector<ChairId> chairs;
    Thresholds thresholds;
    // Sessions with no frames and no owner traffic for this long are closed.
    double session_timeout_secs = 600.0;
};

/// `{"chairs":[1,2], "thresholds":{...}, "session_timeout_secs":600}`. Throws ConfigError.
HubConfig parse_hub_config(const nlohmann::json& j);
HubConfig load_hub_config(const std::filesystem::path& path);

/// Second fan-out path for appData (the WebSocket server).
class LiveSink {
public:
    virtual ~LiveSink() = default;
    virtual void broadcast(ChairId chair, const std::string& payload) = 0;
};

struct HubStats {
    std::uint64_t frames = 0;
    std::uint64_t pings = 0;
    std::uint64_t malformed = 0;
    std::uint64_t unclassified = 0;  // frames for unknown or free chairs
    std::uint64_t app_data = 0;
    std::uint64_t storage_errors = 0;
    std::uint64_t sink_errors = 0;
    std::uint64_t processing_errors = 0;
    std::uint64_t expired = 0;
};

struct ChairStatus {
    ChairId chair_id = 0;
    bool occupied = false;
    std::string owner;
    std::optional<Timestamp> session_start;
    std::optional<Timestamp> last_seen;  // latest frame or ping from the chair
};

/// Chair registry plus the login and pressure-processing flows.
///
/// Every entry point takes one lock, so logins, logouts and frames are totally
/// ordered. Bus and sink delivery happen inside that order.
class Hub {
public:
    Hub(HubConfig cfg, transport::Bus& bus, store::Store* store = nullptr,
        transport::Clock clock = transport::wall_clock);
    ~Hub();

    Hub(const Hub&) = delete;
    Hub& operator=(const Hub&) = delete;

    /// Subscribe to the shared inbound topics.
    void start();

    /// Process everything queued on the bus, then expire idle sessions.
    /// Returns the number of messages handled.
    std::size_t pump();

    /// Like pump() but waits up to `timeout` for the first message.
    std::size_t pump_for(std::chrono::milliseconds timeout);

    /// Close and persist all open sessions, stop their chairs, unsubscribe.
    void stop();

    /// appLogin payload from `transport_client`. Replies on appStatus.
    AppStatusMsg handle_login_payload(std::string_view payload, std::string_view transport_client);
    AppStatusMsg handle_app_login(const LoginRequest& req);

    /// chairPressureData payload. Returns the appData fanned out, if any.
    std::optional<AppDataMsg> handle_pressure_payload(std::string_view payload);

    /// Closes sessions idle past the timeout. Returns how many.
    std::size_t expire_idle();

    void add_sink(LiveSink* sink);
    void remove_sink(LiveSink* sink);

    std::vector<ChairStatus> chairs() const;
    std::optional<ChairStatus> chair(ChairId id) const;
    bool is_registered(ChairId id) const;
    HubStats stats() const;

    /// Live snapshot of an open session.
    std::optional<ChData> snapshot(ChairId id) const;

    /// Daily report from the store; empty without one.
    Report report(ChairId chair, std::string_view day) const;

    const HubConfig& config() const { return cfg_; }
    Timestamp now() const { return clock_(); }

private:
    struct Slot {
        std::string owner;
        std::optional<ChairSession> session;
        Timestamp last_activity = 0.0;
        std::optional<Timestamp> last_seen;
    };

    AppStatusMsg login_locked(const LoginRequest& req, Timestamp now);
    void reply(const AppStatusMsg& msg);
    void command(ChairId chair, CommandKind kind);
    void close_locked(Slot& slot, ChairId chair, Timestamp now);
    std::size_t expire_locked(Timestamp now);
    void dispatch_locked(const transport::BusMessage& msg);
    std::optional<AppDataMsg> pressure_locked(std::string_view payload, Timestamp now);
    void store_sample(const store::SampleRecord& rec);

    HubConfig cfg_;
    transport::Bus& bus_;
    store::Store* store_;
    transport::Clock clock_;

    mutable std::mutex mu_;
    std::map<ChairId, Slot> slots_;
    std::vector<LiveSink*> sinks_;
    transport::SubscriptionPtr inbound_;
    HubStats stats_;
};

}  // namespace chairmon::hub
