#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "chairmon/hub/hub.hpp"

namespace chairmon::web {

struct ServerOptions {
    std::string address = "127.0.0.1";
    std::uint16_t port = 0;  // 0 picks a free port
    // Frames queued per client before new ones are dropped for it.
    std::size_t max_queue = 256;
};

struct ServerStats {
    std::uint64_t connections = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_dropped = 0;
    std::uint64_t control_messages = 0;
};

/// WebSocket and HTTP front for the web client.
///
///   /ws/ch{ID}/appData   text frames, each appData payload as published on the bus
///   /ws/control          {"chairId":N,"query":"login"|"logout"} -> appStatus reply
///   GET /report?chair=N&day=YYYY-MM-DD
///   GET /chairs
///
/// Control connections log in under their own connection id. Closing the
/// socket logs out every chair it still owns.
class LiveServer : public hub::LiveSink {
public:
    LiveServer(hub::Hub& hub, ServerOptions opts = {});
    ~LiveServer() override;

    LiveServer(const LiveServer&) = delete;
    LiveServer& operator=(const LiveServer&) = delete;

    /// Bind, register with the hub and start the I/O thread. Throws std::system_error.
    void start();
    void stop();

    std::uint16_t port() const;
    ServerStats stats() const;
    std::size_t subscribers(ChairId chair) const;

    void broadcast(ChairId chair, const std::string& payload) override;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace chairmon::web
