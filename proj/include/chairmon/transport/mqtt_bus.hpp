#pragma once

#include <atomic>
#include <map>
#include <thread>

#include "chairmon/transport/bus.hpp"

namespace chairmon::transport {

/// One MQTT 3.1.1 client session over plain TCP: CONNECT with credentials,
/// SUBSCRIBE at QoS 0, PUBLISH at QoS 0, PINGREQ keepalive.
class MqttConnection {
public:
    using Handler = std::function<void(std::string topic, std::string payload)>;

    /// Connects and waits for CONNACK. Throws BusError.
    MqttConnection(const MqttConfig& cfg, std::string client_id, Handler on_publish);
    ~MqttConnection();

    MqttConnection(const MqttConnection&) = delete;
    MqttConnection& operator=(const MqttConnection&) = delete;

    void publish(std::string_view topic, std::string_view payload);

    /// Blocks until SUBACK. Throws BusError on refusal or timeout.
    void subscribe(std::string_view filter);

    void close();
    bool connected() const { return connected_.load(); }

private:
    void send_packet(const std::string& bytes);
    void read_loop();
    void keepalive_loop();
    void fail(const std::string& why);

    MqttConfig cfg_;
    std::string client_id_;
    Handler on_publish_;
    int fd_ = -1;

    std::mutex write_mu_;
    std::mutex mu_;
    std::condition_variable ack_cv_;
    std::map<std::uint16_t, int> acks_;  // packet id -> 0 pending, 1 granted, -1 refused
    std::uint16_t packet_id_ = 0;
    std::string error_;

    std::atomic<bool> connected_{false};
    std::atomic<bool> stopping_{false};
    std::thread reader_;
    std::thread pinger_;
    std::mutex ping_mu_;
    std::condition_variable ping_cv_;
};

/// Bus backed by an external MQTT broker.
///
/// Publishes go out on one connection. Each distinct subscription filter gets
/// its own connection, so a message reaches every local subscription exactly
/// once even on brokers that send one copy per overlapping filter.
class MqttBus final : public Bus {
public:
    MqttBus(MqttConfig cfg, Clock clock = wall_clock);
    ~MqttBus() override;

    void publish(std::string_view topic, std::string payload) override;
    SubscriptionPtr subscribe(std::string_view filter, std::size_t capacity = kDefaultQueueCapacity) override;
    void unsubscribe(const SubscriptionPtr& sub) override;
    void shutdown() override;
    const std::string& client_id() const override { return cfg_.client_id; }

private:
    struct FilterLink {
        std::unique_ptr<MqttConnection> conn;
        std::vector<SubscriptionPtr> subs;
    };

    MqttConfig cfg_;
    Clock clock_;
    std::unique_ptr<MqttConnection> publisher_;

    // Lock order: sub_mu_ before mu_.
    std::mutex sub_mu_;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<FilterLink>> links_;
    std::uint32_t link_seq_ = 0;
    bool stopped_ = false;
};

}  // namespace chairmon::transport
