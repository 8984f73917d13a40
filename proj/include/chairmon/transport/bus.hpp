#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chairmon/core/model.hpp"

namespace chairmon::transport {

struct BusMessage {
    std::string topic;
    std::string payload;
    Timestamp published_at = 0.0;
};

using Clock = std::function<Timestamp()>;

Timestamp wall_clock();

inline constexpr std::size_t kDefaultQueueCapacity = 4096;

/// Throws ValidationError unless `topic` is a publishable topic name.
void validate_topic(std::string_view topic);

/// Throws ValidationError unless `filter` is a well-formed MQTT topic filter.
void validate_filter(std::string_view filter);

/// MQTT 3.1.1 filter semantics: `+` matches one level, a trailing `#` matches
/// the parent and any number of levels, wildcards never match `$`-topics at
/// the first level.
bool topic_matches(std::string_view filter, std::string_view topic);

/// A bounded delivery queue. When full the oldest message is dropped and
/// counted; producers never block.
class Subscription {
public:
    Subscription(std::string filter, std::size_t capacity);

    const std::string& filter() const noexcept { return filter_; }

    std::optional<BusMessage> try_pop();
    std::optional<BusMessage> pop_for(std::chrono::milliseconds timeout);
    std::vector<BusMessage> drain();

    std::size_t size() const;
    std::uint64_t dropped() const;
    bool closed() const;

    void deliver(BusMessage msg);
    void close();

private:
    const std::string filter_;
    const std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<BusMessage> queue_;
    std::uint64_t dropped_ = 0;
    bool closed_ = false;
};

using SubscriptionPtr = std::shared_ptr<Subscription>;

/// At-most-once publish/subscribe. Safe for concurrent use; each
/// Subscription is drained by a single consumer.
class Bus {
public:
    virtual ~Bus() = default;

    /// Throws BusError after shutdown, ValidationError for a bad topic.
    virtual void publish(std::string_view topic, std::string payload) = 0;

    /// Throws ValidationError for a malformed filter.
    virtual SubscriptionPtr subscribe(std::string_view filter, std::size_t capacity = kDefaultQueueCapacity) = 0;

    /// After return no further messages reach `sub`; it is closed.
    virtual void unsubscribe(const SubscriptionPtr& sub) = 0;

    virtual void shutdown() = 0;

    /// Identity of this connection as seen by peers.
    virtual const std::string& client_id() const = 0;
};

/// In-process broker. Every MemoryBus made by connect() shares the same
/// subscriber table, so peers see each other's publishes.
class MemoryBus final : public Bus {
public:
    explicit MemoryBus(Clock clock = wall_clock, std::string client_id = "memory");
    ~MemoryBus() override;

    /// A new client on the same broker.
    std::unique_ptr<MemoryBus> connect(std::string client_id) const;

    void publish(std::string_view topic, std::string payload) override;
    SubscriptionPtr subscribe(std::string_view filter, std::size_t capacity = kDefaultQueueCapacity) override;
    void unsubscribe(const SubscriptionPtr& sub) override;

    /// Closes this client's subscriptions; peers keep working.
    void shutdown() override;
    const std::string& client_id() const override { return client_id_; }

    /// Subscriptions across all clients of the broker.
    std::size_t subscriber_count() const;

private:
    struct Broker {
        Clock clock;
        std::mutex mu;
        std::vector<SubscriptionPtr> subs;
    };

    MemoryBus(std::shared_ptr<Broker> broker, std::string client_id);

    std::shared_ptr<Broker> broker_;
    std::string client_id_;
    std::vector<SubscriptionPtr> own_;  // guarded by broker_->mu
    bool running_ = true;               // guarded by broker_->mu
};

struct MqttConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;
    std::string username;
    std::string password;
    std::string client_id;
    std::uint16_t keepalive_secs = 30;
    std::chrono::milliseconds ack_timeout{5000};
};

/// Parse `mqtt://[user:pass@]host[:port]` into `base`. Throws ConfigError.
MqttConfig parse_mqtt_url(std::string_view url, MqttConfig base = {});

/// `memory` or `mqtt://...`. Throws ConfigError for anything else.
std::unique_ptr<Bus> make_bus(std::string_view url, const MqttConfig& mqtt_defaults = {}, Clock clock = wall_clock);

}  // namespace chairmon::transport
