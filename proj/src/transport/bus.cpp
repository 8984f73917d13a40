#include "chairmon/transport/bus.hpp"

#include <algorithm>
#include <charconv>

#include "chairmon/core/errors.hpp"
#include "chairmon/transport/mqtt_bus.hpp"

namespace chairmon::transport {

Timestamp wall_clock() {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

void validate_topic(std::string_view topic) {
    if (topic.empty()) throw ValidationError("topic", "empty");
    if (topic.size() > 65535) throw ValidationError("topic", "too long");
    if (topic.find_first_of("+#") != std::string_view::npos) throw ValidationError("topic", "wildcards not allowed");
    if (topic.find('\0') != std::string_view::npos) throw ValidationError("topic", "contains NUL");
}

void validate_filter(std::string_view filter) {
    if (filter.empty()) throw ValidationError("filter", "empty");
    if (filter.size() > 65535) throw ValidationError("filter", "too long");
    if (filter.find('\0') != std::string_view::npos) throw ValidationError("filter", "contains NUL");
    std::size_t start = 0;
    while (true) {
        const auto end = filter.find('/', start);
        const auto level = filter.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        if (level.find_first_of("+#") != std::string_view::npos && level.size() != 1) {
            throw ValidationError("filter", "wildcard must occupy a whole level");
        }
        if (level == "#" && end != std::string_view::npos) throw ValidationError("filter", "'#' must be the last level");
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
}

bool topic_matches(std::string_view filter, std::string_view topic) {
    if (!topic.empty() && topic.front() == '$' && !filter.empty() && (filter.front() == '+' || filter.front() == '#')) {
        return false;
    }
    std::size_t fi = 0;
    std::size_t ti = 0;
    while (true) {
        const auto fe = filter.find('/', fi);
        const auto flevel = filter.substr(fi, fe == std::string_view::npos ? std::string_view::npos : fe - fi);
        if (flevel == "#") return true;
        const auto te = topic.find('/', ti);
        const auto tlevel = topic.substr(ti, te == std::string_view::npos ? std::string_view::npos : te - ti);
        if (flevel != "+" && flevel != tlevel) return false;

        const bool f_last = fe == std::string_view::npos;
        const bool t_last = te == std::string_view::npos;
        if (f_last && t_last) return true;
        if (t_last) {
            // "a/#" also matches "a".
            return filter.substr(fe + 1) == "#";
        }
        if (f_last) return false;
        fi = fe + 1;
        ti = te + 1;
    }
}

Subscription::Subscription(std::string filter, std::size_t capacity)
    : filter_(std::move(filter)), capacity_(std::max<std::size_t>(capacity, 1)) {}

std::optional<BusMessage> Subscription::try_pop() {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    auto m = std::move(queue_.front());
    queue_.pop_front();
    return m;
}

std::optional<BusMessage> Subscription::pop_for(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto m = std::move(queue_.front());
    queue_.pop_front();
    return m;
}

std::vector<BusMessage> Subscription::drain() {
    std::lock_guard lock(mu_);
    std::vector<BusMessage> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
}

std::size_t Subscription::size() const {
    std::lock_guard lock(mu_);
    return queue_.size();
}

std::uint64_t Subscription::dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

bool Subscription::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

void Subscription::deliver(BusMessage msg) {
    {
        std::lock_guard lock(mu_);
        if (closed_) return;
        if (queue_.size() >= capacity_) {
            queue_.pop_front();
            ++dropped_;
        }
        queue_.push_back(std::move(msg));
    }
    cv_.notify_one();
}

void Subscription::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

MemoryBus::MemoryBus(Clock clock, std::string client_id)
    : broker_(std::make_shared<Broker>()), client_id_(std::move(client_id)) {
    broker_->clock = std::move(clock);
}

MemoryBus::MemoryBus(std::shared_ptr<Broker> broker, std::string client_id)
    : broker_(std::move(broker)), client_id_(std::move(client_id)) {}

MemoryBus::~MemoryBus() { shutdown(); }

std::unique_ptr<MemoryBus> MemoryBus::connect(std::string client_id) const {
    return std::unique_ptr<MemoryBus>(new MemoryBus(broker_, std::move(client_id)));
}

void MemoryBus::publish(std::string_view topic, std::string payload) {
    validate_topic(topic);
    std::lock_guard lock(broker_->mu);
    if (!running_) throw BusError("publish on a shut down bus");
    const Timestamp at = broker_->clock();
    // Delivery under the lock keeps per-topic order identical for every subscriber.
    for (const auto& s : broker_->subs) {
        if (topic_matches(s->filter(), topic)) s->deliver(BusMessage{std::string(topic), payload, at});
    }
}

SubscriptionPtr MemoryBus::subscribe(std::string_view filter, std::size_t capacity) {
    validate_filter(filter);
    auto sub = std::make_shared<Subscription>(std::string(filter), capacity);
    std::lock_guard lock(broker_->mu);
    if (!running_) throw BusError("subscribe on a shut down bus");
    broker_->subs.push_back(sub);
    own_.push_back(sub);
    return sub;
}

void MemoryBus::unsubscribe(const SubscriptionPtr& sub) {
    if (!sub) return;
    std::lock_guard lock(broker_->mu);
    if (std::erase(own_, sub) == 0) return;
    std::erase(broker_->subs, sub);
    sub->close();
}

void MemoryBus::shutdown() {
    std::lock_guard lock(broker_->mu);
    running_ = false;
    for (auto& s : own_) {
        std::erase(broker_->subs, s);
        s->close();
    }
    own_.clear();
}

std::size_t MemoryBus::subscriber_count() const {
    std::lock_guard lock(broker_->mu);
    return broker_->subs.size();
}

MqttConfig parse_mqtt_url(std::string_view url, MqttConfig cfg) {
    constexpr std::string_view scheme = "mqtt://";
    if (!url.starts_with(scheme)) throw ConfigError("bus url must start with mqtt://");
    url.remove_prefix(scheme.size());
    if (auto at = url.rfind('@'); at != std::string_view::npos) {
        const auto creds = url.substr(0, at);
        const auto colon = creds.find(':');
        cfg.username = std::string(creds.substr(0, colon));
        if (colon != std::string_view::npos) cfg.password = std::string(creds.substr(colon + 1));
        url.remove_prefix(at + 1);
    }
    if (!url.empty() && url.back() == '/') url.remove_suffix(1);
    const auto colon = url.rfind(':');
    if (colon != std::string_view::npos) {
        const auto p = url.substr(colon + 1);
        unsigned port = 0;
        auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
        if (ec != std::errc{} || ptr != p.data() + p.size() || port == 0 || port > 65535) {
            throw ConfigError("bad port in bus url");
        }
        cfg.port = static_cast<std::uint16_t>(port);
        url = url.substr(0, colon);
    }
    if (url.empty()) throw ConfigError("missing host in bus url");
    cfg.host = std::string(url);
    return cfg;
}

std::unique_ptr<Bus> make_bus(std::string_view url, const MqttConfig& mqtt_defaults, Clock clock) {
    if (url == "memory") return std::make_unique<MemoryBus>(std::move(clock));
    if (url.starts_with("mqtt://")) return std::make_unique<MqttBus>(parse_mqtt_url(url, mqtt_defaults), std::move(clock));
    throw ConfigError("unknown bus '" + std::string(url) + "' (expected memory or mqtt://host:port)");
}

}  // namespace chairmon::transport
