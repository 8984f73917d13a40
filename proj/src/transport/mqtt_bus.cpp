#include "chairmon/transport/mqtt_bus.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <random>

#include "chairmon/core/errors.hpp"

namespace chairmon::transport {

namespace {

enum PacketType : std::uint8_t {
    kConnect = 1,
    kConnack = 2,
    kPublish = 3,
    kSubscribe = 8,
    kSuback = 9,
    kPingreq = 12,
    kPingresp = 13,
    kDisconnect = 14,
};

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
}

void put_str(std::string& out, std::string_view s) {
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.append(s);
}

std::string frame(std::uint8_t header, const std::string& body) {
    std::string out;
    out.push_back(static_cast<char>(header));
    std::size_t len = body.size();
    do {
        std::uint8_t byte = len % 128;
        len /= 128;
        if (len > 0) byte |= 0x80;
        out.push_back(static_cast<char>(byte));
    } while (len > 0);
    out.append(body);
    return out;
}

bool read_exact(int fd, char* buf, std::size_t n) {
    while (n > 0) {
        const auto r = ::recv(fd, buf, n, 0);
        if (r == 0) return false;
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        buf += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

std::uint16_t get_u16(const std::string& s, std::size_t at) {
    return static_cast<std::uint16_t>((static_cast<std::uint8_t>(s[at]) << 8) | static_cast<std::uint8_t>(s[at + 1]));
}

std::string random_client_id() {
    std::random_device rd;
    std::uniform_int_distribution<std::uint32_t> dist;
    char buf[24];
    std::snprintf(buf, sizeof buf, "chairmon-%08x", dist(rd));
    return buf;
}

int connect_tcp(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw BusError("resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    for (auto* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw BusError("connect " + host + ":" + service + ": " + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

}  // namespace

MqttConnection::MqttConnection(const MqttConfig& cfg, std::string client_id, Handler on_publish)
    : cfg_(cfg), client_id_(std::move(client_id)), on_publish_(std::move(on_publish)) {
    fd_ = connect_tcp(cfg_.host, cfg_.port);

    std::string body;
    put_str(body, "MQTT");
    body.push_back(4);  // protocol level 3.1.1
    std::uint8_t flags = 0x02;  // clean session
    if (!cfg_.username.empty()) flags |= 0x80;
    if (!cfg_.password.empty()) flags |= 0x40;
    body.push_back(static_cast<char>(flags));
    put_u16(body, cfg_.keepalive_secs);
    put_str(body, client_id_);
    if (!cfg_.username.empty()) put_str(body, cfg_.username);
    if (!cfg_.password.empty()) put_str(body, cfg_.password);
    send_packet(frame(kConnect << 4, body));

    char hdr[4];
    if (!read_exact(fd_, hdr, 4) || static_cast<std::uint8_t>(hdr[0]) >> 4 != kConnack || hdr[1] != 2) {
        ::close(fd_);
        throw BusError("broker did not answer CONNECT with CONNACK");
    }
    if (hdr[3] != 0) {
        ::close(fd_);
        throw BusError("broker refused connection, return code " + std::to_string(static_cast<int>(hdr[3])));
    }
    connected_ = true;
    reader_ = std::thread([this] { read_loop(); });
    if (cfg_.keepalive_secs > 0) pinger_ = std::thread([this] { keepalive_loop(); });
}

MqttConnection::~MqttConnection() { close(); }

void MqttConnection::send_packet(const std::string& bytes) {
    std::lock_guard lock(write_mu_);
    const char* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
        const auto n = ::send(fd_, p, left, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw BusError(std::string("send: ") + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
}

void MqttConnection::publish(std::string_view topic, std::string_view payload) {
    if (stopping_ || !connected_) throw BusError("publish on a disconnected bus");
    std::string body;
    put_str(body, topic);
    body.append(payload);
    send_packet(frame(kPublish << 4, body));
}

void MqttConnection::subscribe(std::string_view filter) {
    if (stopping_ || !connected_) throw BusError("subscribe on a disconnected bus");
    std::uint16_t id = 0;
    {
        std::lock_guard lock(mu_);
        if (++packet_id_ == 0) packet_id_ = 1;
        id = packet_id_;
        acks_[id] = 0;
    }
    std::string body;
    put_u16(body, id);
    put_str(body, filter);
    body.push_back(0);  // QoS 0
    send_packet(frame((kSubscribe << 4) | 0x02, body));

    std::unique_lock lock(mu_);
    ack_cv_.wait_for(lock, cfg_.ack_timeout, [&] { return acks_[id] != 0 || !connected_; });
    const int result = acks_[id];
    acks_.erase(id);
    if (result == 1) return;
    if (result == -1) throw BusError("broker refused subscription to " + std::string(filter));
    throw BusError("no SUBACK from broker" + (error_.empty() ? "" : ": " + error_));
}

void MqttConnection::close() {
    if (stopping_.exchange(true)) return;
    if (connected_) {
        try {
            send_packet(frame(kDisconnect << 4, {}));
        } catch (const BusError&) {
        }
    }
    ::shutdown(fd_, SHUT_RDWR);
    ping_cv_.notify_all();
    if (reader_.joinable()) reader_.join();
    if (pinger_.joinable()) pinger_.join();
    ::close(fd_);
    connected_ = false;
}

void MqttConnection::fail(const std::string& why) {
    {
        std::lock_guard lock(mu_);
        if (error_.empty()) error_ = why;
    }
    connected_ = false;
    ack_cv_.notify_all();
}

void MqttConnection::read_loop() {
    std::string body;
    while (!stopping_) {
        char h = 0;
        if (!read_exact(fd_, &h, 1)) break;
        std::size_t len = 0;
        std::size_t mult = 1;
        for (int i = 0; i < 4; ++i) {
            char b = 0;
            if (!read_exact(fd_, &b, 1)) {
                fail("connection closed");
                return;
            }
            len += (static_cast<std::uint8_t>(b) & 0x7f) * mult;
            mult *= 128;
            if ((static_cast<std::uint8_t>(b) & 0x80) == 0) break;
        }
        body.resize(len);
        if (len > 0 && !read_exact(fd_, body.data(), len)) break;

        const auto type = static_cast<std::uint8_t>(h) >> 4;
        switch (type) {
            case kPublish: {
                if (len < 2) break;
                const auto tlen = get_u16(body, 0);
                std::size_t at = 2u + tlen;
                const int qos = (static_cast<std::uint8_t>(h) >> 1) & 0x03;
                if (qos > 0) at += 2;  // packet id; we only subscribe at QoS 0
                if (at > len) break;
                if (on_publish_) on_publish_(body.substr(2, tlen), body.substr(at));
                break;
            }
            case kSuback: {
                if (len < 3) break;
                const auto id = get_u16(body, 0);
                {
                    std::lock_guard lock(mu_);
                    if (auto it = acks_.find(id); it != acks_.end()) {
                        it->second = static_cast<std::uint8_t>(body[2]) == 0x80 ? -1 : 1;
                    }
                }
                ack_cv_.notify_all();
                break;
            }
            case kPingresp:
            default:
                break;
        }
    }
    fail("connection closed");
}

void MqttConnection::keepalive_loop() {
    const auto period = std::chrono::milliseconds(cfg_.keepalive_secs * 1000 / 2);
    std::unique_lock lock(ping_mu_);
    while (!stopping_) {
        if (ping_cv_.wait_for(lock, period, [&] { return stopping_.load(); })) break;
        if (!connected_) continue;
        try {
            send_packet(frame(kPingreq << 4, {}));
        } catch (const BusError& e) {
            fail(e.what());
        }
    }
}

MqttBus::MqttBus(MqttConfig cfg, Clock clock) : cfg_(std::move(cfg)), clock_(std::move(clock)) {
    if (cfg_.client_id.empty()) cfg_.client_id = random_client_id();
    publisher_ = std::make_unique<MqttConnection>(cfg_, cfg_.client_id, nullptr);
}

MqttBus::~MqttBus() { shutdown(); }

void MqttBus::publish(std::string_view topic, std::string payload) {
    validate_topic(topic);
    {
        std::lock_guard lock(mu_);
        if (stopped_) throw BusError("publish on a shut down bus");
    }
    publisher_->publish(topic, payload);
}

SubscriptionPtr MqttBus::subscribe(std::string_view filter, std::size_t capacity) {
    validate_filter(filter);
    auto sub = std::make_shared<Subscription>(std::string(filter), capacity);
    std::lock_guard sub_lock(sub_mu_);
    std::shared_ptr<FilterLink> link;
    std::uint32_t seq = 0;
    {
        std::lock_guard lock(mu_);
        if (stopped_) throw BusError("subscribe on a shut down bus");
        if (auto it = links_.find(sub->filter()); it != links_.end()) {
            it->second->subs.push_back(sub);
            return sub;
        }
        link = std::make_shared<FilterLink>();
        link->subs.push_back(sub);
        seq = ++link_seq_;
    }
    // Messages can only arrive after SUBACK, by which time the link is registered.
    std::weak_ptr<FilterLink> weak = link;
    link->conn = std::make_unique<MqttConnection>(
        cfg_, cfg_.client_id + "-s" + std::to_string(seq), [this, weak](std::string topic, std::string payload) {
            auto l = weak.lock();
            if (!l) return;
            BusMessage msg{std::move(topic), std::move(payload), clock_()};
            std::lock_guard lock(mu_);
            for (const auto& s : l->subs) s->deliver(msg);
        });
    {
        std::lock_guard lock(mu_);
        links_[sub->filter()] = link;
    }
    try {
        link->conn->subscribe(filter);
    } catch (...) {
        std::lock_guard lock(mu_);
        links_.erase(sub->filter());
        throw;
    }
    return sub;
}

void MqttBus::unsubscribe(const SubscriptionPtr& sub) {
    if (!sub) return;
    std::shared_ptr<FilterLink> retire;
    {
        std::lock_guard sub_lock(sub_mu_);
        std::lock_guard lock(mu_);
        if (auto it = links_.find(sub->filter()); it != links_.end()) {
            std::erase(it->second->subs, sub);
            if (it->second->subs.empty()) {
                retire = it->second;
                links_.erase(it);
            }
        }
    }
    sub->close();
    if (retire) retire->conn->close();
}

void MqttBus::shutdown() {
    std::map<std::string, std::shared_ptr<FilterLink>> links;
    {
        std::lock_guard sub_lock(sub_mu_);
        std::lock_guard lock(mu_);
        if (stopped_) return;
        stopped_ = true;
        links.swap(links_);
        for (auto& [f, l] : links) {
            for (auto& s : l->subs) s->close();
        }
    }
    for (auto& [f, l] : links) l->conn->close();
    publisher_->close();
}

}  // namespace chairmon::transport
