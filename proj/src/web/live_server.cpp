#include "chairmon/web/live_server.hpp"

#include <atomic>
#include <charconv>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "chairmon/core/errors.hpp"

namespace chairmon::web {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::optional<ChairId> parse_id(std::string_view s) {
    ChairId id = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec != std::errc{} || p != s.data() + s.size() || id == 0) return std::nullopt;
    return id;
}

// "/ws/ch12/appData" -> 12
std::optional<ChairId> feed_chair(std::string_view path) {
    constexpr std::string_view head = "/ws/ch", tail = "/appData";
    if (path.size() <= head.size() + tail.size() || !path.starts_with(head) || !path.ends_with(tail)) {
        return std::nullopt;
    }
    return parse_id(path.substr(head.size(), path.size() - head.size() - tail.size()));
}

std::map<std::string, std::string, std::less<>> query_params(std::string_view q) {
    std::map<std::string, std::string, std::less<>> out;
    while (!q.empty()) {
        const auto amp = q.find('&');
        const auto kv = q.substr(0, amp);
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) out.emplace(std::string(kv), "");
        else out.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
        if (amp == std::string_view::npos) break;
        q.remove_prefix(amp + 1);
    }
    return out;
}

class WsSession;

}  // namespace

struct LiveServer::Impl {
    hub::Hub& hub;
    ServerOptions opts;
    asio::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::thread thread;
    bool running = false;

    mutable std::mutex mu;
    std::map<ChairId, std::set<std::shared_ptr<WsSession>>> feeds;

    std::atomic<std::uint64_t> connections{0}, frames_sent{0}, frames_dropped{0}, control_messages{0};
    std::atomic<std::uint64_t> next_conn{0};

    Impl(hub::Hub& h, ServerOptions o) : hub(h), opts(std::move(o)) {}

    void accept();
    void handle_http(tcp::socket sock);
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    enum class Kind { Feed, Control };

    WsSession(tcp::socket sock, LiveServer::Impl& srv, Kind kind, ChairId chair)
        : ws_(std::move(sock)), srv_(srv), kind_(kind), chair_(chair),
          id_("ws-" + std::to_string(++srv.next_conn)) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->opened();
        });
    }

    // Runs on the I/O thread.
    void send(std::shared_ptr<const std::string> payload) {
        if (closed_) return;
        if (queue_.size() >= srv_.opts.max_queue) {
            ++srv_.frames_dropped;
            return;
        }
        queue_.push_back(std::move(payload));
        if (queue_.size() == 1) write_next();
    }

private:
    void opened() {
        ++srv_.connections;
        if (kind_ == Kind::Feed) {
            std::lock_guard lock(srv_.mu);
            srv_.feeds[chair_].insert(shared_from_this());
        }
        read();
    }

    void read() {
        ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->closed();
            std::string msg = beast::buffers_to_string(self->buf_.data());
            self->buf_.consume(self->buf_.size());
            if (self->kind_ == Kind::Control) self->control(msg);
            self->read();
        });
    }

    void control(const std::string& msg) {
        ++srv_.control_messages;
        AppStatusMsg reply;
        try {
            auto req = parse_login(msg, id_);
            // The connection is the identity; a clientId in the body is ignored.
            req.client_id = id_;
            reply = srv_.hub.handle_app_login(req);
            if (reply.success) {
                if (req.query == LoginQuery::Login) owned_.insert(req.chair_id);
                else owned_.erase(req.chair_id);
            }
        } catch (const ValidationError&) {
            reply = srv_.hub.handle_login_payload(msg, id_);
        }
        send(std::make_shared<const std::string>(encode(reply)));
    }

    void write_next() {
        ws_.text(true);
        ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->closed();
            ++self->srv_.frames_sent;
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write_next();
        });
    }

    void closed() {
        if (closed_) return;
        closed_ = true;
        queue_.clear();
        if (kind_ == Kind::Feed) {
            std::lock_guard lock(srv_.mu);
            auto it = srv_.feeds.find(chair_);
            if (it != srv_.feeds.end()) it->second.erase(shared_from_this());
        }
        for (ChairId c : owned_) {
            try {
                srv_.hub.handle_app_login(LoginRequest{c, LoginQuery::Logout, id_});
            } catch (const std::exception& e) {
                spdlog::warn("web: logout on close of {} failed: {}", id_, e.what());
            }
        }
        owned_.clear();
    }

    websocket::stream<beast::tcp_stream> ws_;
    LiveServer::Impl& srv_;
    Kind kind_;
    ChairId chair_;
    std::string id_;
    beast::flat_buffer buf_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    std::set<ChairId> owned_;
    bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket sock, LiveServer::Impl& srv) : stream_(std::move(sock)), srv_(srv) {}

    void run() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            self->dispatch();
        });
    }

private:
    void dispatch() {
        const std::string_view target(req_.target().data(), req_.target().size());
        const auto qpos = target.find('?');
        const auto path = target.substr(0, qpos);

        if (websocket::is_upgrade(req_)) {
            if (path == "/ws/control") return upgrade(WsSession::Kind::Control, 0);
            if (auto c = feed_chair(path); c && srv_.hub.is_registered(*c)) {
                return upgrade(WsSession::Kind::Feed, *c);
            }
            return respond(http::status::not_found, R"({"error":"no such feed"})");
        }
        if (req_.method() != http::verb::get) {
            return respond(http::status::method_not_allowed, R"({"error":"GET only"})");
        }
        const auto params = query_params(qpos == std::string_view::npos ? "" : target.substr(qpos + 1));
        if (path == "/report") return report(params);
        if (path == "/chairs") return chairs();
        respond(http::status::not_found, R"({"error":"not found"})");
    }

    void upgrade(WsSession::Kind kind, ChairId chair) {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), srv_, kind, chair)->run(std::move(req_));
    }

    void report(const std::map<std::string, std::string, std::less<>>& params) {
        ChairId chair = 0;
        if (auto it = params.find("chair"); it != params.end() && it->second != "0") {
            auto c = parse_id(it->second);
            if (!c) return respond(http::status::bad_request, R"({"error":"bad chair"})");
            chair = *c;
        }
        std::string day = store::utc_day(srv_.hub.now());
        if (auto it = params.find("day"); it != params.end()) day = it->second;
        try {
            auto j = to_json(srv_.hub.report(chair, day));
            j["chair"] = chair;
            j["day"] = day;
            respond(http::status::ok, j.dump());
        } catch (const ValidationError& e) {
            respond(http::status::bad_request, nlohmann::json{{"error", e.what()}}.dump());
        } catch (const std::exception& e) {
            respond(http::status::internal_server_error, nlohmann::json{{"error", e.what()}}.dump());
        }
    }

    void chairs() {
        auto arr = nlohmann::json::array();
        for (const auto& c : srv_.hub.chairs()) {
            nlohmann::json j{{"chairId", c.chair_id}, {"occupied", c.occupied}};
            if (c.last_seen) j["lastSeen"] = *c.last_seen;
            arr.push_back(std::move(j));
        }
        respond(http::status::ok, arr.dump());
    }

    void respond(http::status status, std::string body) {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::content_type, "application/json");
        res->set(http::field::access_control_allow_origin, "*");
        res->keep_alive(false);
        res->body() = std::move(body);
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ec;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        });
    }

    beast::tcp_stream stream_;
    LiveServer::Impl& srv_;
    beast::flat_buffer buf_;
    http::request<http::string_body> req_;
};

}  // namespace

void LiveServer::Impl::accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
        if (ec) {
            if (ec != asio::error::operation_aborted) spdlog::warn("web: accept failed: {}", ec.message());
            if (!acceptor.is_open()) return;
        } else {
            handle_http(std::move(sock));
        }
        accept();
    });
}

void LiveServer::Impl::handle_http(tcp::socket sock) { std::make_shared<HttpSession>(std::move(sock), *this)->run(); }

LiveServer::LiveServer(hub::Hub& hub, ServerOptions opts) : impl_(std::make_unique<Impl>(hub, std::move(opts))) {}

LiveServer::~LiveServer() { stop(); }

void LiveServer::start() {
    auto& d = *impl_;
    if (d.running) return;
    const tcp::endpoint ep(asio::ip::make_address(d.opts.address), d.opts.port);
    d.acceptor.open(ep.protocol());
    d.acceptor.set_option(asio::socket_base::reuse_address(true));
    d.acceptor.bind(ep);
    d.acceptor.listen();
    d.accept();
    d.hub.add_sink(this);
    d.running = true;
    d.thread = std::thread([&d] { d.ioc.run(); });
    spdlog::info("web: listening on {}:{}", d.opts.address, port());
}

void LiveServer::stop() {
    auto& d = *impl_;
    if (!d.running) return;
    d.running = false;
    d.hub.remove_sink(this);
    d.ioc.stop();
    if (d.thread.joinable()) d.thread.join();
    beast::error_code ec;
    d.acceptor.close(ec);
    std::lock_guard lock(d.mu);
    d.feeds.clear();
}

std::uint16_t LiveServer::port() const {
    beast::error_code ec;
    const auto ep = impl_->acceptor.local_endpoint(ec);
    return ec ? 0 : ep.port();
}

ServerStats LiveServer::stats() const {
    const auto& d = *impl_;
    return {d.connections.load(), d.frames_sent.load(), d.frames_dropped.load(), d.control_messages.load()};
}

std::size_t LiveServer::subscribers(ChairId chair) const {
    std::lock_guard lock(impl_->mu);
    auto it = impl_->feeds.find(chair);
    return it == impl_->feeds.end() ? 0 : it->second.size();
}

void LiveServer::broadcast(ChairId chair, const std::string& payload) {
    auto& d = *impl_;
    std::vector<std::shared_ptr<WsSession>> targets;
    {
        std::lock_guard lock(d.mu);
        auto it = d.feeds.find(chair);
        if (it == d.feeds.end() || it->second.empty()) return;
        targets.assign(it->second.begin(), it->second.end());
    }
    auto shared = std::make_shared<const std::string>(payload);
    asio::post(d.ioc, [targets = std::move(targets), shared] {
        for (const auto& s : targets) s->send(shared);
    });
}

}  // namespace chairmon::web
