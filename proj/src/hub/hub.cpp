#include "chairmon/hub/hub.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "chairmon/core/errors.hpp"

namespace chairmon::hub {

namespace {

constexpr std::string_view kReasonUnknown = "unknown chair";
constexpr std::string_view kReasonOccupied = "chair occupied";
constexpr std::string_view kReasonNotLoggedIn = "chair not logged in";
constexpr std::string_view kReasonNotOwner = "not the owner";

// Best effort: which chair a broken login payload was meant for.
std::optional<ChairId> sniff_chair(std::string_view payload) {
    const auto j = nlohmann::json::parse(payload, nullptr, false);
    if (!j.is_object()) return std::nullopt;
    auto it = j.find("chairId");
    if (it == j.end() || !it->is_number_unsigned()) return std::nullopt;
    const auto v = it->get<std::uint64_t>();
    if (v == 0 || v > UINT32_MAX) return std::nullopt;
    return static_cast<ChairId>(v);
}

}  // namespace

HubConfig parse_hub_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("hub config must be a JSON object");
    HubConfig cfg;
    try {
        for (const auto& c : j.at("chairs")) {
            if (!c.is_number_unsigned() || c.get<std::uint64_t>() == 0 || c.get<std::uint64_t>() > UINT32_MAX) {
                throw ConfigError("chair ids must be positive integers");
            }
            cfg.chairs.push_back(c.get<ChairId>());
        }
        if (auto t = j.find("thresholds"); t != j.end()) {
            auto& th = cfg.thresholds;
            th.odt = t->value("odt", th.odt);
            th.rdt = t->value("rdt", th.rdt);
            th.ocdt = t->value("ocdt", th.ocdt);
            th.presence_sum = t->value("presence_sum", th.presence_sum);
            th.long_sit_secs = t->value("long_sit_secs", th.long_sit_secs);
            th.presence_window = t->value("presence_window", th.presence_window);
            th.dispersion_window = t->value("dispersion_window", th.dispersion_window);
            th.back_eps = t->value("back_eps", th.back_eps);
        }
        cfg.session_timeout_secs = j.value("session_timeout_secs", cfg.session_timeout_secs);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("hub config: ") + e.what());
    }
    if (cfg.chairs.empty()) throw ConfigError("hub config lists no chairs");
    auto sorted = cfg.chairs;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("duplicate chair id");
    if (!(cfg.session_timeout_secs > 0.0)) throw ConfigError("session_timeout_secs must be positive");
    cfg.thresholds.validate();
    return cfg;
}

HubConfig load_hub_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string() + ": malformed JSON");
    return parse_hub_config(j);
}

Hub::Hub(HubConfig cfg, transport::Bus& bus, store::Store* store, transport::Clock clock)
    : cfg_(std::move(cfg)), bus_(bus), store_(store), clock_(std::move(clock)) {
    cfg_.thresholds.validate();
    for (ChairId id : cfg_.chairs) {
        if (id == 0) throw ConfigError("chair ids must be positive integers");
        slots_[id];
    }
}

Hub::~Hub() {
    try {
        stop();
    } catch (const std::exception& e) {
        spdlog::warn("hub stop: {}", e.what());
    }
}

void Hub::start() {
    std::lock_guard lock(mu_);
    if (inbound_) return;
    // One subscription keeps logins and frames in their arrival order;
    // `+` at this level matches appLogin and chairPressureData but not per-chair topics.
    inbound_ = bus_.subscribe(std::string(kTopicPrefix) + "+", 1 << 16);
}

std::size_t Hub::pump() {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    if (inbound_) {
        for (const auto& m : inbound_->drain()) {
            dispatch_locked(m);
            ++n;
        }
    }
    expire_locked(clock_());
    return n;
}

std::size_t Hub::pump_for(std::chrono::milliseconds timeout) {
    transport::SubscriptionPtr in;
    {
        std::lock_guard lock(mu_);
        in = inbound_;
    }
    if (!in) return pump();
    auto first = in->pop_for(timeout);
    std::size_t n = 0;
    if (first) {
        std::lock_guard lock(mu_);
        dispatch_locked(*first);
        ++n;
    }
    return n + pump();
}

void Hub::stop() {
    std::lock_guard lock(mu_);
    const Timestamp now = clock_();
    for (auto& [id, slot] : slots_) {
        if (!slot.session) continue;
        command(id, CommandKind::Stop);
        close_locked(slot, id, now);
    }
    if (inbound_) {
        try {
            bus_.unsubscribe(inbound_);
        } catch (const std::exception&) {
        }
        inbound_.reset();
    }
}

void Hub::dispatch_locked(const transport::BusMessage& msg) {
    const auto parsed = parse_topic(msg.topic);
    if (!parsed) return;
    try {
        if (parsed->channel == Channel::AppLogin) {
            // MQTT carries no sender identity; without a clientId field all
            // such clients share one.
            std::optional<LoginRequest> req;
            try {
                req = parse_login(msg.payload, "anonymous");
            } catch (const ValidationError& e) {
                ++stats_.malformed;
                AppStatusMsg r;
                r.chair_id = sniff_chair(msg.payload).value_or(0);
                r.query = "error";
                r.reason = e.what();
                reply(r);
                return;
            }
            reply(login_locked(*req, clock_()));
        } else if (parsed->channel == Channel::PressureData) {
            pressure_locked(msg.payload, clock_());
        }
    } catch (const std::exception& e) {
        ++stats_.processing_errors;
        spdlog::error("hub: {} on {}", e.what(), msg.topic);
    }
}

AppStatusMsg Hub::handle_login_payload(std::string_view payload, std::string_view transport_client) {
    std::lock_guard lock(mu_);
    AppStatusMsg r;
    try {
        const auto req = parse_login(payload, transport_client);
        r = login_locked(req, clock_());
    } catch (const ValidationError& e) {
        ++stats_.malformed;
        r.chair_id = sniff_chair(payload).value_or(0);
        r.query = "error";
        r.client_id = std::string(transport_client);
        r.reason = e.what();
    }
    reply(r);
    return r;
}

AppStatusMsg Hub::handle_app_login(const LoginRequest& req) {
    std::lock_guard lock(mu_);
    auto r = login_locked(req, clock_());
    reply(r);
    return r;
}

AppStatusMsg Hub::login_locked(const LoginRequest& req, Timestamp now) {
    AppStatusMsg r;
    r.chair_id = req.chair_id;
    r.query = std::string(to_string(req.query));
    r.client_id = req.client_id;

    auto it = slots_.find(req.chair_id);
    if (it == slots_.end()) {
        r.reason = kReasonUnknown;
        return r;
    }
    Slot& slot = it->second;
    if (req.query == LoginQuery::Login) {
        if (slot.session) {
            r.reason = kReasonOccupied;
            return r;
        }
        slot.owner = req.client_id;
        slot.session = open_session(req.chair_id, now);
        slot.last_activity = now;
        command(req.chair_id, CommandKind::Start);
        spdlog::info("chair {} logged in by {}", req.chair_id, req.client_id);
        r.success = true;
        return r;
    }

    if (!slot.session) {
        r.reason = kReasonNotLoggedIn;
        return r;
    }
    if (slot.owner != req.client_id) {
        r.reason = kReasonNotOwner;
        return r;
    }
    command(req.chair_id, CommandKind::Stop);
    close_locked(slot, req.chair_id, now);
    spdlog::info("chair {} logged out by {}", req.chair_id, req.client_id);
    r.success = true;
    return r;
}

void Hub::reply(const AppStatusMsg& msg) {
    // Replies go to the chair's status topic, which every listener on it sees.
    const std::string topic = msg.chair_id != 0 ? topic_for(msg.chair_id, Channel::AppStatus)
                                                : std::string(kTopicPrefix) + "appStatus";
    try {
        bus_.publish(topic, encode(msg));
    } catch (const BusError& e) {
        spdlog::warn("appStatus publish failed: {}", e.what());
    }
}

void Hub::command(ChairId chair, CommandKind kind) {
    try {
        bus_.publish(topic_for(chair, Channel::SendingEnabled), encode(ChairCommand{chair, kind}));
    } catch (const BusError& e) {
        spdlog::warn("sendingEnabled publish failed: {}", e.what());
    }
}

void Hub::close_locked(Slot& slot, ChairId chair, Timestamp now) {
    if (!slot.session) return;
    const auto rec = chairmon::close_session(*slot.session, now);
    slot.session.reset();
    slot.owner.clear();
    if (!store_) return;
    try {
        store_->close_session(rec);
    } catch (const std::exception& e) {
        ++stats_.storage_errors;
        spdlog::error("persisting session of chair {}: {}", chair, e.what());
    }
}

std::size_t Hub::expire_idle() {
    std::lock_guard lock(mu_);
    return expire_locked(clock_());
}

std::size_t Hub::expire_locked(Timestamp now) {
    std::size_t n = 0;
    for (auto& [id, slot] : slots_) {
        if (!slot.session || now - slot.last_activity < cfg_.session_timeout_secs) continue;
        spdlog::info("chair {} session expired after {:.0f} s of silence", id, now - slot.last_activity);
        command(id, CommandKind::Stop);
        close_locked(slot, id, now);
        ++stats_.expired;
        ++n;
    }
    return n;
}

std::optional<AppDataMsg> Hub::handle_pressure_payload(std::string_view payload) {
    std::lock_guard lock(mu_);
    return pressure_locked(payload, clock_());
}

std::optional<AppDataMsg> Hub::pressure_locked(std::string_view payload, Timestamp now) {
    PressureMsg msg;
    PressureSample sample;
    try {
        msg = parse_pressure(payload);
        if (msg.ping) {
            ++stats_.pings;
            if (auto it = slots_.find(msg.chair_id); it != slots_.end()) it->second.last_seen = now;
            return std::nullopt;
        }
        sample = PressureSample::from_readings(msg.chair_id, msg.data, now);
    } catch (const ValidationError& e) {
        ++stats_.malformed;
        spdlog::debug("dropping malformed frame: {}", e.what());
        return std::nullopt;
    }
    ++stats_.frames;

    const auto stats = compute_sample_stats(sample, cfg_.thresholds);
    store::SampleRecord rec;
    rec.chair_id = msg.chair_id;
    rec.data = msg.data;
    rec.sum = stats.sum;
    rec.ts = now;

    auto it = slots_.find(msg.chair_id);
    if (it == slots_.end() || !it->second.session) {
        ++stats_.unclassified;
        if (it != slots_.end()) it->second.last_seen = now;
        store_sample(rec);
        return std::nullopt;
    }
    Slot& slot = it->second;
    slot.last_seen = now;
    slot.last_activity = now;
    rec.session = slot.session->start_time;
    store_sample(rec);

    AppDataMsg out;
    out.chair_id = msg.chair_id;
    out.data = msg.data;
    out.sum = stats.sum;
    out.actual_time = static_cast<std::int64_t>(std::floor(now));
    out.avg = stats.seat_avg;
    out.deviation = stats.seat_dispersion;
    out.chdata = update_session(*slot.session, sample, now, cfg_.thresholds);

    // One encoding for both fan-outs keeps them byte-identical.
    const std::string wire = encode(out);
    try {
        bus_.publish(topic_for(msg.chair_id, Channel::AppData), wire);
    } catch (const BusError& e) {
        spdlog::warn("appData publish failed: {}", e.what());
    }
    for (auto* sink : sinks_) {
        try {
            sink->broadcast(msg.chair_id, wire);
        } catch (const std::exception& e) {
            ++stats_.sink_errors;
            spdlog::warn("live sink failed for chair {}: {}", msg.chair_id, e.what());
        }
    }
    ++stats_.app_data;
    return out;
}

void Hub::store_sample(const store::SampleRecord& rec) {
    if (!store_) return;
    try {
        store_->append_sample(rec);
    } catch (const std::exception& e) {
        // Persistence is best effort; live fan-out continues.
        ++stats_.storage_errors;
        spdlog::error("storing frame of chair {}: {}", rec.chair_id, e.what());
    }
}

void Hub::add_sink(LiveSink* sink) {
    std::lock_guard lock(mu_);
    if (std::find(sinks_.begin(), sinks_.end(), sink) == sinks_.end()) sinks_.push_back(sink);
}

void Hub::remove_sink(LiveSink* sink) {
    std::lock_guard lock(mu_);
    std::erase(sinks_, sink);
}

std::vector<ChairStatus> Hub::chairs() const {
    std::lock_guard lock(mu_);
    std::vector<ChairStatus> out;
    for (const auto& [id, slot] : slots_) {
        ChairStatus s;
        s.chair_id = id;
        s.occupied = slot.session.has_value();
        s.owner = slot.owner;
        if (slot.session) s.session_start = slot.session->start_time;
        s.last_seen = slot.last_seen;
        out.push_back(std::move(s));
    }
    return out;
}

std::optional<ChairStatus> Hub::chair(ChairId id) const {
    for (auto& s : chairs()) {
        if (s.chair_id == id) return s;
    }
    return std::nullopt;
}

bool Hub::is_registered(ChairId id) const {
    std::lock_guard lock(mu_);
    return slots_.count(id) > 0;
}

HubStats Hub::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

std::optional<ChData> Hub::snapshot(ChairId id) const {
    std::lock_guard lock(mu_);
    auto it = slots_.find(id);
    if (it == slots_.end() || !it->second.session) return std::nullopt;
    return it->second.session->snapshot();
}

Report Hub::report(ChairId chair, std::string_view day) const {
    if (!store_) return {};
    return store_->report(chair, day);
}

}  // namespace chairmon::hub
