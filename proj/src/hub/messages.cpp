#include "chairmon/hub/messages.hpp"

#include <cmath>
#include <cstdio>

#include "chairmon/core/errors.hpp"

namespace chairmon {

namespace {

nlohmann::json parse_object(std::string_view payload) {
    auto j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded()) throw ValidationError("payload", "malformed JSON");
    if (!j.is_object()) throw ValidationError("payload", "expected a JSON object");
    return j;
}

ChairId parse_chair_id(const nlohmann::json& j) {
    auto it = j.find("chairId");
    if (it == j.end()) throw ValidationError("chairId", "missing");
    if (it->is_number_unsigned() && it->get<std::uint64_t>() >= 1 && it->get<std::uint64_t>() <= UINT32_MAX) {
        return it->get<ChairId>();
    }
    if (it->is_number_integer() || it->is_number_float()) throw ValidationError("chairId", "must be a positive integer");
    throw ValidationError("chairId", "must be a number");
}

double parse_reading(const nlohmann::json& v, std::size_t idx) {
    const std::string field = "data[" + std::to_string(idx) + "]";
    double x = 0.0;
    if (v.is_number()) {
        x = v.get<double>();
    } else if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        std::size_t used = 0;
        try {
            x = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ValidationError(field, "not a number: '" + s + "'");
        }
        if (used != s.size()) throw ValidationError(field, "trailing characters in '" + s + "'");
    } else {
        throw ValidationError(field, "expected string or number");
    }
    if (!std::isfinite(x)) throw ValidationError(field, "not finite");
    if (x < 0.0 || x > kMaxForce) throw ValidationError(field, "outside [0, 15]");
    return x;
}

std::string two_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string encode_pressure(ChairId chair, const std::array<double, kSensors>& readings) {
    nlohmann::ordered_json j;
    j["chairId"] = chair;
    auto arr = nlohmann::ordered_json::array();
    for (double r : readings) arr.push_back(two_decimals(r));
    j["data"] = std::move(arr);
    return j.dump();
}

std::string encode_ping(ChairId chair) {
    nlohmann::ordered_json j;
    j["chairId"] = chair;
    j["ping"] = true;
    return j.dump();
}

PressureMsg parse_pressure(std::string_view payload) {
    const auto j = parse_object(payload);
    PressureMsg m;
    m.chair_id = parse_chair_id(j);
    if (j.value("ping", false) && !j.contains("data")) {
        m.ping = true;
        return m;
    }
    auto it = j.find("data");
    if (it == j.end() || !it->is_array()) throw ValidationError("data", "missing or not an array");
    if (it->size() != kSensors) throw ValidationError("data", "expected 6 readings, got " + std::to_string(it->size()));
    for (std::size_t i = 0; i < kSensors; ++i) m.data[i] = parse_reading((*it)[i], i);
    return m;
}

std::string_view to_string(LoginQuery q) noexcept { return q == LoginQuery::Login ? "login" : "logout"; }

LoginRequest parse_login(std::string_view payload, std::string_view transport_client) {
    const auto j = parse_object(payload);
    LoginRequest r;
    r.chair_id = parse_chair_id(j);
    auto q = j.find("query");
    if (q == j.end() || !q->is_string()) throw ValidationError("query", "missing");
    if (*q == "login") {
        r.query = LoginQuery::Login;
    } else if (*q == "logout") {
        r.query = LoginQuery::Logout;
    } else {
        throw ValidationError("query", "must be login or logout");
    }
    auto c = j.find("clientId");
    if (c != j.end() && c->is_string() && !c->get_ref<const std::string&>().empty()) {
        r.client_id = c->get<std::string>();
    } else {
        r.client_id = std::string(transport_client);
    }
    return r;
}

std::string encode_login(const LoginRequest& req) {
    nlohmann::ordered_json j;
    j["chairId"] = req.chair_id;
    j["query"] = std::string(to_string(req.query));
    if (!req.client_id.empty()) j["clientId"] = req.client_id;
    return j.dump();
}

std::string encode(const AppStatusMsg& msg) {
    nlohmann::ordered_json j;
    j["chairId"] = msg.chair_id;
    j["query"] = msg.query;
    j["success"] = msg.success;
    if (!msg.client_id.empty()) j["clientId"] = msg.client_id;
    if (!msg.reason.empty()) j["reason"] = msg.reason;
    return j.dump();
}

AppStatusMsg parse_app_status(std::string_view payload) {
    const auto j = parse_object(payload);
    AppStatusMsg m;
    m.chair_id = j.value("chairId", ChairId{0});
    m.query = j.value("query", std::string{});
    m.success = j.at("success").get<bool>();
    m.client_id = j.value("clientId", std::string{});
    m.reason = j.value("reason", std::string{});
    return m;
}

std::string_view to_string(CommandKind c) noexcept { return c == CommandKind::Start ? "start" : "stop"; }

std::string encode(const ChairCommand& cmd) {
    nlohmann::ordered_json j;
    j["chairId"] = cmd.chair_id;
    j["command"] = std::string(to_string(cmd.command));
    return j.dump();
}

std::optional<CommandKind> parse_command(std::string_view payload) {
    std::string_view word = payload;
    std::string holder;
    auto j = nlohmann::json::parse(payload, nullptr, false);
    if (!j.is_discarded()) {
        if (j.is_object() && j.contains("command") && j["command"].is_string()) {
            holder = j["command"].get<std::string>();
        } else if (j.is_string()) {
            holder = j.get<std::string>();
        } else {
            return std::nullopt;
        }
        word = holder;
    }
    if (word == "start") return CommandKind::Start;
    if (word == "stop") return CommandKind::Stop;
    return std::nullopt;
}

nlohmann::ordered_json to_json(const AppDataMsg& msg) {
    nlohmann::ordered_json j;
    j["chairId"] = msg.chair_id;
    j["data"] = msg.data;
    j["sum"] = msg.sum;
    j["actual_time"] = msg.actual_time;
    j["avg"] = msg.avg;
    j["deviation"] = msg.deviation;
    j["chdata"] = to_json(msg.chdata);
    return j;
}

std::string encode(const AppDataMsg& msg) { return to_json(msg).dump(); }

AppDataMsg parse_app_data(std::string_view payload) {
    const auto j = parse_object(payload);
    AppDataMsg m;
    m.chair_id = parse_chair_id(j);
    const auto& data = j.at("data");
    if (!data.is_array() || data.size() != kSensors) throw ValidationError("data", "expected 6 readings");
    for (std::size_t i = 0; i < kSensors; ++i) m.data[i] = parse_reading(data[i], i);
    m.sum = j.at("sum").get<double>();
    m.actual_time = j.at("actual_time").get<std::int64_t>();
    m.avg = j.at("avg").get<double>();
    m.deviation = j.at("deviation").get<double>();
    m.chdata = chdata_from_json(j.at("chdata"));
    return m;
}

}  // namespace chairmon
