#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "chairmon/core/session.hpp"

namespace chairmon {

/// Frame or keepalive published by a chair on chairPressureData.
struct PressureMsg {
    ChairId chair_id = 0;
    std::array<double, kSensors> data{};
    bool ping = false;
};

/// `{"chairId":N,"data":["6.04",...]}` with readings as 2-decimal strings.
std::string encode_pressure(ChairId chair, const std::array<double, kSensors>& readings);
std::string encode_ping(ChairId chair);

/// Accepts readings as strings or numbers. Throws ValidationError.
PressureMsg parse_pressure(std::string_view payload);

enum class LoginQuery { Login, Logout };

std::string_view to_string(LoginQuery q) noexcept;

struct LoginRequest {
    ChairId chair_id = 0;
    LoginQuery query = LoginQuery::Login;
    std::string client_id;
};

/// `{"chairId":1,"query":"login"}`; an optional "clientId" overrides `transport_client`.
LoginRequest parse_login(std::string_view payload, std::string_view transport_client);
std::string encode_login(const LoginRequest& req);

struct AppStatusMsg {
    ChairId chair_id = 0;
    std::string query;
    bool success = false;
    std::string client_id;
    std::string reason;  // empty on success
};

std::string encode(const AppStatusMsg& msg);
AppStatusMsg parse_app_status(std::string_view payload);

enum class CommandKind { Start, Stop };

std::string_view to_string(CommandKind c) noexcept;

struct ChairCommand {
    ChairId chair_id = 0;
    CommandKind command = CommandKind::Start;
};

std::string encode(const ChairCommand& cmd);

/// Accepts the JSON form or a bare "start"/"stop". nullopt for anything else.
std::optional<CommandKind> parse_command(std::string_view payload);

/// The per-frame message fanned out to clients on appData and the WebSocket.
struct AppDataMsg {
    ChairId chair_id = 0;
    std::array<double, kSensors> data{};
    double sum = 0.0;
    std::int64_t actual_time = 0;
    double avg = 0.0;
    double deviation = 0.0;
    ChData chdata;
};

nlohmann::ordered_json to_json(const AppDataMsg& msg);
std::string encode(const AppDataMsg& msg);
AppDataMsg parse_app_data(std::string_view payload);

}  // namespace chairmon
