#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chairmon/core/model.hpp"
#include "chairmon/sim/posture.hpp"

namespace chairmon::sim {

enum class FirmwarePhase { Disconnected, Connecting, Idle, Measuring };

std::string_view to_string(FirmwarePhase p) noexcept;

inline constexpr double kReconnectDelay = 5.0;

struct FirmwareDiagnostics {
    std::uint64_t unknown_commands = 0;
    std::uint64_t connect_attempts = 0;
    std::string last_error;
};

/// Chair controller loop state. Driven by firmware_step on a virtual clock.
struct FirmwareState {
    ChairId chair_id = 1;
    FirmwarePhase phase = FirmwarePhase::Disconnected;
    double publish_interval = 1.0;
    double ping_interval = 20.0;

    // Set by the host to model broker reachability.
    bool link_up = true;
    // Accepted but has no effect; the real board would sleep while the seat is empty.
    bool sleep_enabled = false;

    std::optional<Timestamp> last_publish_at;
    std::optional<Timestamp> last_ping_at;
    Timestamp next_publish_at = 0.0;
    Timestamp next_ping_at = 0.0;
    Timestamp next_connect_at = 0.0;
    // Survives reconnects so measurement resumes after a dropped link.
    bool sending_enabled = false;

    FirmwareDiagnostics diagnostics;
};

struct OutboundMessage {
    enum class Kind { Data, Ping };
    Kind kind = Kind::Data;
    std::string topic;
    std::string payload;
    // Readings as sent (before 2-decimal formatting); empty for pings.
    std::optional<std::array<double, kSensors>> readings;
};

/// One pass of the controller loop at time `now`. `inbound` is a payload
/// received on the chair's sendingEnabled topic since the previous step.
std::vector<OutboundMessage> firmware_step(FirmwareState& fw, const std::optional<std::string>& inbound,
                                           const PostureProfile& posture, Rng& rng, Timestamp now);

}  // namespace chairmon::sim
