#include "chairmon/sim/firmware.hpp"

#include "chairmon/hub/messages.hpp"
#include "chairmon/hub/topics.hpp"

namespace chairmon::sim {

std::string_view to_string(FirmwarePhase p) noexcept {
    switch (p) {
        case FirmwarePhase::Disconnected: return "disconnected";
        case FirmwarePhase::Connecting: return "connecting";
        case FirmwarePhase::Idle: return "idle";
        case FirmwarePhase::Measuring: return "measuring";
    }
    return "";
}

namespace {

void enter_idle(FirmwareState& fw, Timestamp now) {
    fw.phase = FirmwarePhase::Idle;
    fw.next_ping_at = now + fw.ping_interval;
}

void enter_measuring(FirmwareState& fw, Timestamp now) {
    fw.phase = FirmwarePhase::Measuring;
    fw.next_publish_at = now;
}

}  // namespace

std::vector<OutboundMessage> firmware_step(FirmwareState& fw, const std::optional<std::string>& inbound,
                                           const PostureProfile& posture, Rng& rng, Timestamp now) {
    std::vector<OutboundMessage> out;

    if (fw.phase == FirmwarePhase::Idle || fw.phase == FirmwarePhase::Measuring) {
        if (!fw.link_up) {
            fw.phase = FirmwarePhase::Disconnected;
            fw.diagnostics.last_error = "link lost";
        }
    }
    if (fw.phase == FirmwarePhase::Disconnected) {
        fw.phase = FirmwarePhase::Connecting;
        fw.next_connect_at = now;
    }
    if (fw.phase == FirmwarePhase::Connecting) {
        if (now < fw.next_connect_at) return out;
        ++fw.diagnostics.connect_attempts;
        if (!fw.link_up) {
            fw.next_connect_at = now + kReconnectDelay;
            return out;
        }
        if (fw.sending_enabled) {
            enter_measuring(fw, now);
        } else {
            enter_idle(fw, now);
        }
    }

    if (inbound) {
        const auto cmd = parse_command(*inbound);
        if (!cmd) {
            ++fw.diagnostics.unknown_commands;
            fw.diagnostics.last_error = "unknown command: " + inbound->substr(0, 64);
        } else if (*cmd == CommandKind::Start) {
            fw.sending_enabled = true;
            if (fw.phase == FirmwarePhase::Idle) enter_measuring(fw, now);
        } else {
            fw.sending_enabled = false;
            if (fw.phase == FirmwarePhase::Measuring) enter_idle(fw, now);
        }
    }

    if (fw.phase == FirmwarePhase::Measuring && now >= fw.next_publish_at) {
        const auto readings = generate_readings(posture, rng);
        out.push_back({OutboundMessage::Kind::Data, topic_for(fw.chair_id, Channel::PressureData),
                       encode_pressure(fw.chair_id, readings), readings});
        fw.last_publish_at = now;
        fw.next_publish_at += fw.publish_interval;
        if (fw.next_publish_at <= now) fw.next_publish_at = now + fw.publish_interval;
    } else if (fw.phase == FirmwarePhase::Idle && now >= fw.next_ping_at) {
        out.push_back({OutboundMessage::Kind::Ping, topic_for(fw.chair_id, Channel::PressureData),
                       encode_ping(fw.chair_id), std::nullopt});
        fw.last_ping_at = now;
        fw.next_ping_at += fw.ping_interval;
        if (fw.next_ping_at <= now) fw.next_ping_at = now + fw.ping_interval;
    }
    return out;
}

}  // namespace chairmon::sim
