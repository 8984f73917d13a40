#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "chairmon/core/model.hpp"

namespace chairmon {

// Every topic lives under this prefix. Per-chair channels are
// `<prefix>ch{ID}/<channel>`; appLogin and chairPressureData are shared.
inline constexpr std::string_view kTopicPrefix = "qiot/things/Matuska/chairs/";

enum class Channel { SendingEnabled, AppStatus, AppData, PressureData, AppLogin };

std::string_view to_string(Channel c) noexcept;

/// Throws ValidationError on an unknown channel name.
Channel parse_channel(std::string_view name);

/// Canonical topic for a chair channel. Throws ValidationError for chair_id 0.
std::string topic_for(ChairId chair_id, Channel channel);
std::string topic_for(ChairId chair_id, std::string_view channel);

/// WebSocket path mirroring the appData topic.
std::string ws_path_for(ChairId chair_id);

struct ParsedTopic {
    std::optional<ChairId> chair_id;
    Channel channel;
};

/// Inverse of topic_for; nullopt for topics outside the scheme.
std::optional<ParsedTopic> parse_topic(std::string_view topic);

}  // namespace chairmon
