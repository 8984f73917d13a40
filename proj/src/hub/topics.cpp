#include "chairmon/hub/topics.hpp"

#include <charconv>

#include "chairmon/core/errors.hpp"

namespace chairmon {

namespace {

bool is_shared(Channel c) { return c == Channel::AppLogin || c == Channel::PressureData; }

}  // namespace

std::string_view to_string(Channel c) noexcept {
    switch (c) {
        case Channel::SendingEnabled: return "sendingEnabled";
        case Channel::AppStatus: return "appStatus";
        case Channel::AppData: return "appData";
        case Channel::PressureData: return "chairPressureData";
        case Channel::AppLogin: return "appLogin";
    }
    return "";
}

Channel parse_channel(std::string_view name) {
    if (name == "sendingEnabled") return Channel::SendingEnabled;
    if (name == "appStatus") return Channel::AppStatus;
    if (name == "appData") return Channel::AppData;
    if (name == "pressureData" || name == "chairPressureData") return Channel::PressureData;
    if (name == "appLogin") return Channel::AppLogin;
    throw ValidationError("channel", "unknown channel '" + std::string(name) + "'");
}

std::string topic_for(ChairId chair_id, Channel channel) {
    if (chair_id == 0) throw ValidationError("chair_id", "must be >= 1");
    std::string t(kTopicPrefix);
    if (is_shared(channel)) return t.append(to_string(channel));
    return t.append("ch").append(std::to_string(chair_id)).append("/").append(to_string(channel));
}

std::string topic_for(ChairId chair_id, std::string_view channel) { return topic_for(chair_id, parse_channel(channel)); }

std::string ws_path_for(ChairId chair_id) { return "/ws/ch" + std::to_string(chair_id) + "/appData"; }

std::optional<ParsedTopic> parse_topic(std::string_view topic) {
    if (!topic.starts_with(kTopicPrefix)) return std::nullopt;
    topic.remove_prefix(kTopicPrefix.size());
    if (topic == "appLogin") return ParsedTopic{std::nullopt, Channel::AppLogin};
    if (topic == "chairPressureData") return ParsedTopic{std::nullopt, Channel::PressureData};
    if (!topic.starts_with("ch")) return std::nullopt;
    topic.remove_prefix(2);
    const auto slash = topic.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    ChairId id = 0;
    const auto num = topic.substr(0, slash);
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), id);
    if (ec != std::errc{} || ptr != num.data() + num.size() || id == 0) return std::nullopt;
    const auto ch = topic.substr(slash + 1);
    if (ch == "sendingEnabled") return ParsedTopic{id, Channel::SendingEnabled};
    if (ch == "appStatus") return ParsedTopic{id, Channel::AppStatus};
    if (ch == "appData") return ParsedTopic{id, Channel::AppData};
    return std::nullopt;
}

}  // namespace chairmon
