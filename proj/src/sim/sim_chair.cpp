#include "chairmon/sim/sim_chair.hpp"

#include "chairmon/hub/topics.hpp"

namespace chairmon::sim {

SimChair::SimChair(ChairId chair, transport::Bus& bus, PostureProfile posture, std::uint64_t seed)
    : bus_(bus), posture_(std::move(posture)), rng_(seed) {
    fw_.chair_id = chair;
    commands_ = bus_.subscribe(topic_for(chair, Channel::SendingEnabled));
}

SimChair::~SimChair() {
    try {
        bus_.unsubscribe(commands_);
    } catch (const std::exception&) {
    }
}

std::size_t SimChair::step(Timestamp now) {
    std::vector<OutboundMessage> out;
    auto inbound = commands_->drain();
    if (inbound.empty()) {
        out = firmware_step(fw_, std::nullopt, posture_, rng_, now);
    } else {
        for (auto& m : inbound) {
            auto part = firmware_step(fw_, m.payload, posture_, rng_, now);
            out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
    }
    std::size_t frames = 0;
    for (auto& m : out) {
        if (m.kind == OutboundMessage::Kind::Data && now < drop_until_) {
            ++dropped_;
            continue;
        }
        bus_.publish(m.topic, std::move(m.payload));
        if (m.kind == OutboundMessage::Kind::Data) {
            ++published_;
            ++frames;
        }
    }
    return frames;
}

}  // namespace chairmon::sim
