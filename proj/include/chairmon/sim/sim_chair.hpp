#pragma once

#include <limits>

#include "chairmon/sim/firmware.hpp"
#include "chairmon/transport/bus.hpp"

namespace chairmon::sim {

/// A simulated chair attached to a bus: listens on its sendingEnabled topic
/// and publishes what the firmware loop produces.
class SimChair {
public:
    SimChair(ChairId chair, transport::Bus& bus, PostureProfile posture, std::uint64_t seed);
    ~SimChair();

    SimChair(const SimChair&) = delete;
    SimChair& operator=(const SimChair&) = delete;

    /// Run the firmware loop at `now`. Returns the data frames published.
    std::size_t step(Timestamp now);

    void set_posture(PostureProfile posture) { posture_ = std::move(posture); }
    const PostureProfile& posture() const { return posture_; }

    /// Frames generated before `until` are discarded instead of published.
    void drop_frames_until(Timestamp until) { drop_until_ = until; }

    const FirmwareState& firmware() const { return fw_; }
    FirmwareState& firmware() { return fw_; }
    std::uint64_t published() const { return published_; }
    std::uint64_t dropped() const { return dropped_; }

private:
    transport::Bus& bus_;
    transport::SubscriptionPtr commands_;
    FirmwareState fw_;
    PostureProfile posture_;
    Rng rng_;
    Timestamp drop_until_ = -std::numeric_limits<double>::infinity();
    std::uint64_t published_ = 0;
    std::uint64_t dropped_ = 0;
};

}  // namespace chairmon::sim
