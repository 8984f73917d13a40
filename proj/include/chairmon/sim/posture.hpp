#pragma once

#include <array>
#include <cstdint>
#include <random>

#include <json.hpp>

#include "chairmon/core/model.hpp"

namespace chairmon::sim {

using Rng = std::mt19937_64;

/// Mean seat variance per posture 1..9, as measured over the test subjects.
inline constexpr std::array<double, 9> kPostureTargets = {0.266, 0.850, 3.758, 4.576, 3.431,
                                                          9.573, 6.865, 7.698, 7.959};

/// Generative model for one sitting posture.
///
/// Seat readings are `seat_base[i] + tilt * kTiltDirection[i] + noise_i`, with a
/// shared Gaussian tilt and independent Gaussian per-sensor noise. The two
/// noise scales are derived from `target_dispersion` so the expected per-frame
/// population variance of the seat equals the target before clamping.
struct PostureProfile {
    int posture_id = 1;
    std::array<double, kSeatSensors> seat_base{};
    std::array<double, kBackSensors> back_base{};
    double target_dispersion = 0.0;
    bool back_contact = true;
    std::uint64_t noise_seed = 0;
    // Share of the residual variance carried by the shared tilt.
    double tilt_share = 0.5;
    double back_noise = 0.25;

    // Derived by build().
    double tilt_sigma = 0.0;
    double sensor_sigma = 0.0;

    /// Validate and derive noise scales. Throws ConfigError when the target
    /// is below the base spread or beyond what [0, 15] can hold for this mean.
    PostureProfile& build();

    double base_variance() const;
};

/// Left/right lean pattern (front-left, front-right, rear-left, rear-right).
inline constexpr std::array<double, kSeatSensors> kTiltDirection = {1.0, -1.0, 1.0, -1.0};

/// Built-in profile for postures 1..9. Posture 2 defaults to no backrest contact.
PostureProfile default_profile(int posture_id, std::uint64_t seed = 0);
PostureProfile default_profile(int posture_id, bool back_contact, std::uint64_t seed);

/// Overrides on top of default_profile(j["posture"]). Throws ConfigError.
PostureProfile profile_from_json(const nlohmann::json& j, std::uint64_t seed = 0);

/// One frame; readings clamped to [0, 15].
std::array<double, kSensors> generate_readings(const PostureProfile& profile, Rng& rng);
PressureSample generate_frame(const PostureProfile& profile, Rng& rng, ChairId chair = 1, Timestamp at = 0.0);

}  // namespace chairmon::sim
