#include "chairmon/sim/posture.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chairmon/core/errors.hpp"

namespace chairmon::sim {

namespace {

// Zero-mean, unit population variance spread patterns for the base levels.
constexpr std::array<std::array<double, kSeatSensors>, 3> kSpreadPatterns = {{
    {1.0, 1.0, -1.0, -1.0},   // forward/backward
    {1.0, -1.0, -1.0, 1.0},   // diagonal twist
    {1.0, -1.0, 1.0, -1.0},   // sideways
}};

constexpr double kBaseShare = 0.97;
constexpr double kSeatMean = 7.0;

}  // namespace

double PostureProfile::base_variance() const {
    const double m = (seat_base[0] + seat_base[1] + seat_base[2] + seat_base[3]) / 4.0;
    double acc = 0.0;
    for (double b : seat_base) acc += (b - m) * (b - m);
    return acc / 4.0;
}

PostureProfile& PostureProfile::build() {
    const std::string who = "posture " + std::to_string(posture_id);
    for (double b : seat_base) {
        if (!(b >= 0.0 && b <= kMaxForce)) throw ConfigError(who + ": seat_base outside [0, 15]");
    }
    for (double b : back_base) {
        if (!(b >= 0.0 && b <= kMaxForce)) throw ConfigError(who + ": back_base outside [0, 15]");
    }
    if (!(target_dispersion >= 0.0) || !std::isfinite(target_dispersion)) {
        throw ConfigError(who + ": target_dispersion must be finite and >= 0");
    }
    if (!(tilt_share >= 0.0 && tilt_share <= 1.0)) throw ConfigError(who + ": tilt_share outside [0, 1]");
    if (!(back_noise >= 0.0)) throw ConfigError(who + ": back_noise must be >= 0");

    // Largest variance any distribution on [0, 15] with this mean can have.
    const double m = (seat_base[0] + seat_base[1] + seat_base[2] + seat_base[3]) / 4.0;
    const double ceiling = m * (kMaxForce - m);
    if (target_dispersion >= ceiling) {
        throw ConfigError(who + ": target dispersion " + std::to_string(target_dispersion) +
                          " unreachable in [0, 15] with seat mean " + std::to_string(m));
    }
    const double residual = target_dispersion - base_variance();
    if (residual < -1e-12) {
        throw ConfigError(who + ": base spread already exceeds target dispersion");
    }
    const double r = std::max(residual, 0.0);
    // E[var] = base + tilt^2 * var(direction) + sigma^2 * (n-1)/n, var(direction) = 1.
    tilt_sigma = std::sqrt(tilt_share * r);
    sensor_sigma = std::sqrt((1.0 - tilt_share) * r * 4.0 / 3.0);
    return *this;
}

PostureProfile default_profile(int posture_id, bool back_contact, std::uint64_t seed) {
    if (posture_id < 1 || posture_id > 9) throw ConfigError("posture id must be 1..9");
    PostureProfile p;
    p.posture_id = posture_id;
    p.target_dispersion = kPostureTargets[static_cast<std::size_t>(posture_id - 1)];
    p.back_contact = back_contact;
    p.noise_seed = seed;
    const auto& pattern = kSpreadPatterns[static_cast<std::size_t>(posture_id - 1) % kSpreadPatterns.size()];
    const double amp = std::sqrt(kBaseShare * p.target_dispersion);
    for (std::size_t i = 0; i < kSeatSensors; ++i) p.seat_base[i] = kSeatMean + amp * pattern[i];
    p.back_base = back_contact ? std::array<double, kBackSensors>{3.0, 3.5} : std::array<double, kBackSensors>{0.0, 0.0};
    if (!back_contact) p.back_noise = 0.0;
    p.build();
    return p;
}

PostureProfile default_profile(int posture_id, std::uint64_t seed) {
    return default_profile(posture_id, posture_id != 2, seed);
}

PostureProfile profile_from_json(const nlohmann::json& j, std::uint64_t seed) {
    try {
        const int id = j.at("posture").get<int>();
        const bool back = j.value("back_contact", id != 2);
        PostureProfile p = default_profile(id, back, j.value("seed", seed));
        if (j.contains("seat_base")) p.seat_base = j["seat_base"].get<std::array<double, kSeatSensors>>();
        if (j.contains("back_base")) p.back_base = j["back_base"].get<std::array<double, kBackSensors>>();
        p.target_dispersion = j.value("target_dispersion", p.target_dispersion);
        p.tilt_share = j.value("tilt_share", p.tilt_share);
        p.back_noise = j.value("back_noise", p.back_noise);
        p.build();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("posture profile: ") + e.what());
    }
}

std::array<double, kSensors> generate_readings(const PostureProfile& p, Rng& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    std::array<double, kSensors> out{};
    const double tilt = p.tilt_sigma * unit(rng);
    for (std::size_t i = 0; i < kSeatSensors; ++i) {
        const double v = p.seat_base[i] + tilt * kTiltDirection[i] + p.sensor_sigma * unit(rng);
        out[i] = std::clamp(v, 0.0, kMaxForce);
    }
    for (std::size_t i = 0; i < kBackSensors; ++i) {
        const double v = p.back_base[i] + p.back_noise * unit(rng);
        out[kSeatSensors + i] = std::clamp(v, 0.0, kMaxForce);
    }
    return out;
}

PressureSample generate_frame(const PostureProfile& profile, Rng& rng, ChairId chair, Timestamp at) {
    const auto r = generate_readings(profile, rng);
    return PressureSample::from_readings(chair, r, at);
}

}  // namespace chairmon::sim
