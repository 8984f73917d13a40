#include "chairmon/core/model.hpp"

#include <cmath>
#include <numeric>

#include "chairmon/core/errors.hpp"

namespace chairmon {

namespace {

template <std::size_t N>
double mean_of(const std::array<double, N>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(N);
}

template <std::size_t N>
double population_variance(const std::array<double, N>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(N);
}

void check_reading(double v, const std::string& field) {
    if (!std::isfinite(v)) throw ValidationError(field, "reading is not finite");
    if (v < 0.0 || v > kMaxForce) throw ValidationError(field, "reading outside [0, 15]");
}

}  // namespace

PressureSample PressureSample::from_readings(ChairId chair, std::span<const double> readings,
                                             Timestamp at) {
    if (readings.size() != kSensors) {
        throw ValidationError("data", "expected 6 readings, got " + std::to_string(readings.size()));
    }
    PressureSample s;
    s.chair_id = chair;
    s.received_at = at;
    for (std::size_t i = 0; i < kSeatSensors; ++i) s.seat[i] = readings[i];
    for (std::size_t i = 0; i < kBackSensors; ++i) s.back[i] = readings[kSeatSensors + i];
    s.validate();
    return s;
}

std::array<double, kSensors> PressureSample::readings() const {
    return {seat[0], seat[1], seat[2], seat[3], back[0], back[1]};
}

void PressureSample::validate() const {
    if (chair_id == 0) throw ValidationError("chair_id", "must be positive");
    for (std::size_t i = 0; i < kSeatSensors; ++i) check_reading(seat[i], "seat[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < kBackSensors; ++i) check_reading(back[i], "back[" + std::to_string(i) + "]");
    if (!std::isfinite(received_at)) throw ValidationError("received_at", "timestamp is not finite");
}

void Thresholds::validate() const {
    if (!(ocdt > 0.0 && ocdt < odt && odt < rdt)) {
        throw ConfigError("thresholds: require 0 < ocdt < odt < rdt");
    }
    if (dispersion_window < 1 || presence_window < dispersion_window) {
        throw ConfigError("thresholds: require presence_window >= dispersion_window >= 1");
    }
    if (!(long_sit_secs > 0.0)) throw ConfigError("thresholds: long_sit_secs must be positive");
    if (!(presence_sum >= 0.0)) throw ConfigError("thresholds: presence_sum must be non-negative");
    if (!(back_eps >= 0.0)) throw ConfigError("thresholds: back_eps must be non-negative");
}

std::string_view to_string(SittingState s) noexcept {
    switch (s) {
        case SittingState::Green: return "green";
        case SittingState::Orange: return "orange";
        case SittingState::Red: return "red";
    }
    return "green";
}

std::optional<SittingState> parse_sitting_state(std::string_view s) noexcept {
    if (s == "green") return SittingState::Green;
    if (s == "orange") return SittingState::Orange;
    if (s == "red") return SittingState::Red;
    return std::nullopt;
}

SampleStats compute_sample_stats(const PressureSample& sample, const Thresholds& thresholds) {
    sample.validate();
    SampleStats st;
    const double seat_sum = std::accumulate(sample.seat.begin(), sample.seat.end(), 0.0);
    const double back_sum = std::accumulate(sample.back.begin(), sample.back.end(), 0.0);
    st.sum = seat_sum + back_sum;
    st.seat_avg = mean_of(sample.seat);
    st.seat_dispersion = population_variance(sample.seat);
    st.back_dispersion = population_variance(sample.back);
    st.back_present = back_sum >= thresholds.back_eps;
    return st;
}

SittingState classify(double avg_deviation, bool back_present, bool long_sitting,
                      const Thresholds& thresholds) {
    if (!std::isfinite(avg_deviation)) throw ValidationError("avg_deviation", "not finite");
    if (avg_deviation < 0.0) throw ValidationError("avg_deviation", "negative");

    if (long_sitting) return SittingState::Red;
    if (back_present) {
        if (avg_deviation < thresholds.odt) return SittingState::Green;
        if (avg_deviation < thresholds.rdt) return SittingState::Orange;
        return SittingState::Red;
    }
    return avg_deviation < thresholds.odt ? SittingState::Orange : SittingState::Red;
}

}  // namespace chairmon
