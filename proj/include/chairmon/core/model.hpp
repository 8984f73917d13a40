#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace chairmon {

using ChairId = std::uint32_t;

/// Unix time in seconds; fractional part allowed.
using Timestamp = double;

inline constexpr std::size_t kSeatSensors = 4;
inline constexpr std::size_t kBackSensors = 2;
inline constexpr std::size_t kSensors = kSeatSensors + kBackSensors;
inline constexpr double kMaxForce = 15.0;

/// One frame from a chair. Wire order is seat[0..3] then back[0..1].
struct PressureSample {
    ChairId chair_id = 0;
    std::array<double, kSeatSensors> seat{};
    std::array<double, kBackSensors> back{};
    Timestamp received_at = 0.0;

    /// Build from the 6-element wire array. Throws ValidationError on bad arity or range.
    static PressureSample from_readings(ChairId chair, std::span<const double> readings, Timestamp at);

    std::array<double, kSensors> readings() const;

    /// Throws ValidationError naming the first offending field.
    void validate() const;
};

struct Thresholds {
    double odt = 3.0;
    double rdt = 6.8;
    double ocdt = 0.8;
    double presence_sum = 1.0;
    double long_sit_secs = 3600.0;
    std::size_t presence_window = 10;
    std::size_t dispersion_window = 5;
    // Minimum summed back force counted as backrest contact.
    double back_eps = 0.5;

    void validate() const;
};

struct SampleStats {
    double sum = 0.0;
    double seat_avg = 0.0;
    double seat_dispersion = 0.0;
    double back_dispersion = 0.0;
    bool back_present = false;
};

enum class SittingState { Green, Orange, Red };

std::string_view to_string(SittingState s) noexcept;
std::optional<SittingState> parse_sitting_state(std::string_view s) noexcept;

/// Green < Orange < Red.
constexpr int severity(SittingState s) noexcept { return static_cast<int>(s); }

/// Per-frame statistics. Dispersion is the population variance (divisor n).
SampleStats compute_sample_stats(const PressureSample& sample, const Thresholds& thresholds);

/// Posture rule table. Intervals are half-open with equality assigned to the
/// more severe state; long sitting forces Red. Without backrest contact a
/// posture is never Green.
SittingState classify(double avg_deviation, bool back_present, bool long_sitting,
                      const Thresholds& thresholds);

}  // namespace chairmon
