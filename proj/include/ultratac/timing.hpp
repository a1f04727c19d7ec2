#pragma once

#include <string>
#include <string_view>

namespace ultratac {

enum class SensorMode { Proximity, MaterialDetection };

std::string_view to_string(SensorMode mode);
/// Accepts "Proximity" / "MaterialDetection" (case-insensitive). Throws std::invalid_argument.
SensorMode parse_sensor_mode(std::string_view text);

/// Per-cycle acquisition settings of the ultrasound front end.
struct TimingConfig {
    SensorMode mode = SensorMode::Proximity;
    double cycle_period = 0.020;        // s
    int pulse_count = 5;
    double gain_db = 55.5;
    double adc_rate = 2.4e6;            // Hz
    double acquisition_window = 1.0e-3; // s, echo capture length inside each cycle

    std::size_t samples_per_frame() const;
    /// Throws std::invalid_argument if the pulse/gain pair does not belong to `mode`.
    void validate() const;
};

inline constexpr int kProximityPulses = 5;
inline constexpr double kProximityGainDb = 55.5;
inline constexpr int kMaterialPulses = 20;
inline constexpr double kMaterialGainDb = 40.0;
inline constexpr double kCyclePeriod = 0.020;
inline constexpr double kAdcRate = 2.4e6;
inline constexpr double kCameraPeriod = 1.0 / 30.0;

TimingConfig timing_for(SensorMode mode);

}  // namespace ultratac
