#include "ultratac/timing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace ultratac {

std::string_view to_string(SensorMode mode) {
    switch (mode) {
        case SensorMode::Proximity: return "Proximity";
        case SensorMode::MaterialDetection: return "MaterialDetection";
    }
    return "?";
}

SensorMode parse_sensor_mode(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "proximity") return SensorMode::Proximity;
    if (lower == "materialdetection" || lower == "material") return SensorMode::MaterialDetection;
    throw std::invalid_argument("unknown sensor mode: " + std::string(text));
}

std::size_t TimingConfig::samples_per_frame() const {
    return static_cast<std::size_t>(std::llround(adc_rate * acquisition_window));
}

void TimingConfig::validate() const {
    if (!(cycle_period > 0.0) || !(adc_rate > 0.0) || !(acquisition_window > 0.0))
        throw std::invalid_argument("timing periods and rates must be positive");
    if (acquisition_window > cycle_period)
        throw std::invalid_argument("acquisition window must fit inside one cycle");
    switch (mode) {
        case SensorMode::Proximity:
            if (pulse_count != kProximityPulses || gain_db != kProximityGainDb)
                throw std::invalid_argument("proximity mode requires 5 pulses at 55.5 dB");
            break;
        case SensorMode::MaterialDetection:
            if (pulse_count != kMaterialPulses)
                throw std::invalid_argument("material detection mode requires 20 pulses");
            break;
    }
}

TimingConfig timing_for(SensorMode mode) {
    TimingConfig cfg;
    cfg.mode = mode;
    if (mode == SensorMode::Proximity) {
        cfg.pulse_count = kProximityPulses;
        cfg.gain_db = kProximityGainDb;
    } else {
        cfg.pulse_count = kMaterialPulses;
        cfg.gain_db = kMaterialGainDb;
    }
    return cfg;
}

}  // namespace ultratac
