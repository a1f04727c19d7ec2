#pragma once

// Deterministic synthetic envelope frames for the ultrasound path.
//
// Amplitude model (a modelling choice, not a calibrated voltage):
//   * transmit ring-down:  A_ring * exp(-t / tau_ring), A_ring proportional to pulses x linear gain,
//     tau chosen so the ring-down is buried in noise after the 160 us blind time;
//   * airborne echo:       Gaussian lobe at 2 d / c_air, amplitude proportional to
//     |r(air, target)| x pulses x linear gain / d^2 (spherical spreading), width growing
//     with the burst length;
//   * contact echo:        reverberation train inside the slab or container wall, plus the
//     far-wall echo through a container's content.
// Additive Gaussian noise is applied last and the envelope is clamped at zero.

#include "ultratac/acoustics.hpp"
#include "ultratac/timing.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ultratac {
class KeyValueConfig;
}

namespace ultratac::echo {

inline constexpr double kCenterFrequency = 1.05e6;   // Hz, transducer centre frequency
inline constexpr double kBlindTime = 160e-6;         // s, ring-down mask (~2.7 cm round trip)
inline constexpr double kRingDownTau = 20e-6;        // s
inline constexpr double kRingDownScale = 1.0e-3;     // V per (pulse x linear gain)
inline constexpr double kAirEchoScale = 4.0e-7;      // V m^2 per (pulse x linear gain)
inline constexpr double kContactEchoScale = 5.0e-4;  // V per (pulse x linear gain)
inline constexpr double kEnvelopeFloor = 0.05;       // V, detector output with no signal
inline constexpr double kMinSpreadingDistance = 0.01;  // m, clamps the 1/d^2 law near the face
inline constexpr double kTransducerLobeSigma = 1.0e-6; // s, lobe width for a zero-length burst

struct EchoFrame {
    std::vector<double> samples;  // envelope volts, all >= 0
    double sample_rate = kAdcRate;
    double t0 = 0.0;              // s, trigger time of this cycle
    double gain_db = kProximityGainDb;
    int pulse_count = kProximityPulses;
    SensorMode mode = SensorMode::Proximity;

    double sample_time(std::size_t i) const { return static_cast<double>(i) / sample_rate; }
};

enum class SceneKind { Empty, AirTarget, ContactSlab, Container };

std::string_view to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view text);

struct SceneSpec {
    SceneKind kind = SceneKind::Empty;
    double distance = 0.0;                 // m, AirTarget
    std::string target = "Acrylic";        // AirTarget reflector
    std::string slab_material = "Acrylic"; // ContactSlab
    double slab_thickness = 0.010;         // m; +inf models a half-space
    std::string wall_material = "Plastic"; // Container
    double wall_thickness = 0.002;         // m
    std::string content = "Water";         // Container
    double content_depth = 0.040;          // m, wall-to-far-wall distance
    double coupling = 1.0;                 // contact pressure / coupling factor on echo amplitude
    double stack_delay_offset = 0.0;       // s, membrane compression shift of contact echoes
    double noise_std = 0.0;                // V
    std::uint64_t seed = 0;

    /// Throws std::domain_error on negative distance, non-positive thickness, negative noise.
    void validate() const;
};

/// Round-trip amplitude attenuation in nepers per metre at the centre frequency.
/// Unknown names fall back to a generic solid value.
double attenuation_np_per_m(std::string_view material);

/// Echo lobe standard deviation for a burst of `pulse_count` cycles.
double lobe_sigma(int pulse_count);

/// Noise-free ring-down + floor for one frame (shared by every scene kind).
std::vector<double> ring_down(const TimingConfig& cfg);

EchoFrame synthesize_air_echo(const SceneSpec& scene, const TimingConfig& cfg,
                              const acoustics::MaterialRegistry& registry = acoustics::builtin_materials());

EchoFrame synthesize_contact_echo(const SceneSpec& scene, const acoustics::LayerStack& stack,
                                  const TimingConfig& cfg,
                                  const acoustics::MaterialRegistry& registry = acoustics::builtin_materials());

/// Dispatches on scene.kind; Empty yields ring-down + noise only.
EchoFrame synthesize(const SceneSpec& scene, const TimingConfig& cfg,
                     const acoustics::MaterialRegistry& registry = acoustics::builtin_materials());

/// Full-wave rectification followed by a single-pole low-pass at `cutoff_hz`.
std::vector<double> envelope(std::span<const double> raw, double sample_rate, double cutoff_hz = 50e3);

KeyValueConfig scene_to_config(const SceneSpec& scene);
SceneSpec scene_from_config(const KeyValueConfig& config);

/// Header: t0,sample_rate,gain_db,pulse_count,mode,s0,s1,...
void write_frames_csv(std::ostream& out, std::span<const EchoFrame> frames);

}  // namespace ultratac::echo
