#pragma once

// Layered-media acoustics for the sensor stack: material registry, single-layer
// matching design rules, interface coefficients and 1-D transfer-matrix propagation.
//
// Impedances are carried in MRayl throughout. Only impedance ratios enter the
// formulas, so no unit conversion is needed.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ultratac {
class KeyValueConfig;
}

namespace ultratac::acoustics {

struct MaterialAcoustics {
    std::string name;
    double impedance = 0.0;    // MRayl
    double sound_speed = 0.0;  // m/s

    /// Throws std::domain_error unless both quantities are finite and positive.
    void validate() const;
};

struct LayerSpec {
    MaterialAcoustics material;
    double thickness = 0.0;  // m
};

/// Layers are ordered from the transducer face outward. The wave enters from
/// `front_medium` and leaves into `back_medium`.
struct LayerStack {
    std::vector<LayerSpec> layers;
    MaterialAcoustics front_medium;
    MaterialAcoustics back_medium;

    /// Same stack seen from the other side.
    LayerStack reversed() const;
    /// Round-trip travel time through all interior layers.
    double round_trip_time() const;
    /// Impedance of the medium a wave meets last before leaving the stack.
    const MaterialAcoustics& outer_material() const;
};

struct PowerCoefficients {
    double power_transmission = 0.0;
    double power_reflection = 0.0;
};

/// Name-keyed material table. Lookups are case-insensitive; names are unique
/// under that comparison. Aliases ("Resin", "Plastic", ...) resolve to entries.
class MaterialRegistry {
public:
    /// Replaces any entry or alias with the same (case-folded) name.
    void add(MaterialAcoustics material);
    void add_alias(std::string alias, std::string target);

    bool contains(std::string_view name) const;
    /// Throws std::domain_error for unknown names.
    const MaterialAcoustics& lookup(std::string_view name) const;
    std::vector<std::string> names() const;
    std::size_t size() const { return entries_.size(); }

    /// Sections of the form
    ///   [Acrylic]
    ///   impedance_mrayl = 3.2
    ///   sound_speed_mps = 2800
    /// An optional `alias_of = <name>` key declares an alias instead.
    static MaterialRegistry from_config(const KeyValueConfig& config, bool include_builtins = true);
    static MaterialRegistry load(const std::filesystem::path& path, bool include_builtins = true);

private:
    static std::string key(std::string_view name);

    std::map<std::string, MaterialAcoustics> entries_;
    std::map<std::string, std::string> aliases_;
};

/// Built-in table: the seven sensor-stack materials plus the target, slab and
/// content materials used by the experiments.
///
/// Sound speeds and the impedances of Water/Oil/Iron/Nylon/Wood/Rubber are
/// documented constants (density x speed for the latter). Ranged impedances use
/// midpoints: PZT 30, Epoxy 3.5. "Resin" and "Plastic" alias Acrylic;
/// "Hollow Glass Microsphere" aliases the HGM-PDMS composite.
const MaterialRegistry& builtin_materials();

/// Geometric mean sqrt(z1*z2): the ideal single matching-layer impedance.
double matching_impedance(double z1, double z2);

/// c / (4 f): thickness at which a layer is a quarter wavelength thick.
double quarter_wave_thickness(double sound_speed, double frequency);

/// Pressure reflection coefficient (z_to - z_from) / (z_to + z_from).
double reflection_coefficient(double z_from, double z_to);

/// Pressure transmission coefficient 2 z_to / (z_to + z_from).
double transmission_coefficient(double z_from, double z_to);

/// Lossless transfer-matrix evaluation of the whole stack at one frequency.
/// Zero-thickness layers are skipped.
PowerCoefficients stack_transmission(const LayerStack& stack, double frequency);

/// PZT | Acrylic 0.7 mm | PDMS 2 mm | HGM-PDMS 0.1 mm | <back>.
LayerStack default_sensor_stack(const MaterialAcoustics& back_medium);

}  // namespace ultratac::acoustics
