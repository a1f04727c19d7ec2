#include "ultratac/acoustics.hpp"

#include "ultratac/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace ultratac::acoustics {

namespace {

void require_positive(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0) throw std::domain_error(std::string(what) + " must be finite and > 0");
}

using cplx = std::complex<double>;

struct Matrix2 {
    cplx a, b, c, d;  // [[a b] [c d]]

    Matrix2 operator*(const Matrix2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
};

}  // namespace

void MaterialAcoustics::validate() const {
    if (name.empty()) throw std::domain_error("material name must not be empty");
    require_positive(impedance, "impedance");
    require_positive(sound_speed, "sound speed");
}

LayerStack LayerStack::reversed() const {
    LayerStack out;
    out.layers.assign(layers.rbegin(), layers.rend());
    out.front_medium = back_medium;
    out.back_medium = front_medium;
    return out;
}

double LayerStack::round_trip_time() const {
    double t = 0.0;
    for (const auto& l : layers)
        if (l.thickness > 0.0) t += 2.0 * l.thickness / l.material.sound_speed;
    return t;
}

const MaterialAcoustics& LayerStack::outer_material() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
        if (it->thickness > 0.0) return it->material;
    return front_medium;
}

std::string MaterialRegistry::key(std::string_view name) {
    std::string k;
    k.reserve(name.size());
    for (char ch : name) k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    return k;
}

void MaterialRegistry::add(MaterialAcoustics material) {
    material.validate();
    auto k = key(material.name);
    aliases_.erase(k);
    entries_[k] = std::move(material);
}

void MaterialRegistry::add_alias(std::string alias, std::string target) {
    auto k = key(alias);
    if (entries_.count(k)) throw std::domain_error("alias '" + alias + "' collides with a material name");
    if (!contains(target)) throw std::domain_error("alias target '" + target + "' is not registered");
    aliases_[k] = key(target);
}

bool MaterialRegistry::contains(std::string_view name) const {
    auto k = key(name);
    return entries_.count(k) > 0 || aliases_.count(k) > 0;
}

const MaterialAcoustics& MaterialRegistry::lookup(std::string_view name) const {
    auto k = key(name);
    if (auto a = aliases_.find(k); a != aliases_.end()) k = a->second;
    auto it = entries_.find(k);
    if (it == entries_.end()) throw std::domain_error("unknown material: " + std::string(name));
    return it->second;
}

std::vector<std::string> MaterialRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, m] : entries_) out.push_back(m.name);
    return out;
}

MaterialRegistry MaterialRegistry::from_config(const KeyValueConfig& config, bool include_builtins) {
    MaterialRegistry reg = include_builtins ? builtin_materials() : MaterialRegistry{};
    std::vector<std::pair<std::string, std::string>> aliases;
    for (const auto& section : config.sections()) {
        if (auto target = config.find(section + ".alias_of")) {
            aliases.emplace_back(section, *target);
            continue;
        }
        MaterialAcoustics m;
        m.name = section;
        if (!config.has(section + ".impedance_mrayl") || !config.has(section + ".sound_speed_mps"))
            throw ConfigError("material [" + section + "] needs impedance_mrayl and sound_speed_mps");
        m.impedance = config.get_double(section + ".impedance_mrayl", 0.0);
        m.sound_speed = config.get_double(section + ".sound_speed_mps", 0.0);
        try {
            reg.add(m);
        } catch (const std::domain_error& e) {
            throw ConfigError("material [" + section + "]: " + e.what());
        }
    }
    for (const auto& [alias, target] : aliases) {
        try {
            reg.add_alias(alias, target);
        } catch (const std::domain_error& e) {
            throw ConfigError(e.what());
        }
    }
    return reg;
}

MaterialRegistry MaterialRegistry::load(const std::filesystem::path& path, bool include_builtins) {
    return from_config(KeyValueConfig::load(path), include_builtins);
}

const MaterialRegistry& builtin_materials() {
    static const MaterialRegistry registry = [] {
        MaterialRegistry r;
        // Sensor stack materials (impedance values as tabulated; ranges at midpoint).
        r.add({"Tungsten", 100.0, 1800.0});
        r.add({"Epoxy", 3.5, 2500.0});
        r.add({"PZT", 30.0, 4000.0});
        r.add({"Acrylic", 3.2, 2800.0});
        r.add({"PDMS", 1.1, 1000.0});
        r.add({"HGM-PDMS", 0.2, 900.0});
        r.add({"Air", 0.000415, 343.0});
        // Targets, slabs and container contents: impedance = density x speed.
        r.add({"Water", 1.48, 1480.0});
        r.add({"Oil", 1.32, 1450.0});
        r.add({"Iron", 46.4, 5900.0});
        r.add({"Nylon", 2.96, 2600.0});
        r.add({"Wood", 2.31, 3300.0});
        r.add({"Rubber", 1.76, 1600.0});
        r.add_alias("Resin", "Acrylic");
        r.add_alias("Plastic", "Acrylic");
        r.add_alias("Hollow Glass Microsphere", "HGM-PDMS");
        return r;
    }();
    return registry;
}

double matching_impedance(double z1, double z2) {
    require_positive(z1, "z1");
    require_positive(z2, "z2");
    return std::sqrt(z1 * z2);
}

double quarter_wave_thickness(double sound_speed, double frequency) {
    require_positive(sound_speed, "sound speed");
    require_positive(frequency, "frequency");
    return sound_speed / (4.0 * frequency);
}

double reflection_coefficient(double z_from, double z_to) {
    require_positive(z_from, "z_from");
    require_positive(z_to, "z_to");
    return (z_to - z_from) / (z_to + z_from);
}

double transmission_coefficient(double z_from, double z_to) {
    require_positive(z_from, "z_from");
    require_positive(z_to, "z_to");
    return 2.0 * z_to / (z_to + z_from);
}

PowerCoefficients stack_transmission(const LayerStack& stack, double frequency) {
    require_positive(frequency, "frequency");
    stack.front_medium.validate();
    stack.back_medium.validate();

    // (p, v) at the entry face = M * (p, v) at the exit face.
    Matrix2 m{1.0, 0.0, 0.0, 1.0};
    const double omega = 2.0 * std::numbers::pi * frequency;
    for (const auto& layer : stack.layers) {
        if (!std::isfinite(layer.thickness) || layer.thickness < 0.0)
            throw std::domain_error("layer thickness must be finite and >= 0");
        if (layer.thickness == 0.0) continue;
        layer.material.validate();
        const double z = layer.material.impedance;
        const double phase = omega * layer.thickness / layer.material.sound_speed;
        const double c = std::cos(phase);
        const double s = std::sin(phase);
        m = m * Matrix2{c, cplx(0.0, z * s), cplx(0.0, s / z), c};
    }

    const double z1 = stack.front_medium.impedance;
    const double z2 = stack.back_medium.impedance;
    // Incident + reflected on the entry side, transmitted only on the exit side.
    const cplx exit_p = m.a + m.b / z2;
    const cplx exit_v = m.c + m.d / z2;
    const cplx t = 2.0 / (exit_p + z1 * exit_v);
    const cplx r = exit_p * t - 1.0;

    PowerCoefficients out;
    out.power_transmission = std::norm(t) * z1 / z2;
    out.power_reflection = std::norm(r);
    return out;
}

LayerStack default_sensor_stack(const MaterialAcoustics& back_medium) {
    const auto& reg = builtin_materials();
    LayerStack stack;
    stack.front_medium = reg.lookup("PZT");
    stack.layers = {
        {reg.lookup("Acrylic"), 0.7e-3},
        {reg.lookup("PDMS"), 2.0e-3},
        {reg.lookup("HGM-PDMS"), 0.1e-3},
    };
    stack.back_medium = back_medium;
    return stack;
}

}  // namespace ultratac::acoustics
