#include "ultratac/echo.hpp"

#include "ultratac/config.hpp"
#include "ultratac/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ultratac::echo {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

double gain_linear(double gain_db) { return std::pow(10.0, gain_db / 20.0); }

EchoFrame blank_frame(const TimingConfig& cfg) {
    cfg.validate();
    EchoFrame f;
    f.sample_rate = cfg.adc_rate;
    f.gain_db = cfg.gain_db;
    f.pulse_count = cfg.pulse_count;
    f.mode = cfg.mode;
    f.samples = ring_down(cfg);
    return f;
}

void add_lobe(std::vector<double>& samples, double sample_rate, double center, double sigma, double amplitude) {
    if (amplitude == 0.0 || samples.empty()) return;
    const double reach = 6.0 * sigma;
    const auto n = static_cast<long long>(samples.size());
    auto first = static_cast<long long>(std::floor((center - reach) * sample_rate));
    auto last = static_cast<long long>(std::ceil((center + reach) * sample_rate));
    first = std::max(first, 0LL);
    last = std::min(last, n - 1);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (long long i = first; i <= last; ++i) {
        const double dt = static_cast<double>(i) / sample_rate - center;
        samples[static_cast<std::size_t>(i)] += amplitude * std::exp(-dt * dt * inv);
    }
}

void finish(EchoFrame& frame, double noise_std, std::uint64_t seed) {
    if (noise_std > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> noise(0.0, noise_std);
        for (auto& s : frame.samples) s += noise(rng);
    }
    for (auto& s : frame.samples) s = std::max(s, 0.0);
}

// Adds a decaying multiple-reflection train inside one layer of thickness `d`.
void add_reverberation(std::vector<double>& samples, double sample_rate, double window, double t_first,
                       double amplitude, double r_front, double r_back, double thickness, double speed,
                       double attenuation, double sigma) {
    if (!std::isfinite(thickness)) return;
    const double spacing = 2.0 * thickness / speed;
    const double per_trip = std::exp(-2.0 * attenuation * thickness);
    const double entry = 1.0 - r_front * r_front;
    const double floor = 1e-6 * amplitude;
    double a = amplitude * entry * std::abs(r_back) * per_trip;
    for (int k = 1; k <= 400; ++k) {
        const double t = t_first + k * spacing;
        if (t > window + 6.0 * sigma || a < floor) break;
        add_lobe(samples, sample_rate, t, sigma, a);
        a *= std::abs(r_back) * std::abs(r_front) * per_trip;
    }
}

}  // namespace

std::string_view to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::Empty: return "Empty";
        case SceneKind::AirTarget: return "AirTarget";
        case SceneKind::ContactSlab: return "ContactSlab";
        case SceneKind::Container: return "Container";
    }
    return "?";
}

SceneKind parse_scene_kind(std::string_view text) {
    auto t = lower(text);
    if (t == "empty") return SceneKind::Empty;
    if (t == "airtarget") return SceneKind::AirTarget;
    if (t == "contactslab") return SceneKind::ContactSlab;
    if (t == "container") return SceneKind::Container;
    throw std::invalid_argument("unknown scene kind: " + std::string(text));
}

void SceneSpec::validate() const {
    if (!std::isfinite(distance) || distance < 0.0) throw std::domain_error("distance must be >= 0");
    if (!(slab_thickness > 0.0)) throw std::domain_error("slab thickness must be > 0");
    if (!(wall_thickness > 0.0) || !std::isfinite(wall_thickness))
        throw std::domain_error("wall thickness must be finite and > 0");
    if (!(content_depth > 0.0) || !std::isfinite(content_depth))
        throw std::domain_error("content depth must be finite and > 0");
    if (!std::isfinite(noise_std) || noise_std < 0.0) throw std::domain_error("noise_std must be >= 0");
    if (!std::isfinite(coupling) || coupling < 0.0) throw std::domain_error("coupling must be >= 0");
    if (!std::isfinite(stack_delay_offset)) throw std::domain_error("stack delay offset must be finite");
}

double attenuation_np_per_m(std::string_view material) {
    static const std::map<std::string, double> table = {
        {"acrylic", 23.0}, {"nylon", 32.0},  {"iron", 3.0},    {"wood", 60.0},    {"rubber", 90.0},
        {"water", 0.025},  {"oil", 8.0},     {"air", 18.0},    {"pdms", 30.0},    {"hgm-pdms", 150.0},
        {"epoxy", 40.0},   {"tungsten", 120.0}, {"pzt", 5.0},
    };
    auto it = table.find(lower(material));
    return it == table.end() ? 30.0 : it->second;
}

double lobe_sigma(int pulse_count) {
    // Rectangular burst of N cycles has RMS width N / (f sqrt 12); add the transducer's own ring.
    const double burst = static_cast<double>(pulse_count) / kCenterFrequency / std::sqrt(12.0);
    return std::hypot(burst, kTransducerLobeSigma);
}

std::vector<double> ring_down(const TimingConfig& cfg) {
    std::vector<double> s(cfg.samples_per_frame());
    const double amp = kRingDownScale * cfg.pulse_count * gain_linear(cfg.gain_db);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double t = static_cast<double>(i) / cfg.adc_rate;
        s[i] = kEnvelopeFloor + amp * std::exp(-t / kRingDownTau);
    }
    return s;
}

EchoFrame synthesize_air_echo(const SceneSpec& scene, const TimingConfig& cfg,
                              const acoustics::MaterialRegistry& registry) {
    if (scene.kind != SceneKind::AirTarget) throw std::invalid_argument("synthesize_air_echo needs an AirTarget scene");
    scene.validate();
    const auto& air = registry.lookup("Air");
    const auto& target = registry.lookup(scene.target);

    EchoFrame frame = blank_frame(cfg);
    const double center = 2.0 * scene.distance / air.sound_speed;
    const double window = static_cast<double>(frame.samples.size()) / frame.sample_rate;
    if (center <= window) {
        const double d = std::max(scene.distance, kMinSpreadingDistance);
        const double r = std::abs(acoustics::reflection_coefficient(air.impedance, target.impedance));
        const double amp = kAirEchoScale * r * cfg.pulse_count * gain_linear(cfg.gain_db) / (d * d);
        add_lobe(frame.samples, frame.sample_rate, center, lobe_sigma(cfg.pulse_count), amp);
    }
    finish(frame, scene.noise_std, scene.seed);
    return frame;
}

EchoFrame synthesize_contact_echo(const SceneSpec& scene, const acoustics::LayerStack& stack,
                                  const TimingConfig& cfg, const acoustics::MaterialRegistry& registry) {
    if (scene.kind != SceneKind::ContactSlab && scene.kind != SceneKind::Container)
        throw std::invalid_argument("synthesize_contact_echo needs a ContactSlab or Container scene");
    scene.validate();

    EchoFrame frame = blank_frame(cfg);
    const double window = static_cast<double>(frame.samples.size()) / frame.sample_rate;
    const double sigma = lobe_sigma(cfg.pulse_count);
    const double amp = kContactEchoScale * cfg.pulse_count * gain_linear(cfg.gain_db) * scene.coupling;
    const double t_base = stack.round_trip_time() + scene.stack_delay_offset;
    const double z_outer = stack.outer_material().impedance;

    const auto& first = registry.lookup(scene.kind == SceneKind::ContactSlab ? scene.slab_material : scene.wall_material);
    const double thickness = scene.kind == SceneKind::ContactSlab ? scene.slab_thickness : scene.wall_thickness;
    const double r_front = acoustics::reflection_coefficient(z_outer, first.impedance);
    const double alpha = attenuation_np_per_m(first.name);

    // Interface echo from the sensor face itself.
    add_lobe(frame.samples, frame.sample_rate, t_base, sigma, amp * std::abs(r_front));

    if (scene.kind == SceneKind::ContactSlab) {
        const double r_back = acoustics::reflection_coefficient(first.impedance, registry.lookup("Air").impedance);
        add_reverberation(frame.samples, frame.sample_rate, window, t_base, amp, r_front, r_back, thickness,
                          first.sound_speed, alpha, sigma);
    } else {
        const auto& content = registry.lookup(scene.content);
        const double r_wc = acoustics::reflection_coefficient(first.impedance, content.impedance);
        add_reverberation(frame.samples, frame.sample_rate, window, t_base, amp, r_front, r_wc, thickness,
                          first.sound_speed, alpha, sigma);

        // Far-wall echoes through the content.
        const double wall_trip = std::exp(-2.0 * alpha * thickness);
        const double content_trip = std::exp(-2.0 * attenuation_np_per_m(content.name) * scene.content_depth);
        const double r_far = std::min(1.0, std::abs(r_wc) + (1.0 - r_wc * r_wc) * wall_trip);
        const double t_wall = t_base + 2.0 * thickness / first.sound_speed;
        const double spacing = 2.0 * scene.content_depth / content.sound_speed;
        double a = amp * (1.0 - r_front * r_front) * (1.0 - r_wc * r_wc) * wall_trip * r_far * content_trip;
        for (int m = 1; m <= 3; ++m) {
            const double t = t_wall + m * spacing;
            if (t > window + 6.0 * sigma) break;
            add_lobe(frame.samples, frame.sample_rate, t, sigma, a);
            a *= r_far * std::abs(r_wc) * content_trip;
        }
    }

    finish(frame, scene.noise_std, scene.seed);
    return frame;
}

EchoFrame synthesize(const SceneSpec& scene, const TimingConfig& cfg, const acoustics::MaterialRegistry& registry) {
    switch (scene.kind) {
        case SceneKind::Empty: {
            scene.validate();
            EchoFrame f = blank_frame(cfg);
            finish(f, scene.noise_std, scene.seed);
            return f;
        }
        case SceneKind::AirTarget: return synthesize_air_echo(scene, cfg, registry);
        case SceneKind::ContactSlab:
        case SceneKind::Container:
            return synthesize_contact_echo(scene, acoustics::default_sensor_stack(registry.lookup("Air")), cfg,
                                           registry);
    }
    throw std::invalid_argument("unhandled scene kind");
}

std::vector<double> envelope(std::span<const double> raw, double sample_rate, double cutoff_hz) {
    if (!(sample_rate > 0.0) || !(cutoff_hz > 0.0)) throw std::invalid_argument("rates must be positive");
    const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz / sample_rate);
    std::vector<double> out(raw.size());
    double y = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        y += alpha * (std::abs(raw[i]) - y);
        out[i] = y;
    }
    return out;
}

KeyValueConfig scene_to_config(const SceneSpec& scene) {
    KeyValueConfig c;
    c.set("kind", std::string(to_string(scene.kind)));
    c.set("distance_m", format_double(scene.distance));
    c.set("target", scene.target);
    c.set("slab_material", scene.slab_material);
    c.set("slab_thickness_m", format_double(scene.slab_thickness));
    c.set("wall_material", scene.wall_material);
    c.set("wall_thickness_m", format_double(scene.wall_thickness));
    c.set("content", scene.content);
    c.set("content_depth_m", format_double(scene.content_depth));
    c.set("coupling", format_double(scene.coupling));
    c.set("stack_delay_offset_s", format_double(scene.stack_delay_offset));
    c.set("noise_std", format_double(scene.noise_std));
    c.set("seed", std::to_string(scene.seed));
    return c;
}

SceneSpec scene_from_config(const KeyValueConfig& c) {
    SceneSpec s;
    try {
        s.kind = parse_scene_kind(c.get_string("kind", "Empty"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    s.distance = c.get_double("distance_m", s.distance);
    s.target = c.get_string("target", s.target);
    s.slab_material = c.get_string("slab_material", s.slab_material);
    s.slab_thickness = c.get_double("slab_thickness_m", s.slab_thickness);
    s.wall_material = c.get_string("wall_material", s.wall_material);
    s.wall_thickness = c.get_double("wall_thickness_m", s.wall_thickness);
    s.content = c.get_string("content", s.content);
    s.content_depth = c.get_double("content_depth_m", s.content_depth);
    s.coupling = c.get_double("coupling", s.coupling);
    s.stack_delay_offset = c.get_double("stack_delay_offset_s", s.stack_delay_offset);
    s.noise_std = c.get_double("noise_std", s.noise_std);
    const auto seed = c.get_string("seed", "0");
    try {
        s.seed = std::stoull(seed);
    } catch (const std::exception&) {
        throw ConfigError("invalid seed: " + seed);
    }
    try {
        s.validate();
    } catch (const std::domain_error& e) {
        throw ConfigError(e.what());
    }
    return s;
}

void write_frames_csv(std::ostream& out, std::span<const EchoFrame> frames) {
    std::size_t width = 0;
    for (const auto& f : frames) width = std::max(width, f.samples.size());
    out << "t0,sample_rate,gain_db,pulse_count,mode";
    for (std::size_t i = 0; i < width; ++i) out << ",s" << i;
    out << '\n';
    for (const auto& f : frames) {
        out << format_double(f.t0) << ',' << format_double(f.sample_rate) << ',' << format_double(f.gain_db) << ','
            << f.pulse_count << ',' << to_string(f.mode);
        for (double s : f.samples) out << ',' << format_double(s);
        out << '\n';
    }
}

}  // namespace ultratac::echo
