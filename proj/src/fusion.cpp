#include "ultratac/fusion.hpp"

#include "ultratac/config.hpp"
#include "ultratac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ultratac::fusion {

bool detect_touch(TactileFrame& frame, const TactileFrame& baseline, double threshold) {
    const auto& a = frame.image;
    const auto& b = baseline.image;
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("detect_touch: image size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) sum += std::abs(a.pixels[i] - b.pixels[i]);
    frame.contact_score = a.pixels.empty() ? 0.0 : sum / static_cast<double>(a.pixels.size());
    return frame.contact_score > threshold;
}

ModeStep step_mode(SensorMode, bool touch) {
    const auto mode = touch ? SensorMode::MaterialDetection : SensorMode::Proximity;
    return {mode, timing_for(mode)};
}

ModeController::ModeController(int debounce_cycles, double cycle_period, double start)
    : debounce_(debounce_cycles), period_(cycle_period), start_(start) {
    if (debounce_cycles < 1) throw std::invalid_argument("debounce_cycles must be >= 1");
    if (!(cycle_period > 0.0)) throw std::invalid_argument("cycle period must be > 0");
}

void ModeController::process_boundary(std::vector<ModeTransition>& out) {
    const auto target = step_mode(mode_, touch_).mode;
    if (target == mode_) {
        agree_ = 0;
    } else if (++agree_ >= debounce_) {
        ModeTransition tr{boundary_time(next_cycle_), next_cycle_, mode_, target};
        mode_ = target;
        agree_ = 0;
        log_.push_back(tr);
        out.push_back(tr);
    }
    ++next_cycle_;
}

void ModeController::observe_touch(double t, bool touch) {
    std::vector<ModeTransition> sink;
    while (boundary_time(next_cycle_) < t) process_boundary(sink);
    touch_ = touch;
}

std::vector<ModeTransition> ModeController::advance_to(double t) {
    std::vector<ModeTransition> out;
    while (boundary_time(next_cycle_) <= t) process_boundary(out);
    return out;
}

std::vector<SyncedPair> sync_streams(std::span<const double> us, std::span<const double> cam, double camera_period) {
    if (!(camera_period > 0.0)) throw std::invalid_argument("camera period must be > 0");
    if (!std::is_sorted(us.begin(), us.end()) || !std::is_sorted(cam.begin(), cam.end()))
        throw std::invalid_argument("sync_streams: timestamps must be non-decreasing");

    std::vector<SyncedPair> out;
    out.reserve(us.size());
    auto window_end = cam.begin();  // one past the last camera frame within the look-ahead
    for (std::size_t i = 0; i < us.size(); ++i) {
        const double t = us[i];
        const double horizon = t + camera_period;
        while (window_end != cam.end() && *window_end <= horizon) ++window_end;
        SyncedPair pair;
        pair.ultrasound = i;
        if (window_end != cam.begin()) {
            // Nearest frame is the first at or after t, or the earliest copy of the one before it.
            auto best = std::lower_bound(cam.begin(), window_end, t);
            if (best == window_end || (best != cam.begin() && t - *(best - 1) <= *best - t))
                best = std::lower_bound(cam.begin(), best, *(best - 1));
            const double skew = *best - t;
            if (std::abs(skew) <= kStallPeriods * camera_period) {
                pair.tactile = static_cast<std::size_t>(best - cam.begin());
                pair.skew = skew;
            }
        }
        out.push_back(pair);
    }
    return out;
}

std::vector<SyncedPair> sync_streams(std::span<const echo::EchoFrame> ultrasound, std::span<const TactileFrame> camera,
                                     double camera_period) {
    std::vector<double> us(ultrasound.size()), cam(camera.size());
    std::transform(ultrasound.begin(), ultrasound.end(), us.begin(), [](const auto& f) { return f.t0; });
    std::transform(camera.begin(), camera.end(), cam.begin(), [](const auto& f) { return f.timestamp; });
    return sync_streams(us, cam, camera_period);
}

echo::SceneSpec jitter_placement(echo::SceneSpec s, const PlacementJitter& j, std::uint64_t seed) {
    Rng rng(mix_seed(seed));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    s.coupling *= 1.0 + j.coupling * u(rng);
    const double th = 1.0 + j.thickness * u(rng);
    if (std::isfinite(s.slab_thickness)) s.slab_thickness *= th;
    s.wall_thickness *= th;
    s.stack_delay_offset += j.stack_delay * u(rng);
    return s;
}

signal::SpectralFeatures material_sample(const echo::SceneSpec& scene, double noise_std, int frames,
                                         const acoustics::MaterialRegistry& registry) {
    if (frames < 1) throw std::invalid_argument("material_sample needs at least one frame");
    const auto cfg = timing_for(SensorMode::MaterialDetection);
    signal::KalmanFrameFilter kf(signal::kalman_params_for_noise(noise_std));
    echo::EchoFrame filtered;
    for (int f = 0; f < frames; ++f) {
        auto s = scene;
        s.noise_std = noise_std;
        s.seed = derive_seed(scene.seed, {static_cast<std::uint64_t>(f)});
        auto frame = echo::synthesize(s, cfg, registry);
        frame.t0 = f * cfg.cycle_period;
        filtered = kf.update(frame);
    }
    return signal::spectral_features(filtered);
}

// ---------------------------------------------------------------------------------------

SceneState Scenario::at(double t) const {
    SceneState st;
    if (rows.empty()) return st;
    std::size_t i = 0;
    while (i + 1 < rows.size() && rows[i + 1].time <= t) ++i;
    const auto& r = rows[i];
    st.contact = r.contact;
    st.content = r.content;
    st.pattern = r.pattern;
    st.distance = r.distance;
    if (r.distance && !r.contact && i + 1 < rows.size() && rows[i + 1].distance && !rows[i + 1].contact &&
        t >= r.time) {
        const auto& n = rows[i + 1];
        const double w = (t - r.time) / (n.time - r.time);
        st.distance = *r.distance + w * (*n.distance - *r.distance);
    }
    return st;
}

void Scenario::validate() const {
    if (rows.empty()) throw ConfigError("scenario has no rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (!std::isfinite(r.time) || r.time < 0.0) throw ConfigError("scenario row time must be >= 0");
        if (i > 0 && !(r.time > rows[i - 1].time)) throw ConfigError("scenario rows must be strictly increasing in time");
        if (r.distance && (!std::isfinite(*r.distance) || *r.distance < 0.0))
            throw ConfigError("scenario distance must be >= 0");
    }
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("scenario duration must be > 0");
    if (!(echo_noise >= 0.0) || !(camera_noise >= 0.0)) throw ConfigError("scenario noise must be >= 0");
    if (!(wall_thickness > 0.0) || !(content_depth > 0.0)) throw ConfigError("wall thickness and depth must be > 0");
    if (!(touch_threshold > 0.0)) throw ConfigError("touch_threshold must be > 0");
    if (debounce_cycles < 1) throw ConfigError("debounce_cycles must be >= 1");
    if (reference_frames < 1) throw ConfigError("reference_frames must be >= 1");
    if (image_size < 8) throw ConfigError("image_size must be >= 8");
}

namespace {

long long parse_int(const std::string& text, const std::string& what) {
    const double v = parse_double(text, what);
    if (v != std::floor(v)) throw ConfigError(what + " must be an integer");
    return static_cast<long long>(v);
}

}  // namespace

Scenario parse_scenario(std::istream& in) {
    Scenario sc;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "scenario line " + std::to_string(lineno);
        if (auto eq = line.find('='); eq != std::string::npos) {
            const auto key = trim(std::string_view(line).substr(0, eq));
            const auto value = trim(std::string_view(line).substr(eq + 1));
            if (key == "duration_ms") sc.duration = parse_double(value, key) / 1000.0;
            else if (key == "seed") sc.seed = static_cast<std::uint64_t>(parse_int(value, key));
            else if (key == "echo_noise") sc.echo_noise = parse_double(value, key);
            else if (key == "camera_noise") sc.camera_noise = parse_double(value, key);
            else if (key == "wall_material") sc.wall_material = value;
            else if (key == "wall_thickness_m") sc.wall_thickness = parse_double(value, key);
            else if (key == "content_depth_m") sc.content_depth = parse_double(value, key);
            else if (key == "touch_threshold") sc.touch_threshold = parse_double(value, key);
            else if (key == "debounce_cycles") sc.debounce_cycles = static_cast<int>(parse_int(value, key));
            else if (key == "reference_frames") sc.reference_frames = static_cast<int>(parse_int(value, key));
            else if (key == "image_size") sc.image_size = static_cast<int>(parse_int(value, key));
            else throw ConfigError(where + ": unknown directive '" + key + "'");
            continue;
        }
        std::istringstream fields(line);
        std::string time, where_to, content, pattern, extra;
        if (!(fields >> time >> where_to >> content >> pattern) || (fields >> extra))
            throw ConfigError(where + ": expected 'time_ms distance_m|contact|none content pattern'");
        ScenarioRow row;
        row.time = parse_double(time, "time_ms") / 1000.0;
        if (where_to == "contact") row.contact = true;
        else if (where_to != "none") row.distance = parse_double(where_to, "distance_m");
        row.content = content;
        try {
            row.pattern = ml::parse_pattern(pattern);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where + ": " + e.what());
        }
        sc.rows.push_back(row);
    }
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    return parse_scenario(in);
}

void write_scenario(std::ostream& out, const Scenario& sc) {
    out << "duration_ms = " << format_double(sc.duration * 1000.0) << '\n'
        << "seed = " << sc.seed << '\n'
        << "echo_noise = " << format_double(sc.echo_noise) << '\n'
        << "camera_noise = " << format_double(sc.camera_noise) << '\n'
        << "wall_material = " << sc.wall_material << '\n'
        << "wall_thickness_m = " << format_double(sc.wall_thickness) << '\n'
        << "content_depth_m = " << format_double(sc.content_depth) << '\n'
        << "touch_threshold = " << format_double(sc.touch_threshold) << '\n'
        << "debounce_cycles = " << sc.debounce_cycles << '\n'
        << "reference_frames = " << sc.reference_frames << '\n'
        << "image_size = " << sc.image_size << '\n';
    for (const auto& r : sc.rows) {
        out << format_double(r.time * 1000.0) << ' ';
        if (r.contact) out << "contact";
        else if (r.distance) out << format_double(*r.distance);
        else out << "none";
        out << ' ' << r.content << ' ' << ml::to_string(r.pattern) << '\n';
    }
}

Scenario inspection_scenario(const std::string& content, ml::Pattern pattern, std::uint64_t seed) {
    Scenario sc;
    sc.seed = seed;
    sc.duration = 4.0;
    sc.rows = {
        {0.0, 0.08, false, content, pattern},
        {1.98, 0.03, false, content, pattern},
        {2.0, std::nullopt, true, content, pattern},
    };
    return sc;
}

// ---------------------------------------------------------------------------------------

namespace {

constexpr double kImprintIntensity = 0.6;

ml::GrayImage noisy_blank(int size, double noise_std, std::uint64_t seed) {
    ml::GrayImage img(size, size);
    if (noise_std > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> n(0.0, noise_std);
        for (auto& p : img.pixels) p = std::clamp(n(rng), 0.0, 1.0);
    }
    return img;
}

echo::SceneSpec container_scene(const std::string& wall, double wall_thickness, const std::string& content,
                                double depth) {
    echo::SceneSpec s;
    s.kind = echo::SceneKind::Container;
    s.wall_material = wall;
    s.wall_thickness = wall_thickness;
    s.content = content;
    s.content_depth = depth;
    return s;
}

int majority(const std::vector<int>& votes, std::size_t classes) {
    std::vector<int> tally(classes, 0);
    for (int v : votes) ++tally[static_cast<std::size_t>(v)];
    return static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
}

}  // namespace

FusionModels train_fusion_models(const FusionTraining& t) {
    if (t.contents.size() < 2 || t.patterns.size() < 2) throw std::invalid_argument("need >= 2 contents and patterns");
    if (t.samples_per_class < 1) throw std::invalid_argument("samples_per_class must be >= 1");
    FusionModels models;

    std::vector<ml::GrayImage> images;
    std::vector<int> labels;
    std::vector<std::string> pattern_names;
    ml::RenderJitter jitter;
    jitter.noise_std = t.camera_noise;
    jitter.intensity = kImprintIntensity;
    for (std::size_t p = 0; p < t.patterns.size(); ++p) {
        pattern_names.emplace_back(ml::to_string(t.patterns[p]));
        // Draws are keyed by name so reordering the class list only permutes labels.
        const auto key = name_key(pattern_names.back());
        for (int i = 0; i < t.samples_per_class; ++i) {
            images.push_back(ml::render_augmented(t.patterns[p], jitter, derive_seed(t.seed, {1, key, static_cast<std::uint64_t>(i)})));
            labels.push_back(static_cast<int>(p));
        }
    }
    models.texture = ml::train_texture_classifier(images, labels, pattern_names, t.hyper);

    ml::Dataset content;
    content.label_names = t.contents;
    content.feature_names = signal::SpectralFeatures::column_names(signal::kDefaultBands);
    const auto registry = acoustics::builtin_materials();
    for (std::size_t c = 0; c < t.contents.size(); ++c)
        for (int i = 0; i < t.samples_per_class; ++i) {
            const auto seed = derive_seed(t.seed, {2, name_key(t.contents[c]), static_cast<std::uint64_t>(i)});
            auto scene = jitter_placement(container_scene(t.wall_material, t.wall_thickness, t.contents[c], t.content_depth),
                                          PlacementJitter{}, seed);
            scene.seed = mix_seed(seed);
            content.add(material_sample(scene, t.echo_noise, kMaterialFramesPerSample, registry).to_vector(),
                        static_cast<int>(c));
        }
    models.content = ml::train_gbdt(content, t.hyper);
    return models;
}

TimelineResult run_timeline(const Scenario& sc, const FusionModels& models,
                            const acoustics::MaterialRegistry& registry) {
    sc.validate();
    TimelineResult result;
    ModeController controller(sc.debounce_cycles);
    auto log = [&](double t, std::string event, std::string payload) {
        const auto timing = controller.timing();
        result.events.push_back({t, timing.mode, timing.pulse_count, std::move(event), std::move(payload)});
    };

    // Reference frames are recorded with nothing in range before the scenario starts.
    const auto prox = timing_for(SensorMode::Proximity);
    std::vector<echo::EchoFrame> empties;
    for (int k = 0; k < sc.reference_frames; ++k) {
        echo::SceneSpec s;
        s.noise_std = sc.echo_noise;
        s.seed = derive_seed(sc.seed, {2, static_cast<std::uint64_t>(k)});
        empties.push_back(echo::synthesize(s, prox, registry));
    }
    const auto reference = signal::capture_reference(empties);

    // One physical placement per run, for both the echo and the imprint.
    const auto placement_seed = derive_seed(sc.seed, {1});
    Rng pose(derive_seed(sc.seed, {5}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const ml::RenderJitter jit;
    ml::RenderParams imprint;
    imprint.size = sc.image_size;
    imprint.rotation = (2.0 * unit(pose) - 1.0) * jit.max_rotation;
    imprint.scale = jit.scale_min + (jit.scale_max - jit.scale_min) * unit(pose);
    imprint.offset_x = (2.0 * unit(pose) - 1.0) * jit.max_offset;
    imprint.offset_y = (2.0 * unit(pose) - 1.0) * jit.max_offset;
    imprint.intensity = kImprintIntensity;
    imprint.noise_std = sc.camera_noise;

    TactileFrame baseline{noisy_blank(sc.image_size, sc.camera_noise, derive_seed(sc.seed, {3})), 0.0, 0.0};

    signal::KalmanFrameFilter kf(signal::kalman_params_for_noise(sc.echo_noise));
    int material_frames = 0;
    bool touching = false;
    std::vector<int> texture_votes, content_votes;

    const auto n_us = static_cast<std::size_t>(std::floor(sc.duration / kCyclePeriod + 1e-9)) + 1;
    const auto n_cam = static_cast<std::size_t>(std::floor(sc.duration / kCameraPeriod + 1e-9)) + 1;
    std::size_t iu = 0, ic = 0;
    while (iu < n_us || ic < n_cam) {
        const double tu = iu < n_us ? controller.boundary_time(iu) : INFINITY;
        const double tc = ic < n_cam ? static_cast<double>(ic) * kCameraPeriod : INFINITY;
        if (tc <= tu) {
            const auto st = sc.at(tc);
            TactileFrame frame;
            frame.timestamp = tc;
            if (st.contact) {
                auto p = imprint;
                p.seed = derive_seed(sc.seed, {4, ic});
                frame.image = ml::render_pattern(st.pattern, p);
            } else {
                frame.image = noisy_blank(sc.image_size, sc.camera_noise, derive_seed(sc.seed, {4, ic}));
            }
            const bool touch = detect_touch(frame, baseline, sc.touch_threshold);
            controller.observe_touch(tc, touch);
            if (touch != touching) {
                log(tc, touch ? "touch_on" : "touch_off", format_fixed(frame.contact_score, 4));
                touching = touch;
            }
            if (touch && controller.mode() == SensorMode::MaterialDetection) {
                const int label = models.texture.predict(frame.image);
                texture_votes.push_back(label);
                log(tc, "texture", models.texture.label_names()[static_cast<std::size_t>(label)]);
            }
            ++ic;
            continue;
        }

        for (const auto& tr : controller.advance_to(tu)) {
            result.transitions.push_back(tr);
            kf.reset();
            material_frames = 0;
            log(tr.time, "mode_change", std::string(to_string(tr.from)) + "->" + std::string(to_string(tr.to)));
        }
        const auto cfg = controller.timing();
        const auto st = sc.at(tu);
        echo::SceneSpec scene;
        if (st.contact) {
            scene = container_scene(sc.wall_material, sc.wall_thickness, st.content, sc.content_depth);
            scene = jitter_placement(scene, PlacementJitter{}, placement_seed);
        } else if (st.distance) {
            scene.kind = echo::SceneKind::AirTarget;
            scene.distance = *st.distance;
            scene.target = sc.wall_material;
        }
        scene.noise_std = sc.echo_noise;
        scene.seed = derive_seed(sc.seed, {6, iu});
        auto frame = echo::synthesize(scene, cfg, registry);
        frame.t0 = tu;
        const auto filtered = kf.update(frame);
        if (cfg.mode == SensorMode::Proximity) {
            const auto est = signal::estimate_distance(filtered, reference);
            log(tu, "distance", est.valid ? format_fixed(est.distance * 100.0, 3) : "none");
        } else if (++material_frames >= kMaterialFramesPerSample) {
            const auto f = signal::spectral_features(filtered);
            const int label = models.content.predict(f.to_vector()).label;
            content_votes.push_back(label);
            log(tu, "content", models.content.label_names()[static_cast<std::size_t>(label)]);
        }
        ++iu;
    }

    if (!texture_votes.empty() && !content_votes.empty()) {
        const auto& pnames = models.texture.label_names();
        const auto& cnames = models.content.label_names();
        Verdict v{ml::parse_pattern(pnames[static_cast<std::size_t>(majority(texture_votes, pnames.size()))]),
                  cnames[static_cast<std::size_t>(majority(content_votes, cnames.size()))]};
        log(sc.duration, "verdict", std::string(ml::to_string(v.pattern)) + " " + v.content);
        result.verdict = v;
    } else {
        log(sc.duration, "incomplete", "material mode never produced a verdict");
    }
    return result;
}

void write_event_log_csv(std::ostream& out, std::span<const EventLogEntry> events) {
    out << "time_ms,mode,pulse_count,event,payload\n";
    for (const auto& e : events)
        out << format_fixed(e.time * 1000.0, 3) << ',' << to_string(e.mode) << ',' << e.pulse_count << ',' << e.event
            << ',' << e.payload << '\n';
}

}  // namespace ultratac::fusion
