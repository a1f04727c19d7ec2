#pragma once

// Touch-triggered dual-pathway controller: mode state machine, 50 Hz / 30 Hz stream
// pairing, and scripted end-to-end timelines.

#include "ultratac/echo.hpp"
#include "ultratac/gbdt.hpp"
#include "ultratac/signal.hpp"
#include "ultratac/texture.hpp"
#include "ultratac/timing.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ultratac::fusion {

struct TactileFrame {
    ml::GrayImage image;
    double timestamp = 0.0;      // s
    double contact_score = 0.0;  // mean |frame - baseline|, set by detect_touch
};

inline constexpr double kDefaultTouchThreshold = 0.02;

/// Contact iff mean |frame - baseline| > threshold. Stores the mean in frame.contact_score.
/// Throws std::invalid_argument on a dimension mismatch.
bool detect_touch(TactileFrame& frame, const TactileFrame& baseline, double threshold = kDefaultTouchThreshold);

struct ModeStep {
    SensorMode mode;
    TimingConfig timing;
};

/// Target mode for the next cycle: touch selects material detection, no touch proximity.
ModeStep step_mode(SensorMode state, bool touch);

struct ModeTransition {
    double time = 0.0;  // s, always a cycle boundary
    std::size_t cycle = 0;
    SensorMode from = SensorMode::Proximity;
    SensorMode to = SensorMode::Proximity;
};

/// Owns the active mode. Touch observations are latched and only acted on at cycle
/// boundaries start + k * period; a change needs `debounce_cycles` consecutive boundaries
/// that agree.
class ModeController {
public:
    explicit ModeController(int debounce_cycles = 1, double cycle_period = kCyclePeriod, double start = 0.0);

    /// Processes boundaries strictly before `t` with the previous flag, then latches `touch`.
    void observe_touch(double t, bool touch);
    /// Processes every boundary <= t. Returns the transitions it produced.
    std::vector<ModeTransition> advance_to(double t);

    SensorMode mode() const { return mode_; }
    TimingConfig timing() const { return timing_for(mode_); }
    bool touch() const { return touch_; }
    std::size_t next_cycle() const { return next_cycle_; }
    double boundary_time(std::size_t cycle) const { return start_ + static_cast<double>(cycle) * period_; }
    const std::vector<ModeTransition>& transitions() const { return log_; }

private:
    void process_boundary(std::vector<ModeTransition>& out);

    int debounce_;
    double period_;
    double start_;
    SensorMode mode_ = SensorMode::Proximity;
    bool touch_ = false;
    int agree_ = 0;
    std::size_t next_cycle_ = 0;
    std::vector<ModeTransition> log_;
};

struct SyncedPair {
    std::size_t ultrasound = 0;           // index into the ultrasound stream
    std::optional<std::size_t> tactile;   // empty when flagged unpaired
    double skew = 0.0;                    // s, camera time minus ultrasound time
    bool paired() const { return tactile.has_value(); }
};

inline constexpr double kStallPeriods = 3.0;

/// Pairs every ultrasound timestamp with the nearest camera timestamp among those at most
/// one camera period ahead of it (ties go to the earlier camera frame). A best match more
/// than three camera periods away, or no candidate at all, leaves the frame unpaired.
/// Both inputs must be non-decreasing; throws std::invalid_argument otherwise.
std::vector<SyncedPair> sync_streams(std::span<const double> ultrasound_times, std::span<const double> camera_times,
                                     double camera_period = kCameraPeriod);

std::vector<SyncedPair> sync_streams(std::span<const echo::EchoFrame> ultrasound, std::span<const TactileFrame> camera,
                                     double camera_period = kCameraPeriod);

// ---------------------------------------------------------------------------------------
// Contact sampling shared by the material pathway and its training data.

struct PlacementJitter {
    double coupling = 0.05;          // relative, uniform +-
    double thickness = 0.01;         // relative, uniform +-
    double stack_delay = 0.2e-6;     // s, uniform +-
};

/// Draws one placement of `base` (coupling, wall/slab thickness, membrane delay).
echo::SceneSpec jitter_placement(echo::SceneSpec base, const PlacementJitter& jitter, std::uint64_t seed);

inline constexpr int kMaterialFramesPerSample = 5;

/// Acquires `frames` material-mode cycles of `scene` (noise seeds derived from scene.seed),
/// Kalman-filters them and returns the spectral features of the last filtered frame.
signal::SpectralFeatures material_sample(const echo::SceneSpec& scene, double noise_std,
                                         int frames = kMaterialFramesPerSample,
                                         const acoustics::MaterialRegistry& registry = acoustics::builtin_materials());

// ---------------------------------------------------------------------------------------
// Scripted timelines.

struct ScenarioRow {
    double time = 0.0;                 // s
    std::optional<double> distance;    // m; empty with contact = false means nothing in range
    bool contact = false;
    std::string content = "Water";
    ml::Pattern pattern = ml::Pattern::Circle;
};

struct SceneState {
    std::optional<double> distance;
    bool contact = false;
    std::string content;
    ml::Pattern pattern = ml::Pattern::Circle;
};

/// Rows in time order. Between two distance rows the distance is interpolated linearly;
/// otherwise the last row at or before t holds.
struct Scenario {
    std::vector<ScenarioRow> rows;
    double duration = 4.0;              // s
    std::uint64_t seed = 1;
    double echo_noise = 0.01;           // V
    double camera_noise = 0.01;         // tactile image noise
    std::string wall_material = "Plastic";
    double wall_thickness = 0.002;      // m
    double content_depth = 0.040;       // m
    double touch_threshold = kDefaultTouchThreshold;
    int debounce_cycles = 1;
    int reference_frames = 10;
    int image_size = 64;

    SceneState at(double t) const;
    /// Throws ConfigError on unordered rows, negative distances or bad directives.
    void validate() const;
};

/// Text format: `key = value` directives and `time_ms distance_m|contact|none content pattern` rows;
/// `#` starts a comment. Throws ConfigError.
Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::string& path);
void write_scenario(std::ostream& out, const Scenario& scenario);

/// Approach from 8 cm to 3 cm over 0-2 s, contact from 2 s to 4 s.
Scenario inspection_scenario(const std::string& content, ml::Pattern pattern, std::uint64_t seed);

struct FusionModels {
    ml::TextureClassifier texture;   // labels are pattern names
    ml::GbdtModel content;           // labels are content names, spectral features in
};

struct FusionTraining {
    std::vector<std::string> contents{"Air", "Water", "Oil"};
    std::vector<ml::Pattern> patterns{ml::Pattern::Circle, ml::Pattern::Rectangle, ml::Pattern::Hexagon};
    int samples_per_class = 60;
    std::string wall_material = "Plastic";
    double wall_thickness = 0.002;
    double content_depth = 0.040;
    double echo_noise = 0.01;
    double camera_noise = 0.01;
    std::uint64_t seed = 7;
    ml::GbdtHyper hyper{};
};

FusionModels train_fusion_models(const FusionTraining& training);

struct EventLogEntry {
    double time = 0.0;  // s
    SensorMode mode = SensorMode::Proximity;
    int pulse_count = kProximityPulses;
    std::string event;
    std::string payload;
};

struct Verdict {
    ml::Pattern pattern;
    std::string content;
};

struct TimelineResult {
    std::vector<EventLogEntry> events;
    std::vector<ModeTransition> transitions;
    std::optional<Verdict> verdict;  // empty when material mode was never entered
};

/// Replays the scenario cycle by cycle. Deterministic in the scenario and models.
TimelineResult run_timeline(const Scenario& scenario, const FusionModels& models,
                            const acoustics::MaterialRegistry& registry = acoustics::builtin_materials());

/// Header `time_ms,mode,pulse_count,event,payload`.
void write_event_log_csv(std::ostream& out, std::span<const EventLogEntry> events);

}  // namespace ultratac::fusion
