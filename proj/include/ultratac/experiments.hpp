#pragma once

// Desk-scale reproductions of the four sensor experiments. Each run writes CSV tables
// and an SVG plot into the output directory and returns its headline metrics.

#include "ultratac/acoustics.hpp"
#include "ultratac/config.hpp"
#include "ultratac/gbdt.hpp"
#include "ultratac/texture.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ultratac::experiments {

enum class Experiment { Proximity, Material, DualModal, Inspection };

std::string_view to_string(Experiment e);
/// "proximity", "material", "dualmodal", "inspection". Throws ConfigError.
Experiment parse_experiment(std::string_view text);

inline constexpr double kDefaultProximityNoise = 0.02;
inline constexpr double kDefaultMaterialNoise = 0.02;
inline constexpr double kDefaultTextureNoise = 0.15;
inline constexpr double kDefaultCameraNoise = 0.01;

struct ExperimentConfig {
    Experiment experiment = Experiment::Proximity;
    std::uint64_t seed = 1;
    int trials = 10;
    double noise_std = kDefaultProximityNoise;  // echo noise, V
    std::filesystem::path output_dir = ".";
    unsigned threads = 0;                       // 0: ULTRATAC_SIM_THREADS or hardware concurrency

    std::vector<std::string> materials;         // proximity targets / material classes
    std::vector<double> distances;              // m, proximity grid
    int empty_frames = 20;                      // proximity reference stage
    int target_frames = 15;                     // proximity frames per trial

    int samples_per_class = 200;
    double train_fraction = 0.8;
    double slab_thickness = 0.010;              // m
    int frames_per_sample = 5;                  // 100 ms at 50 Hz
    ml::GbdtHyper hyper{};

    double texture_noise = kDefaultTextureNoise;
    int image_size = 64;

    std::vector<std::string> contents;          // inspection
    std::vector<std::string> patterns;          // dual-modal and inspection
    double camera_noise = kDefaultCameraNoise;
    int training_per_class = 60;                // inspection model training
    std::optional<std::filesystem::path> scenario_file;

    acoustics::MaterialRegistry registry = acoustics::builtin_materials();

    /// Paper-scale defaults for `e`.
    static ExperimentConfig defaults(Experiment e);
    /// Starts from defaults(e) and applies the keys present in `config`. Throws ConfigError.
    static ExperimentConfig from_config(const KeyValueConfig& config, Experiment e);
    /// Throws ConfigError.
    void validate() const;
};

struct ExperimentResult {
    std::vector<std::pair<std::string, double>> metrics;  // in report order
    std::vector<std::filesystem::path> files;

    std::optional<double> metric(const std::string& name) const;
};

ExperimentResult run_proximity(const ExperimentConfig& cfg);
ExperimentResult run_material(const ExperimentConfig& cfg);
ExperimentResult run_dualmodal(const ExperimentConfig& cfg);
ExperimentResult run_inspection(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// ULTRATAC_SIM_THREADS when set to a positive integer, else hardware concurrency (>= 1).
unsigned default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must only touch slot i.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = slope x + intercept. Needs two distinct x values.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Display labels for a material list; repeats get "#2", "#3", ... appended.
std::vector<std::string> unique_labels(const std::vector<std::string>& names);

}  // namespace ultratac::experiments
