#include "ultratac/config.hpp"
#include "ultratac/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace ultratac;

int main(int argc, char** argv) {
    CLI::App app{"Ultrasound-augmented visuotactile sensor simulator"};
    std::string experiment, config_path, out_dir;
    std::uint64_t seed = 0;
    std::optional<double> noise;
    std::optional<int> trials;
    app.add_option("experiment", experiment, "proximity | material | dualmodal | inspection")->required();
    app.add_option("--config", config_path, "key = value experiment config")->required();
    app.add_option("--seed", seed, "master seed")->required();
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--noise", noise, "echo noise standard deviation (V)");
    app.add_option("--trials", trials, "trials per grid point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const auto kind = experiments::parse_experiment(experiment);
        auto cfg = experiments::ExperimentConfig::from_config(KeyValueConfig::load(config_path), kind);
        cfg.seed = seed;
        if (noise) cfg.noise_std = *noise;
        if (trials) cfg.trials = *trials;
        cfg.output_dir = out_dir;
        // A relative scenario path is relative to the config file.
        if (cfg.scenario_file && cfg.scenario_file->is_relative())
            cfg.scenario_file = std::filesystem::path(config_path).parent_path() / *cfg.scenario_file;
        cfg.validate();

        const auto result = experiments::run_experiment(cfg);
        for (const auto& [name, value] : result.metrics) std::cout << name << " = " << format_double(value) << '\n';
        for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
