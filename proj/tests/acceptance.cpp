// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "ultratac/acoustics.hpp"
#include "ultratac/experiments.hpp"
#include "ultratac/fusion.hpp"
#include "ultratac/rng.hpp"
#include "ultratac/signal.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

using namespace ultratac;
namespace fs = std::filesystem;
namespace ex = ultratac::experiments;

namespace {

// Pinned tolerances.
constexpr double kMinR2 = 0.99;
constexpr double kMaxPointErrorCm = 0.5;
constexpr double kProximitySeconds = 30.0;
constexpr double kOneSampleCm = 343.0 / (2.0 * 2.4e6) * 100.0;
constexpr double kMinMaterialAccuracy = 0.95;
constexpr double kMaterialSeconds = 60.0;
constexpr double kMinDualAccuracy = 0.90;
constexpr int kMinInspectionCorrect = 8;
constexpr double kIdentityTol = 1e-9;
constexpr double kMinPdmsAirReflection = 0.999;
constexpr double kQuarterWaveMm = 0.70;
constexpr double kQuarterWaveTolMm = 0.005;
constexpr double kMaxSkew = 0.0167;
constexpr double kConvergeTol = 1e-6;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

template <class... A>
std::string fmt(const char* f, A... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Timed {
    ex::ExperimentResult result;
    double seconds;
};

Timed run(ex::ExperimentConfig cfg, const fs::path& out) {
    cfg.output_dir = out;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = ex::run_experiment(cfg);
    return {std::move(r), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Count of CSVs that differ between two runs of the same experiment.
int csv_differences(const ex::ExperimentResult& a, const ex::ExperimentResult& b) {
    if (a.files.size() != b.files.size()) return 1;
    int diff = 0;
    for (std::size_t i = 0; i < a.files.size(); ++i)
        if (a.files[i].extension() == ".csv")
            diff += a.files[i].filename() != b.files[i].filename() || slurp(a.files[i]) != slurp(b.files[i]);
    return diff;
}

double variance(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "ultratac_acceptance";
    fs::remove_all(root);
    const std::uint64_t seed = 1;

    // 1. Proximity, default configuration, single thread.
    auto prox_cfg = ex::ExperimentConfig::defaults(ex::Experiment::Proximity);
    prox_cfg.seed = seed;
    prox_cfg.threads = 1;
    const auto prox = run(prox_cfg, root / "proximity");
    {
        const double r2 = *prox.result.metric("r2"), err = *prox.result.metric("max_point_mean_abs_error_cm");
        report(1, r2 >= kMinR2 && err <= kMaxPointErrorCm && prox.seconds <= kProximitySeconds,
               fmt("proximity R2 = %.6f (>= %.2f), worst per-point mean |err| = %.4f cm (<= %.1f), %.1f s (<= %.0f)", r2,
                   kMinR2, err, kMaxPointErrorCm, prox.seconds, kProximitySeconds));
    }

    // 2. Noiseless ranging.
    {
        auto cfg = prox_cfg;
        cfg.noise_std = 0.0;
        cfg.threads = 0;
        const auto r = run(cfg, root / "proximity_noiseless").result;
        const double worst = *r.metric("max_abs_error_cm");
        report(2, worst <= kOneSampleCm && *r.metric("invalid_estimates") == 0.0,
               fmt("noiseless worst |err| = %.2e cm over %.0f estimates (<= %.4f cm)", worst, *r.metric("estimates"),
                   kOneSampleCm));
    }

    // 3. Material classification, single thread.
    auto mat_cfg = ex::ExperimentConfig::defaults(ex::Experiment::Material);
    mat_cfg.seed = seed;
    mat_cfg.threads = 1;
    const auto mat = run(mat_cfg, root / "material");
    {
        const double acc = *mat.result.metric("accuracy");
        report(3, acc >= kMinMaterialAccuracy && mat.seconds <= kMaterialSeconds,
               fmt("material accuracy = %.4f (>= %.2f), %.1f s (<= %.0f)", acc, kMinMaterialAccuracy, mat.seconds,
                   kMaterialSeconds));
    }

    // 4. Dual-modal, its noiseless variant, and the nine-container inspection.
    auto dual_cfg = ex::ExperimentConfig::defaults(ex::Experiment::DualModal);
    dual_cfg.seed = seed;
    const auto dual = run(dual_cfg, root / "dualmodal");
    auto insp_cfg = ex::ExperimentConfig::defaults(ex::Experiment::Inspection);
    insp_cfg.seed = seed;
    const auto insp = run(insp_cfg, root / "inspection");
    {
        auto clean = dual_cfg;
        clean.noise_std = 0.0;
        clean.texture_noise = 0.0;
        clean.camera_noise = 0.0;
        const double acc = *dual.result.metric("accuracy");
        const double clean_acc = *run(clean, root / "dualmodal_noiseless").result.metric("accuracy");
        const double correct = *insp.result.metric("correct");
        report(4, acc >= kMinDualAccuracy && clean_acc == 1.0 && correct >= kMinInspectionCorrect,
               fmt("dual-modal accuracy = %.4f (>= %.2f), noiseless = %.4f (= 1), inspection %.0f/%.0f correct (>= %d)",
                   acc, kMinDualAccuracy, clean_acc, correct, *insp.result.metric("containers"), kMinInspectionCorrect));
    }

    // 5. Acoustic identities.
    {
        Rng rng(mix_seed(5));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto log_u = [&](double lo, double hi) { return lo * std::pow(hi / lo, u(rng)); };
        double worst_qw = 0.0;
        const int pairs = 500;
        for (int i = 0; i < pairs; ++i) {
            const double z1 = log_u(1e-3, 100.0), z2 = log_u(1e-3, 100.0), c = log_u(300.0, 6000.0), f = log_u(1e5, 1e7);
            acoustics::LayerStack s;
            s.front_medium = {"a", z1, 1000.0};
            s.back_medium = {"b", z2, 1000.0};
            s.layers.push_back({{"m", acoustics::matching_impedance(z1, z2), c}, acoustics::quarter_wave_thickness(c, f)});
            worst_qw = std::max(worst_qw, std::abs(acoustics::stack_transmission(s, f).power_transmission - 1.0));
        }
        double worst_sum = 0.0;
        const int stacks = 2000;
        for (int i = 0; i < stacks; ++i) {
            acoustics::LayerStack s;
            s.front_medium = {"a", log_u(1e-3, 100.0), 1000.0};
            s.back_medium = {"b", log_u(1e-3, 100.0), 1000.0};
            for (int n = static_cast<int>(u(rng) * 7); n > 0; --n)
                s.layers.push_back({{"l", log_u(1e-3, 100.0), log_u(300.0, 6000.0)}, log_u(1e-6, 1e-2)});
            const auto p = acoustics::stack_transmission(s, log_u(1e5, 1e7));
            worst_sum = std::max(worst_sum, std::abs(p.power_transmission + p.power_reflection - 1.0));
        }
        const auto& reg = acoustics::builtin_materials();
        const double r = std::abs(acoustics::reflection_coefficient(reg.lookup("PDMS").impedance, reg.lookup("Air").impedance));
        report(5, worst_qw <= kIdentityTol && worst_sum <= kIdentityTol && r >= kMinPdmsAirReflection,
               fmt("quarter-wave |T-1| <= %.1e over %d pairs, |T+R-1| <= %.1e over %d stacks (tol %.0e), |r(PDMS,Air)| = %.6f (>= %.3f)",
                   worst_qw, pairs, worst_sum, stacks, kIdentityTol, r, kMinPdmsAirReflection));
    }

    // 6. Quarter-wave thickness of the acrylic matching layer.
    {
        const double mm = acoustics::quarter_wave_thickness(2800.0, 1e6) * 1e3;
        report(6, std::abs(mm - kQuarterWaveMm) <= kQuarterWaveTolMm,
               fmt("quarter_wave_thickness(2800 m/s, 1 MHz) = %.4f mm (%.2f +- %.3f)", mm, kQuarterWaveMm, kQuarterWaveTolMm));
    }

    // 7. Mode state machine over random touch sequences.
    {
        Rng rng(mix_seed(7));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int sequences = 1000;
        int off_boundary = 0, bad_pulse = 0, late = 0;
        std::size_t transitions = 0;
        for (int s = 0; s < sequences; ++s) {
            fusion::ModeController ctl;
            const double p_flip = 0.02 + 0.3 * u(rng);
            bool touch = u(rng) < 0.5;
            // Camera observations at 30 Hz with uniform timing jitter inside each frame slot.
            std::vector<std::pair<double, bool>> obs;
            for (int k = 0; k < 90; ++k) {
                if (u(rng) < p_flip) touch = !touch;
                obs.emplace_back((k + 0.9 * u(rng)) * kCameraPeriod, touch);
            }
            std::size_t next = 0;
            for (std::size_t c = 0; c <= 160; ++c) {
                const double b = ctl.boundary_time(c);
                for (; next < obs.size() && obs[next].first <= b; ++next) ctl.observe_touch(obs[next].first, obs[next].second);
                ctl.advance_to(b);
                const int pulses = ctl.timing().pulse_count;
                bad_pulse += pulses != (ctl.mode() == SensorMode::MaterialDetection ? 20 : 5);
                // Within one cycle every observation up to this boundary is reflected in the mode.
                const bool latest = next > 0 && obs[next - 1].second;
                late += (ctl.mode() == SensorMode::MaterialDetection) != latest;
            }
            for (const auto& tr : ctl.transitions()) {
                const double k = tr.time / kCyclePeriod;
                off_boundary += std::abs(k - std::round(k)) > 1e-9 || std::abs(tr.time - ctl.boundary_time(tr.cycle)) > 1e-12;
            }
            transitions += ctl.transitions().size();
        }
        report(7, off_boundary == 0 && bad_pulse == 0 && late == 0,
               fmt("%d sequences, %zu transitions: %d off-boundary, %d pulse/mode mismatches, %d boundaries lagging > 1 cycle",
                   sequences, transitions, off_boundary, bad_pulse, late));
    }

    // 8. Stream pairing at 50 / 30 Hz.
    {
        const std::size_t n = 10000;
        std::vector<double> us(n), cam;
        for (std::size_t k = 0; k < n; ++k) us[k] = static_cast<double>(k) * kCyclePeriod;
        for (std::size_t k = 0; static_cast<double>(k) * kCameraPeriod <= us.back() + kCameraPeriod; ++k)
            cam.push_back(static_cast<double>(k) * kCameraPeriod);
        const auto pairs = fusion::sync_streams(us, cam);
        double worst = 0.0;
        std::size_t unpaired = 0;
        for (const auto& p : pairs) {
            if (!p.paired()) ++unpaired;
            worst = std::max(worst, std::abs(p.skew));
        }
        report(8, pairs.size() == n && unpaired == 0 && worst <= kMaxSkew,
               fmt("%zu ultrasound frames -> %zu pairs, %zu unpaired, max |skew| = %.3f ms (<= %.1f)", n, pairs.size(),
                   unpaired, worst * 1e3, kMaxSkew * 1e3));
    }

    // 9. Kalman smoothing and convergence.
    {
        int reduced = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            Rng rng(mix_seed(900 + s));
            const double sigma = 0.005 + 0.195 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            std::normal_distribution<double> noise(0.0, sigma);
            signal::KalmanFrameFilter kf(signal::kalman_params_for_noise(sigma));
            std::vector<double> in, out;
            for (int i = 0; i < 500; ++i) {
                echo::EchoFrame f;
                f.samples = {0.8 + noise(rng)};
                in.push_back(f.samples[0]);
                out.push_back(kf.update(f).samples[0]);
            }
            reduced += variance(out) < variance(in);
        }
        signal::KalmanFrameFilter kf(signal::kalman_params_for_noise(0.0));
        echo::EchoFrame start, level;
        start.samples.assign(16, 0.0);
        level.samples.assign(16, 0.55);
        kf.update(start);
        double err = 0.0;
        for (int i = 0; i < 50; ++i) {
            const auto o = kf.update(level);
            err = 0.0;
            for (double v : o.samples) err = std::max(err, std::abs(v - 0.55));
        }
        report(9, reduced == 20 && err < kConvergeTol,
               fmt("variance reduced on %d/20 seeds, noiseless step error after 50 frames = %.2e (< %.0e)", reduced, err,
                   kConvergeTol));
    }

    // 10. Byte-identical reruns, on a different worker count.
    {
        int diff = 0;
        auto again = [&](ex::ExperimentConfig cfg, const Timed& first, const char* dir) {
            cfg.threads = cfg.threads == 1 ? 3 : 1;
            diff += csv_differences(first.result, run(cfg, root / dir).result);
        };
        again(prox_cfg, prox, "proximity_rerun");
        again(mat_cfg, mat, "material_rerun");
        again(dual_cfg, dual, "dualmodal_rerun");
        again(insp_cfg, insp, "inspection_rerun");
        report(10, diff == 0, fmt("reran all four experiments: %d CSV files differ", diff));
    }

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
