#pragma once

// Preprocessing and feature extraction on envelope frames.

#include "ultratac/echo.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ultratac::signal {

struct KalmanParams {
    double process_noise_q = 1e-4;
    double measurement_noise_r = 4e-4;
    double initial_covariance = 1e-2;

    void validate() const;
};

/// r = sigma^2, q = r / 4, P0 = r (floored so a noiseless stream still has a defined gain).
KalmanParams kalman_params_for_noise(double noise_std);

/// Random-walk steady-state Kalman gain for the given parameters.
double steady_state_gain(const KalmanParams& params);

/// One scalar filter per sample index, run across consecutive frames. The state at
/// each index starts from the first frame's value. Not thread-safe; one per stream.
class KalmanFrameFilter {
public:
    explicit KalmanFrameFilter(KalmanParams params);

    /// Returns the filtered copy of `frame`. Throws std::invalid_argument if the frame's
    /// length or sample rate differs from the first frame seen since the last reset.
    echo::EchoFrame update(const echo::EchoFrame& frame);
    void reset();

    double gain() const { return last_gain_; }
    std::size_t frames_seen() const { return frames_seen_; }

private:
    KalmanParams params_;
    std::vector<double> state_;
    double covariance_ = 0.0;
    double sample_rate_ = 0.0;
    double last_gain_ = 1.0;
    std::size_t frames_seen_ = 0;
};

std::vector<echo::EchoFrame> kalman_filter(std::span<const echo::EchoFrame> frames, const KalmanParams& params);

struct ReferenceFrame {
    std::vector<double> samples;
    double sample_rate = kAdcRate;
    /// Pooled per-frame deviation from the mean (unbiased); 0 for a single frame.
    double residual_std = 0.0;
    std::size_t frame_count = 0;
};

/// Pointwise mean of the given frames. Throws std::invalid_argument when empty or mismatched.
ReferenceFrame capture_reference(std::span<const echo::EchoFrame> frames);

struct DistanceEstimate {
    double distance = 0.0;        // m
    double peak_time = 0.0;       // s
    double peak_amplitude = 0.0;  // V, |difference| at the peak sample
    bool valid = false;
};

inline constexpr double kDetectionSigmas = 5.0;
inline constexpr double kMinDetectionThreshold = 1e-6;  // V

/// Threshold used by estimate_distance: max(5 x residual_std, 1 uV).
double detection_threshold(const ReferenceFrame& reference);

/// Difference against the reference, peak search strictly after `blind`, earliest
/// sample wins ties. The peak time is refined by a three-point log-parabola fit,
/// which is exact for a Gaussian lobe.
DistanceEstimate estimate_distance(const echo::EchoFrame& current, const ReferenceFrame& reference,
                                   double c_air = 343.0, double blind = echo::kBlindTime);

struct SpectralFeatures {
    double contrast = 0.0;   // dB
    double kurtosis = 0.0;
    double skewness = 0.0;
    double entropy = 0.0;    // bits
    double centroid = 0.0;   // Hz
    std::vector<double> band_energies;
    bool degenerate = false;

    /// contrast, kurtosis, skewness, entropy, centroid, band_energies...
    std::vector<double> to_vector() const;
    static std::vector<std::string> column_names(int n_bands);
};

inline constexpr int kDefaultBands = 6;
inline constexpr double kSpectralFloor = 1e-12;  // added to normalised power before taking dB

/// Features of a one-sided power spectrum; bin i sits at i * bin_hz. Bin 0 (DC) is
/// ignored: the envelope's mean level carries no spectral shape.
SpectralFeatures features_from_power(std::span<const double> power, double bin_hz, int n_bands = kDefaultBands);

/// One-sided power spectrum |X_k|^2 of a real signal, k = 0..N/2.
std::vector<double> power_spectrum(std::span<const double> samples);

SpectralFeatures spectral_features(const echo::EchoFrame& frame, int n_bands = kDefaultBands);

/// label,contrast,kurtosis,skewness,entropy,centroid,band_0,...
void write_features_csv_header(std::ostream& out, int n_bands);
void write_features_csv_row(std::ostream& out, const std::string& label, const SpectralFeatures& f);

}  // namespace ultratac::signal
