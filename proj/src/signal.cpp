#include "ultratac/signal.hpp"

#include "ultratac/config.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>

namespace ultratac::signal {

void KalmanParams::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!ok(process_noise_q) || !ok(measurement_noise_r) || !ok(initial_covariance))
        throw std::invalid_argument("Kalman parameters must be finite and > 0");
}

KalmanParams kalman_params_for_noise(double noise_std) {
    const double r = std::max(noise_std * noise_std, 1e-12);
    return {0.25 * r, r, r};
}

double steady_state_gain(const KalmanParams& p) {
    p.validate();
    const double q = p.process_noise_q;
    const double r = p.measurement_noise_r;
    const double prior = 0.5 * (q + std::sqrt(q * q + 4.0 * q * r));
    return prior / (prior + r);
}

KalmanFrameFilter::KalmanFrameFilter(KalmanParams params) : params_(params) { params_.validate(); }

void KalmanFrameFilter::reset() {
    state_.clear();
    covariance_ = 0.0;
    sample_rate_ = 0.0;
    last_gain_ = 1.0;
    frames_seen_ = 0;
}

echo::EchoFrame KalmanFrameFilter::update(const echo::EchoFrame& frame) {
    if (frames_seen_ == 0) {
        state_ = frame.samples;
        sample_rate_ = frame.sample_rate;
        covariance_ = params_.initial_covariance;
        last_gain_ = 1.0;
        ++frames_seen_;
        return frame;
    }
    if (frame.samples.size() != state_.size() || frame.sample_rate != sample_rate_)
        throw std::invalid_argument("Kalman filter: frame shape differs from the stream's first frame");

    // Every index shares the same prior, so the covariance and gain are scalars.
    const double prior = covariance_ + params_.process_noise_q;
    const double gain = prior / (prior + params_.measurement_noise_r);
    covariance_ = (1.0 - gain) * prior;
    last_gain_ = gain;
    for (std::size_t i = 0; i < state_.size(); ++i) state_[i] += gain * (frame.samples[i] - state_[i]);
    ++frames_seen_;

    echo::EchoFrame out = frame;
    out.samples = state_;
    return out;
}

std::vector<echo::EchoFrame> kalman_filter(std::span<const echo::EchoFrame> frames, const KalmanParams& params) {
    KalmanFrameFilter filter(params);
    std::vector<echo::EchoFrame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(filter.update(f));
    return out;
}

ReferenceFrame capture_reference(std::span<const echo::EchoFrame> frames) {
    if (frames.empty()) throw std::invalid_argument("capture_reference needs at least one frame");
    const std::size_t n = frames.front().samples.size();
    ReferenceFrame ref;
    ref.sample_rate = frames.front().sample_rate;
    ref.frame_count = frames.size();
    ref.samples.assign(n, 0.0);
    for (const auto& f : frames) {
        if (f.samples.size() != n || f.sample_rate != ref.sample_rate)
            throw std::invalid_argument("capture_reference: frames differ in shape");
        for (std::size_t i = 0; i < n; ++i) ref.samples[i] += f.samples[i];
    }
    const double k = static_cast<double>(frames.size());
    for (auto& s : ref.samples) s /= k;

    if (frames.size() > 1 && n > 0) {
        double ss = 0.0;
        for (const auto& f : frames)
            for (std::size_t i = 0; i < n; ++i) {
                const double d = f.samples[i] - ref.samples[i];
                ss += d * d;
            }
        ref.residual_std = std::sqrt(ss / (static_cast<double>(n) * (k - 1.0)));
    }
    return ref;
}

double detection_threshold(const ReferenceFrame& reference) {
    return std::max(kDetectionSigmas * reference.residual_std, kMinDetectionThreshold);
}

DistanceEstimate estimate_distance(const echo::EchoFrame& current, const ReferenceFrame& reference, double c_air,
                                   double blind) {
    if (current.samples.size() != reference.samples.size() || current.sample_rate != reference.sample_rate)
        throw std::invalid_argument("estimate_distance: frame and reference differ in shape");
    if (current.mode != SensorMode::Proximity)
        throw std::invalid_argument("estimate_distance: frame was not acquired in proximity mode");
    if (!(c_air > 0.0)) throw std::invalid_argument("speed of sound must be > 0");

    const auto& cur = current.samples;
    const auto& ref = reference.samples;
    const double fs = current.sample_rate;
    auto start = static_cast<std::size_t>(std::floor(blind * fs)) + 1;
    DistanceEstimate est;
    if (start >= cur.size()) return est;

    std::size_t best = start;
    double best_abs = -1.0;
    for (std::size_t i = start; i < cur.size(); ++i) {
        const double a = std::abs(cur[i] - ref[i]);
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }

    double offset = 0.0;
    if (best > start && best + 1 < cur.size()) {
        const double l = std::abs(cur[best - 1] - ref[best - 1]);
        const double m = best_abs;
        const double r = std::abs(cur[best + 1] - ref[best + 1]);
        if (l > 0.0 && r > 0.0) {
            const double ll = std::log(l), lm = std::log(m), lr = std::log(r);
            const double denom = ll - 2.0 * lm + lr;
            if (denom < 0.0) offset = std::clamp(0.5 * (ll - lr) / denom, -0.5, 0.5);
        }
    }

    est.peak_time = (static_cast<double>(best) + offset) / fs;
    est.peak_amplitude = best_abs;
    est.distance = c_air * est.peak_time / 2.0;
    est.valid = best_abs > detection_threshold(reference) && est.peak_time > blind;
    return est;
}

std::vector<double> SpectralFeatures::to_vector() const {
    std::vector<double> v{contrast, kurtosis, skewness, entropy, centroid};
    v.insert(v.end(), band_energies.begin(), band_energies.end());
    return v;
}

std::vector<std::string> SpectralFeatures::column_names(int n_bands) {
    std::vector<std::string> names{"contrast", "kurtosis", "skewness", "entropy", "centroid"};
    for (int b = 0; b < n_bands; ++b) names.push_back("band_" + std::to_string(b));
    return names;
}

namespace {

// Log-spaced band edges over bins [1, last]; every band gets at least one bin when possible.
std::vector<std::size_t> band_edges(std::size_t last, int n_bands) {
    const auto n = static_cast<std::size_t>(n_bands);
    std::vector<std::size_t> edges(n + 1);
    const std::size_t bins = last;  // bins 1..last
    if (bins < n) {
        for (std::size_t j = 0; j <= n; ++j) edges[j] = 1 + std::min(j, bins);
        return edges;
    }
    const double top = static_cast<double>(last + 1);
    edges[0] = 1;
    edges[n] = last + 1;
    for (std::size_t j = 1; j < n; ++j) {
        auto e = static_cast<std::size_t>(std::llround(std::pow(top, static_cast<double>(j) / n_bands)));
        e = std::max(e, edges[j - 1] + 1);
        e = std::min(e, last + 1 - (n - j));
        edges[j] = e;
    }
    return edges;
}

}  // namespace

SpectralFeatures features_from_power(std::span<const double> power, double bin_hz, int n_bands) {
    if (n_bands < 2) throw std::invalid_argument("n_bands must be >= 2");
    if (!(bin_hz > 0.0)) throw std::invalid_argument("bin width must be > 0");
    SpectralFeatures f;
    f.band_energies.assign(static_cast<std::size_t>(n_bands), 0.0);
    if (power.size() < 2) {
        f.degenerate = true;
        return f;
    }

    double total = 0.0;
    for (std::size_t k = 1; k < power.size(); ++k) {
        if (power[k] < 0.0 || !std::isfinite(power[k])) throw std::invalid_argument("power must be finite and >= 0");
        total += power[k];
    }
    if (!(total > 0.0)) {
        f.degenerate = true;
        return f;
    }

    std::vector<double> p(power.size(), 0.0);
    for (std::size_t k = 1; k < power.size(); ++k) p[k] = power[k] / total;

    double mean = 0.0;
    for (std::size_t k = 1; k < p.size(); ++k) mean += p[k] * static_cast<double>(k) * bin_hz;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0, entropy = 0.0;
    for (std::size_t k = 1; k < p.size(); ++k) {
        if (p[k] == 0.0) continue;
        const double d = static_cast<double>(k) * bin_hz - mean;
        const double d2 = d * d;
        m2 += p[k] * d2;
        m3 += p[k] * d2 * d;
        m4 += p[k] * d2 * d2;
        entropy -= p[k] * std::log2(p[k]);
    }
    f.centroid = mean;
    f.entropy = std::max(entropy, 0.0);
    const double sd = std::sqrt(m2);
    if (sd > 0.0 && m2 > 1e-24 * mean * mean) {
        f.skewness = m3 / (m2 * sd);
        f.kurtosis = m4 / (m2 * m2);
    }

    const auto edges = band_edges(p.size() - 1, n_bands);
    double contrast_sum = 0.0;
    int used = 0;
    for (int b = 0; b < n_bands; ++b) {
        const auto lo = edges[static_cast<std::size_t>(b)];
        const auto hi = edges[static_cast<std::size_t>(b) + 1];
        if (lo >= hi) continue;
        double peak = 0.0, valley = 1.0, energy = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            peak = std::max(peak, p[k]);
            valley = std::min(valley, p[k]);
            energy += p[k];
        }
        f.band_energies[static_cast<std::size_t>(b)] = energy;
        contrast_sum += 10.0 * std::log10(peak + kSpectralFloor) - 10.0 * std::log10(valley + kSpectralFloor);
        ++used;
    }
    f.contrast = used > 0 ? contrast_sum / used : 0.0;
    return f;
}

std::vector<double> power_spectrum(std::span<const double> samples) {
    if (samples.empty()) return {};
    Eigen::FFT<double> fft;
    std::vector<double> in(samples.begin(), samples.end());
    std::vector<std::complex<double>> out;
    fft.fwd(out, in);
    const std::size_t half = samples.size() / 2;
    std::vector<double> power(half + 1);
    for (std::size_t k = 0; k <= half; ++k) power[k] = std::norm(out[k]);
    return power;
}

SpectralFeatures spectral_features(const echo::EchoFrame& frame, int n_bands) {
    if (frame.samples.empty()) throw std::invalid_argument("spectral_features needs a non-empty frame");
    const auto power = power_spectrum(frame.samples);
    const double bin_hz = frame.sample_rate / static_cast<double>(frame.samples.size());
    return features_from_power(power, bin_hz, n_bands);
}

void write_features_csv_header(std::ostream& out, int n_bands) {
    out << "label";
    for (const auto& n : SpectralFeatures::column_names(n_bands)) out << ',' << n;
    out << '\n';
}

void write_features_csv_row(std::ostream& out, const std::string& label, const SpectralFeatures& f) {
    out << label;
    for (double v : f.to_vector()) out << ',' << format_double(v);
    out << '\n';
}

}  // namespace ultratac::signal
