#include "ultratac/texture.hpp"

#include "ultratac/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ultratac::ml {

GrayImage::GrayImage(int w, int h, double fill) : width(w), height(h) {
    if (w < 0 || h < 0) throw std::invalid_argument("image dimensions must be >= 0");
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

std::string_view to_string(Pattern p) {
    switch (p) {
        case Pattern::Circle: return "circle";
        case Pattern::Rectangle: return "rectangle";
        case Pattern::Hexagon: return "hexagon";
        case Pattern::Triangle: return "triangle";
        case Pattern::Stripe: return "stripe";
    }
    return "?";
}

Pattern parse_pattern(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (auto p : kAllPatterns)
        if (to_string(p) == t) return p;
    throw std::invalid_argument("unknown pattern: " + std::string(text));
}

namespace {

// Membership test in the pattern's own frame (centre at origin, unrotated).
bool inside(Pattern pattern, double u, double v, double r) {
    constexpr double sqrt3 = 1.7320508075688772;
    switch (pattern) {
        case Pattern::Circle: return u * u + v * v <= r * r;
        case Pattern::Rectangle: return std::abs(u) <= r && std::abs(v) <= 0.5 * r;
        case Pattern::Hexagon: {
            const double x = std::abs(u), y = std::abs(v);
            return y <= 0.5 * sqrt3 * r && sqrt3 * x + y <= sqrt3 * r;
        }
        case Pattern::Triangle: {
            const double rt = 1.15 * r;  // circumradius; the inradius is half of it
            // Outward edge normals at -90, 30 and 150 degrees.
            return -v <= 0.5 * rt && (0.5 * sqrt3 * u + 0.5 * v) <= 0.5 * rt && (-0.5 * sqrt3 * u + 0.5 * v) <= 0.5 * rt;
        }
        case Pattern::Stripe: {
            if (std::abs(u) > r) return false;
            for (double c : {-0.65 * r, 0.0, 0.65 * r})
                if (std::abs(v - c) <= 0.16 * r) return true;
            return false;
        }
    }
    return false;
}

}  // namespace

GrayImage render_pattern(Pattern pattern, const RenderParams& p) {
    if (p.size < 1 || p.supersample < 1) throw std::invalid_argument("render size and supersample must be >= 1");
    if (!(p.scale > 0.0)) throw std::invalid_argument("render scale must be > 0");
    GrayImage img(p.size, p.size);
    const double r = 0.28 * p.size * p.scale;
    const double cx = 0.5 * p.size + p.offset_x;
    const double cy = 0.5 * p.size + p.offset_y;
    const double cs = std::cos(p.rotation), sn = std::sin(p.rotation);
    // Fibonacci lattice sample offsets: unlike a square grid, no two samples share a row,
    // column or diagonal, so straight edges at any angle quantise evenly.
    const int n = p.supersample * p.supersample;
    std::vector<std::pair<double, double>> offsets(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double t = (k + 0.5) * 0.6180339887498949;
        offsets[static_cast<std::size_t>(k)] = {(k + 0.5) / n, t - std::floor(t)};
    }
    const double inv = 1.0 / n;
    for (int y = 0; y < p.size; ++y)
        for (int x = 0; x < p.size; ++x) {
            int hits = 0;
            for (const auto& [ox, oy] : offsets) {
                const double px = x + ox - cx;
                const double py = y + oy - cy;
                // Rotate the sample point into the pattern frame.
                const double u = cs * px + sn * py;
                const double v = -sn * px + cs * py;
                hits += inside(pattern, u, v, r) ? 1 : 0;
            }
            img.at(x, y) = p.intensity * hits * inv;
        }
    if (p.noise_std > 0.0) {
        Rng rng(p.seed);
        std::normal_distribution<double> noise(0.0, p.noise_std);
        for (auto& px : img.pixels) px += noise(rng);
    }
    for (auto& px : img.pixels) px = std::clamp(px, 0.0, 1.0);
    return img;
}

GrayImage render_augmented(Pattern pattern, const RenderJitter& j, std::uint64_t seed, int size) {
    Rng rng(mix_seed(seed));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RenderParams p;
    p.size = size;
    p.rotation = (2.0 * unit(rng) - 1.0) * j.max_rotation;
    p.scale = j.scale_min + (j.scale_max - j.scale_min) * unit(rng);
    p.offset_x = (2.0 * unit(rng) - 1.0) * j.max_offset;
    p.offset_y = (2.0 * unit(rng) - 1.0) * j.max_offset;
    p.noise_std = j.noise_std;
    p.intensity = j.intensity;
    p.seed = rng();
    return render_pattern(pattern, p);
}

TextureFeatures texture_features(const GrayImage& image) {
    if (image.empty()) throw std::invalid_argument("texture_features needs a non-empty image");
    TextureFeatures out;
    out.values.assign(kTextureFeatureCount, 0.0);
    const double peak = *std::max_element(image.pixels.begin(), image.pixels.end());
    if (!(peak > 0.0)) {
        out.degenerate = true;
        return out;
    }
    // Support is the half-peak mask grown by one pixel, so partially covered edge pixels
    // count by their coverage and background noise away from the imprint is ignored.
    const int w0 = image.width, h0 = image.height;
    std::vector<char> core(image.pixels.size()), support(image.pixels.size());
    std::vector<double> core_values;
    for (std::size_t i = 0; i < core.size(); ++i) {
        core[i] = image.pixels[i] >= 0.5 * peak;
        if (core[i]) core_values.push_back(image.pixels[i]);
    }
    // Weights are relative to the median core level: fully covered pixels dominate it and,
    // unlike the peak, noise barely moves it.
    const auto mid = core_values.begin() + static_cast<std::ptrdiff_t>(core_values.size() / 2);
    std::nth_element(core_values.begin(), mid, core_values.end());
    const double level = *mid;
    for (int y = 0; y < h0; ++y)
        for (int x = 0; x < w0; ++x) {
            bool near = false;
            for (int dy = -1; dy <= 1 && !near; ++dy)
                for (int dx = -1; dx <= 1 && !near; ++dx) {
                    const int u = x + dx, v = y + dy;
                    near = u >= 0 && v >= 0 && u < w0 && v < h0 && core[static_cast<std::size_t>(v) * w0 + u];
                }
            support[static_cast<std::size_t>(y) * w0 + x] = near;
        }
    auto weight = [&](int x, int y) {
        return support[static_cast<std::size_t>(y) * w0 + x] ? image.at(x, y) / level : 0.0;
    };

    double m00 = 0.0, m10 = 0.0, m01 = 0.0;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const double w = weight(x, y);
            m00 += w;
            m10 += w * (x + 0.5);
            m01 += w * (y + 0.5);
        }
    const double xc = m10 / m00, yc = m01 / m00;

    // Central moments up to order 3 and complex moments z^m, z = (x - xc) + i (y - yc).
    double mu[4][4] = {};
    std::complex<double> c3{}, c4{}, c6{};
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const double w = weight(x, y);
            if (w == 0.0) continue;
            const double dx = x + 0.5 - xc, dy = y + 0.5 - yc;
            double px = w;
            for (int p = 0; p <= 3; ++p) {
                double py = 1.0;
                for (int q = 0; p + q <= 3; ++q) {
                    mu[p][q] += px * py;
                    py *= dy;
                }
                px *= dx;
            }
            const std::complex<double> z(dx, dy);
            const auto z2 = z * z;
            const auto z3 = z2 * z;
            c3 += w * z3;
            c4 += w * z2 * z2;
            c6 += w * z3 * z3;
        }

    auto eta = [&](int p, int q) { return mu[p][q] / std::pow(m00, 1.0 + 0.5 * (p + q)); };
    const double n20 = eta(2, 0), n02 = eta(0, 2), n11 = eta(1, 1);
    const double n30 = eta(3, 0), n03 = eta(0, 3), n21 = eta(2, 1), n12 = eta(1, 2);
    const double a = n30 + n12, b = n21 + n03;

    auto& h = out.values;
    h[0] = n20 + n02;
    h[1] = (n20 - n02) * (n20 - n02) + 4.0 * n11 * n11;
    h[2] = (n30 - 3.0 * n12) * (n30 - 3.0 * n12) + (3.0 * n21 - n03) * (3.0 * n21 - n03);
    h[3] = a * a + b * b;
    h[4] = (n30 - 3.0 * n12) * a * (a * a - 3.0 * b * b) + (3.0 * n21 - n03) * b * (3.0 * a * a - b * b);
    h[5] = (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b;
    h[6] = (3.0 * n21 - n03) * a * (a * a - 3.0 * b * b) - (n30 - 3.0 * n12) * b * (3.0 * a * a - b * b);
    h[7] = std::abs(c3) / std::pow(m00, 2.5);
    h[8] = std::abs(c4) / std::pow(m00, 3.0);
    h[9] = std::abs(c6) / std::pow(m00, 4.0);
    return out;
}

std::vector<std::string> texture_feature_names() {
    return {"hu1", "hu2", "hu3", "hu4", "hu5", "hu6", "hu7", "c30", "c40", "c60"};
}

int TextureClassifier::predict(const GrayImage& image) const {
    return model_.predict(texture_features(image).values).label;
}

TextureClassifier train_texture_classifier(std::span<const GrayImage> images, std::span<const int> labels,
                                           const std::vector<std::string>& label_names, const GbdtHyper& hyper) {
    if (images.size() != labels.size()) throw std::invalid_argument("image/label count mismatch");
    Dataset data;
    data.label_names = label_names;
    data.feature_names = texture_feature_names();
    for (std::size_t i = 0; i < images.size(); ++i) data.add(texture_features(images[i]).values, labels[i]);
    return TextureClassifier(train_gbdt(data, hyper));
}

}  // namespace ultratac::ml
