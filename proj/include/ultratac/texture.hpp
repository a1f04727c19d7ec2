#pragma once

// Tactile-image texture recognition with invariant moments.
//
// The contact imprint is the half-maximum mask grown by one pixel; inside it each pixel
// is weighted by its intensity over the median mask level, so antialiased edges count
// by coverage. The moments are summarised by the seven Hu invariants plus the
// magnitudes of the normalised complex moments c30, c40 and c60, which respond to
// 3-, 4- and 6-fold symmetry. All ten values are invariant to translation, scale,
// in-plane rotation and uniform intensity scaling, up to pixel sampling.

#include "ultratac/gbdt.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ultratac::ml {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // row-major, intensities in [0, 1]

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0);

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
    bool empty() const { return pixels.empty(); }
};

enum class Pattern { Circle, Rectangle, Hexagon, Triangle, Stripe };

inline constexpr Pattern kAllPatterns[] = {Pattern::Circle, Pattern::Rectangle, Pattern::Hexagon, Pattern::Triangle,
                                           Pattern::Stripe};

std::string_view to_string(Pattern p);
/// Case-insensitive; throws std::invalid_argument.
Pattern parse_pattern(std::string_view text);

struct RenderParams {
    int size = 64;
    double scale = 1.0;        // relative to the nominal pattern size
    double rotation = 0.0;     // radians
    double offset_x = 0.0;     // pixels from the image centre
    double offset_y = 0.0;
    double intensity = 1.0;    // imprint depth
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    int supersample = 4;
};

/// Antialiased imprint of `pattern` on a zero background, plus clamped Gaussian noise.
GrayImage render_pattern(Pattern pattern, const RenderParams& params);

struct RenderJitter {
    double max_rotation = 3.14159265358979323846;  // uniform in [-max, max]
    double scale_min = 0.85;
    double scale_max = 1.15;
    double max_offset = 4.0;  // pixels
    double noise_std = 0.0;
    double intensity = 1.0;
};

/// Random rotation / scale / offset / noise draw, deterministic in `seed`.
GrayImage render_augmented(Pattern pattern, const RenderJitter& jitter, std::uint64_t seed, int size = 64);

inline constexpr std::size_t kTextureFeatureCount = 10;

struct TextureFeatures {
    std::vector<double> values;  // hu1..hu7, |c30|, |c40|, |c60|
    bool degenerate = false;     // blank image: all values zero
};

TextureFeatures texture_features(const GrayImage& image);

std::vector<std::string> texture_feature_names();

/// GBDT over texture_features, labelled by pattern name.
class TextureClassifier {
public:
    TextureClassifier() = default;
    explicit TextureClassifier(GbdtModel model) : model_(std::move(model)) {}

    /// Label index into label_names().
    int predict(const GrayImage& image) const;
    const std::vector<std::string>& label_names() const { return model_.label_names(); }
    const GbdtModel& model() const { return model_; }

private:
    GbdtModel model_;
};

TextureClassifier train_texture_classifier(std::span<const GrayImage> images, std::span<const int> labels,
                                           const std::vector<std::string>& label_names, const GbdtHyper& hyper = {});

}  // namespace ultratac::ml
