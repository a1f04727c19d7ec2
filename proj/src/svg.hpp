#pragma once

// Minimal self-contained SVG plots for experiment reports.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ultratac::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct Line {
    double slope = 1.0;
    double intercept = 0.0;
    std::string name;
};

void scatter(std::ostream& out, const std::string& title, const std::string& x_label, const std::string& y_label,
             const std::vector<Series>& series, const std::vector<Line>& lines = {});

/// Row-normalised confusion heatmap; counts are row-major K x K.
void heatmap(std::ostream& out, const std::string& title, const std::vector<std::string>& labels,
             const std::vector<std::size_t>& counts);

}  // namespace ultratac::svg
