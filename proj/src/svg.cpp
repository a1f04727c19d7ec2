#include "svg.hpp"

#include "ultratac/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace ultratac::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string num(double v) { return format_fixed(v, 2); }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void scatter(std::ostream& out, const std::string& title, const std::string& x_label, const std::string& y_label,
             const std::vector<Series>& series, const std::vector<Line>& lines) {
    constexpr double W = 640, H = 480, L = 70, R = 150, T = 40, B = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
        for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double px = 0.05 * (x1 - x0), py = 0.05 * (y1 - y0);
    x0 -= px, x1 += px, y0 -= py, y1 += py;
    auto sx = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
    out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        out << "<text x=\"" << num(sx(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << format_fixed(xv, 2) << "</text>\n";
        out << "<text x=\"" << L - 6 << "\" y=\"" << num(sy(yv) + 4) << "\" text-anchor=\"end\">" << format_fixed(yv, 2) << "</text>\n";
    }
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    out << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";

    std::size_t k = 0;
    for (const auto& line : lines) {
        out << "<line x1=\"" << num(sx(x0)) << "\" y1=\"" << num(sy(line.slope * x0 + line.intercept)) << "\" x2=\""
            << num(sx(x1)) << "\" y2=\"" << num(sy(line.slope * x1 + line.intercept))
            << "\" stroke=\"#444\" stroke-dasharray=\"5,4\"/>\n";
        out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 14 + 16 * k++ << "\">" << escape(line.name) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        out << "<g fill=\"" << color << "\" fill-opacity=\"0.6\">\n";
        for (std::size_t i = 0; i < std::min(series[s].x.size(), series[s].y.size()); ++i)
            out << "<circle cx=\"" << num(sx(series[s].x[i])) << "\" cy=\"" << num(sy(series[s].y[i])) << "\" r=\"3\"/>\n";
        out << "</g>\n";
        const double ly = T + 14 + 16 * k++;
        out << "<circle cx=\"" << W - R + 14 << "\" cy=\"" << ly - 4 << "\" r=\"4\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << W - R + 24 << "\" y=\"" << ly << "\">" << escape(series[s].name) << "</text>\n";
    }
    out << "</svg>\n";
}

void heatmap(std::ostream& out, const std::string& title, const std::vector<std::string>& labels,
             const std::vector<std::size_t>& counts) {
    const std::size_t n = labels.size();
    const double cell = n > 8 ? 32.0 : 56.0;
    const double L = 140, T = 50;
    const double W = L + cell * static_cast<double>(n) + 20, H = T + cell * static_cast<double>(n) + 130;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t row = 0;
        for (std::size_t c = 0; c < n; ++c) row += counts[r * n + c];
        for (std::size_t c = 0; c < n; ++c) {
            const auto v = counts[r * n + c];
            const double frac = row ? static_cast<double>(v) / static_cast<double>(row) : 0.0;
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - frac)));
            const double x = L + cell * static_cast<double>(c), y = T + cell * static_cast<double>(r);
            out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << cell << "\" height=\"" << cell
                << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#ccc\"/>\n";
            if (v)
                out << "<text x=\"" << num(x + cell / 2) << "\" y=\"" << num(y + cell / 2 + 4) << "\" text-anchor=\"middle\" fill=\""
                    << (frac > 0.6 ? "white" : "black") << "\">" << v << "</text>\n";
        }
        out << "<text x=\"" << L - 6 << "\" y=\"" << num(T + cell * (static_cast<double>(r) + 0.5) + 4)
            << "\" text-anchor=\"end\">" << escape(labels[r]) << "</text>\n";
    }
    for (std::size_t c = 0; c < n; ++c) {
        const double x = L + cell * (static_cast<double>(c) + 0.5), y = T + cell * static_cast<double>(n) + 8;
        out << "<text transform=\"translate(" << num(x) << "," << num(y) << ") rotate(60)\">" << escape(labels[c]) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace ultratac::svg
