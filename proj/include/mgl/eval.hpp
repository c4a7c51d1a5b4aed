#pragma once

// Scoring, multi-run aggregation and file artifacts (SVG plots, PPM masks).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mgl/assignment.hpp"
#include "mgl/dataset.hpp"
#include "mgl/error.hpp"
#include "mgl/image.hpp"
#include "mgl/solver.hpp"

namespace mgl {

// Fraction of positions where pred equals truth. `exclude` (optional,
// same length) masks out positions such as fidelity points.
inline double accuracy(std::span<const int> pred, std::span<const int> truth, std::span<const char> exclude = {}) {
    if (pred.size() != truth.size()) throw ContractError("accuracy: length mismatch");
    if (!exclude.empty() && exclude.size() != pred.size()) throw ContractError("accuracy: mask length mismatch");
    std::size_t correct = 0, counted = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!exclude.empty() && exclude[i]) continue;
        ++counted;
        correct += pred[i] == truth[i];
    }
    if (counted == 0) throw ContractError("accuracy: nothing to score");
    return static_cast<double>(correct) / static_cast<double>(counted);
}

using ConfusionMatrix = std::vector<std::vector<std::int64_t>>;

// Rows: true class, columns: predicted class.
inline ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> truth, int K) {
    auto by_pred = contingency(pred, truth, K); // [pred][truth]
    ConfusionMatrix out(static_cast<std::size_t>(K), std::vector<std::int64_t>(static_cast<std::size_t>(K)));
    for (std::size_t p = 0; p < by_pred.size(); ++p)
        for (std::size_t t = 0; t < by_pred.size(); ++t) out[t][p] = by_pred[p][t];
    return out;
}

struct EvalReport {
    double accuracy = 0.0;       // mean over runs
    double stddev = 0.0;         // sample standard deviation over runs
    double mean_runtime_s = 0.0;
    std::size_t runs = 0;
    ConfusionMatrix confusion;   // first run
};

inline EvalReport aggregate(std::span<const double> accuracies, std::span<const double> runtimes) {
    if (accuracies.empty()) throw ContractError("aggregate: no runs");
    EvalReport r;
    r.runs = accuracies.size();
    r.accuracy = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(r.runs);
    if (r.runs > 1) {
        double ss = 0.0;
        for (double a : accuracies) ss += (a - r.accuracy) * (a - r.accuracy);
        r.stddev = std::sqrt(ss / static_cast<double>(r.runs - 1));
    }
    if (!runtimes.empty())
        r.mean_runtime_s = std::accumulate(runtimes.begin(), runtimes.end(), 0.0) / static_cast<double>(runtimes.size());
    return r;
}

// ---------------------------------------------------------------------------
// SVG output

namespace detail {
inline const char* class_color(int k) {
    static constexpr std::array<const char*, 12> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                            "#bcbd22", "#17becf", "#393b79", "#637939"};
    return palette[static_cast<std::size_t>(k) % palette.size()];
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

struct Frame {
    double lo_x, hi_x, lo_y, hi_y;
    double left = 60, top = 20, width = 560, height = 480;
    double x(double v) const { return left + (hi_x > lo_x ? (v - lo_x) / (hi_x - lo_x) : 0.5) * width; }
    double y(double v) const { return top + height - (hi_y > lo_y ? (v - lo_y) / (hi_y - lo_y) : 0.5) * height; }
};
} // namespace detail

// Scatter of 2-D coordinates colored by label, with one legend entry per class.
inline std::string scatter_svg(std::span<const double> xs, std::span<const double> ys, std::span<const int> labels,
                               int num_classes, const std::string& title = "") {
    if (xs.size() != ys.size() || xs.size() != labels.size()) throw ContractError("scatter_svg: length mismatch");
    detail::Frame f{0, 1, 0, 1};
    if (!xs.empty()) {
        f.lo_x = *std::min_element(xs.begin(), xs.end());
        f.hi_x = *std::max_element(xs.begin(), xs.end());
        f.lo_y = *std::min_element(ys.begin(), ys.end());
        f.hi_y = *std::max_element(ys.begin(), ys.end());
    }
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"540\" viewBox=\"0 0 760 540\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"760\" height=\"540\" fill=\"white\"/>\n";
    if (!title.empty()) s << "<title>" << title << "</title>\n";
    s << "<g class=\"points\">\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        s << "<circle cx=\"" << detail::fmt(f.x(xs[i])) << "\" cy=\"" << detail::fmt(f.y(ys[i]))
          << "\" r=\"2.5\" fill=\"" << detail::class_color(labels[i]) << "\"/>\n";
    s << "</g>\n<g class=\"legend\">\n";
    for (int k = 0; k < num_classes; ++k) {
        const double y = 30 + 22.0 * k;
        s << "<g class=\"legend-entry\"><rect x=\"640\" y=\"" << detail::fmt(y - 10) << "\" width=\"12\" height=\"12\" fill=\""
          << detail::class_color(k) << "\"/><text x=\"658\" y=\"" << detail::fmt(y) << "\" font-size=\"13\">class "
          << k << "</text></g>\n";
    }
    s << "</g>\n</svg>\n";
    return s.str();
}

inline void emit_scatter_svg(const PointMatrix& points, std::span<const int> labels, int num_classes,
                             const std::filesystem::path& path, const std::string& title = "") {
    if (static_cast<std::size_t>(points.rows()) != labels.size()) throw ContractError("emit_scatter_svg: length mismatch");
    std::vector<double> xs(labels.size()), ys(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        xs[i] = points(static_cast<Eigen::Index>(i), 0);
        ys[i] = points.cols() > 1 ? points(static_cast<Eigen::Index>(i), 1) : 0.0;
    }
    detail::write_text_file(path, scatter_svg(xs, ys, labels, num_classes, title));
}

// Line chart of the four energy series against iteration.
inline std::string energy_svg(const RunTrace& trace) {
    if (trace.rows.empty()) throw ContractError("energy_svg: empty trace");
    struct Series {
        const char* name;
        const char* color;
        double EnergyBreakdown::*field;
    };
    static constexpr std::array<Series, 4> series = {{{"total", "#d62728", &EnergyBreakdown::total},
                                                      {"smoothing", "#2ca02c", &EnergyBreakdown::smoothing},
                                                      {"potential", "#1f77b4", &EnergyBreakdown::potential},
                                                      {"fidelity", "#9467bd", &EnergyBreakdown::fidelity}}};
    detail::Frame f{static_cast<double>(trace.rows.front().iter), static_cast<double>(trace.rows.back().iter), 0.0, 0.0};
    for (const auto& r : trace.rows)
        for (const auto& sr : series) f.hi_y = std::max(f.hi_y, r.energy.*(sr.field));

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"540\" viewBox=\"0 0 760 540\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"760\" height=\"540\" fill=\"white\"/>\n";
    s << "<line x1=\"60\" y1=\"500\" x2=\"620\" y2=\"500\" stroke=\"black\"/>\n";
    s << "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"500\" stroke=\"black\"/>\n";
    s << "<text x=\"300\" y=\"530\" font-size=\"13\">iteration</text>\n";
    s << "<text x=\"4\" y=\"24\" font-size=\"11\">" << detail::fmt(f.hi_y) << "</text>\n";
    for (const auto& sr : series) {
        s << "<polyline class=\"" << sr.name << "\" fill=\"none\" stroke=\"" << sr.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < trace.rows.size(); ++i) {
            const auto& r = trace.rows[i];
            s << (i ? " " : "") << detail::fmt(f.x(static_cast<double>(r.iter))) << ',' << detail::fmt(f.y(r.energy.*(sr.field)));
        }
        s << "\"/>\n";
    }
    s << "<g class=\"legend\">\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double y = 30 + 22.0 * static_cast<double>(k);
        s << "<g class=\"legend-entry\"><rect x=\"640\" y=\"" << detail::fmt(y - 10) << "\" width=\"12\" height=\"12\" fill=\""
          << series[k].color << "\"/><text x=\"658\" y=\"" << detail::fmt(y) << "\" font-size=\"13\">" << series[k].name
          << "</text></g>\n";
    }
    s << "</g>\n</svg>\n";
    return s.str();
}

// Writes `<stem>.svg` and `<stem>.csv` next to each other.
inline void emit_energy_plot(const RunTrace& trace, const std::filesystem::path& svg_path,
                             const std::filesystem::path& csv_path) {
    detail::write_text_file(svg_path, energy_svg(trace));
    trace.write_csv(csv_path);
}

// One binary PPM per class: white where the label equals the class.
inline std::vector<std::filesystem::path> emit_class_masks(std::span<const int> labels, int width, int height,
                                                           int num_classes, const std::string& path_prefix) {
    if (width < 1 || height < 1 || labels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw ContractError("emit_class_masks: label count does not match image size");
    std::vector<std::filesystem::path> paths;
    for (int k = 0; k < num_classes; ++k) {
        Image mask(width, height, 3);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const std::uint8_t v = labels[i] == k ? 255 : 0;
            mask.pixels[3 * i] = mask.pixels[3 * i + 1] = mask.pixels[3 * i + 2] = v;
        }
        std::filesystem::path p = path_prefix + "_class" + std::to_string(k) + ".ppm";
        write_ppm(mask, p);
        paths.push_back(std::move(p));
    }
    return paths;
}

} // namespace mgl
