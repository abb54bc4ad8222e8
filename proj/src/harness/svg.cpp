#include "quad/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "quad/common.hpp"
#include "quad/harness/csv.hpp"

namespace quad::harness {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 55;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
    double lo = 0.0, hi = 1.0;
};

Range pad_range(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

double map_x(double v, const Range& r) {
    return kMarginLeft + (v - r.lo) / (r.hi - r.lo) * (kWidth - kMarginLeft - kMarginRight);
}

double map_y(double v, const Range& r) {
    return kHeight - kMarginBottom - (v - r.lo) / (r.hi - r.lo) * (kHeight - kMarginTop - kMarginBottom);
}

void open_svg(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">"
        << title << "</text>\n";
}

void draw_axes(std::ofstream& out, const Range& xr, const Range& yr, const std::string& x_label,
               const std::string& y_label) {
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\"" << kWidth - kMarginRight
        << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft << "\" y2=\""
        << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        out << "<text x=\"" << map_x(fx, xr) << "\" y=\"" << kHeight - kMarginBottom + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << format_number(fx)
            << "</text>\n";
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << map_y(fy, yr) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << format_number(fy)
            << "</text>\n";
    }
    out << "<text x=\"" << (kMarginLeft + kWidth - kMarginRight) / 2 << "\" y=\"" << kHeight - 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << (kMarginTop + kHeight - kMarginBottom) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 "
        << (kMarginTop + kHeight - kMarginBottom) / 2 << ")\">" << y_label << "</text>\n";
}

void draw_legend(std::ofstream& out, const std::vector<std::string>& names) {
    for (std::size_t s = 0; s < names.size(); ++s) {
        double y = kMarginTop + 6 + 16.0 * s;
        out << "<rect x=\"" << kWidth - kMarginRight - 130 << "\" y=\"" << y - 9
            << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % 8] << "\"/>\n";
        out << "<text x=\"" << kWidth - kMarginRight - 116 << "\" y=\"" << y
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << names[s] << "</text>\n";
    }
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<Series>& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("svg: cannot open '" + path + "' for writing");

    double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    bool first = true;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                xlo = xhi = s.x[i];
                ylo = yhi = s.y[i];
                first = false;
            }
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    Range xr = pad_range(xlo, xhi), yr = pad_range(ylo, yhi);

    open_svg(out, title);
    draw_axes(out, xr, yr, x_label, y_label);
    std::vector<std::string> names;
    for (std::size_t s = 0; s < series.size(); ++s) {
        names.push_back(series[s].name);
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 8] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            out << format_fixed(map_x(series[s].x[i], xr), 1) << ',' << format_fixed(map_y(series[s].y[i], yr), 1)
                << ' ';
        }
        out << "\"/>\n";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            out << "<circle cx=\"" << format_fixed(map_x(series[s].x[i], xr), 1) << "\" cy=\""
                << format_fixed(map_y(series[s].y[i], yr), 1) << "\" r=\"2.5\" fill=\"" << kPalette[s % 8] << "\"/>\n";
        }
    }
    draw_legend(out, names);
    out << "</svg>\n";
    if (!out) throw DataError("svg: write failed for '" + path + "'");
}

void write_histogram(const std::string& path, const std::string& title, const std::string& x_label,
                     const std::vector<HistogramSeries>& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("svg: cannot open '" + path + "' for writing");

    double xlo = 0, xhi = 1, yhi = 1;
    bool first = true;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.bin_centers.size(); ++i) {
            if (first) {
                xlo = xhi = s.bin_centers[i];
                first = false;
            }
            xlo = std::min(xlo, s.bin_centers[i]);
            xhi = std::max(xhi, s.bin_centers[i]);
            yhi = std::max(yhi, s.counts[i]);
        }
    Range xr = pad_range(xlo, xhi), yr = pad_range(0.0, yhi);

    open_svg(out, title);
    draw_axes(out, xr, yr, x_label, "count");
    std::vector<std::string> names;
    double width = (kWidth - kMarginLeft - kMarginRight) * 0.8 /
                   std::max<std::size_t>(1, series.empty() ? 1 : series[0].bin_centers.size() * series.size());
    for (std::size_t s = 0; s < series.size(); ++s) {
        names.push_back(series[s].name);
        for (std::size_t i = 0; i < series[s].bin_centers.size(); ++i) {
            double cx = map_x(series[s].bin_centers[i], xr) + (static_cast<double>(s) - series.size() / 2.0) * width;
            double top = map_y(series[s].counts[i], yr);
            double base = map_y(0.0, yr);
            out << "<rect x=\"" << format_fixed(cx, 1) << "\" y=\"" << format_fixed(top, 1) << "\" width=\""
                << format_fixed(width, 1) << "\" height=\"" << format_fixed(base - top, 1) << "\" fill=\""
                << kPalette[s % 8] << "\" fill-opacity=\"0.6\"/>\n";
        }
    }
    draw_legend(out, names);
    out << "</svg>\n";
    if (!out) throw DataError("svg: write failed for '" + path + "'");
}

}  // namespace quad::harness
