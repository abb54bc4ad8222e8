#pragma once

#include <string>
#include <vector>

namespace quad::harness {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Static SVG line plot; values are rendered from the same formatted numbers
// the CSVs record.
void write_line_plot(const std::string& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<Series>& series);

struct HistogramSeries {
    std::string name;
    std::vector<double> bin_centers;
    std::vector<double> counts;
};

void write_histogram(const std::string& path, const std::string& title, const std::string& x_label,
                     const std::vector<HistogramSeries>& series);

}  // namespace quad::harness
