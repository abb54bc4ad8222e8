#pragma once

#include <string>
#include <vector>

#include "quad/common.hpp"

namespace quad::harness {

// Deterministic number formatting shared by CSV and SVG output so plots can
// never disagree with the recorded numbers.
std::string format_number(double v);
std::string format_fixed(double v, int decimals);

// Row-oriented CSV writer with a fixed header; cells are preformatted
// strings so the byte output is reproducible.
class CsvWriter {
public:
    CsvWriter(std::string path, std::vector<std::string> header);

    void row(const std::vector<std::string>& cells);
    // Writes the file; returns the path.
    std::string finish();

    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    const std::vector<std::string>& header() const { return header_; }

private:
    std::string path_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    bool finished_ = false;
};

}  // namespace quad::harness
