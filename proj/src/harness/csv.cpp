#include "quad/harness/csv.hpp"

#include <cstdio>
#include <fstream>

namespace quad::harness {

std::string format_number(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string format_fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

CsvWriter::CsvWriter(std::string path, std::vector<std::string> header)
    : path_(std::move(path)), header_(std::move(header)) {}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size())
        throw Error("csv: row width " + std::to_string(cells.size()) + " does not match header width " +
                    std::to_string(header_.size()));
    rows_.push_back(cells);
}

std::string CsvWriter::finish() {
    if (finished_) return path_;
    std::ofstream out(path_, std::ios::binary);
    if (!out) throw DataError("csv: cannot open '" + path_ + "' for writing");
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << cells[i];
            if (i + 1 < cells.size()) out << ',';
        }
        out << '\n';
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    if (!out) throw DataError("csv: write failed for '" + path_ + "'");
    finished_ = true;
    return path_;
}

}  // namespace quad::harness
