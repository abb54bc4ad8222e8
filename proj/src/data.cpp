#include "quad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace quad {

std::uint64_t Dataset::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(&num_modalities, sizeof(num_modalities), h);
    h = fnv1a(&num_classes, sizeof(num_classes), h);
    for (int d : dims) h = fnv1a(&d, sizeof(d), h);
    for (const auto& s : samples) {
        h = fnv1a(&s.label, sizeof(s.label), h);
        for (const auto& f : s.features) h = fnv1a(f.data(), f.size() * sizeof(double), h);
    }
    return h;
}

static void validate_spec(const DatasetSpec& spec) {
    if (spec.num_modalities < 1) throw DataError("generate_synthetic: modality count must be >= 1");
    if (spec.num_classes < 2) throw DataError("generate_synthetic: class count must be >= 2");
    if (static_cast<int>(spec.dims.size()) != spec.num_modalities)
        throw DataError("generate_synthetic: dims size must equal modality count");
    for (int d : spec.dims)
        if (d < 1) throw DataError("generate_synthetic: every modality dimension must be >= 1");
    if (spec.num_samples < spec.num_classes) throw DataError("generate_synthetic: need at least one sample per class");
    if (static_cast<int>(spec.separation.size()) != spec.num_modalities)
        throw DataError("generate_synthetic: separation size must equal modality count");
}

std::vector<std::vector<std::vector<double>>> synthetic_class_centers(const DatasetSpec& spec) {
    validate_spec(spec);
    Rng rng = Rng(spec.seed).derive(0x6365746e);  // center stream
    std::vector<std::vector<std::vector<double>>> centers(spec.num_classes);
    for (int c = 0; c < spec.num_classes; ++c) {
        centers[c].resize(spec.num_modalities);
        for (int m = 0; m < spec.num_modalities; ++m) {
            centers[c][m].resize(spec.dims[m]);
            for (int j = 0; j < spec.dims[m]; ++j) centers[c][m][j] = spec.separation[m] * rng.normal();
        }
    }
    return centers;
}

Dataset generate_synthetic(const DatasetSpec& spec) {
    auto centers = synthetic_class_centers(spec);
    Rng rng = Rng(spec.seed).derive(0x73616d70);  // sample stream

    Dataset ds;
    ds.num_modalities = spec.num_modalities;
    ds.num_classes = spec.num_classes;
    ds.dims = spec.dims;
    ds.samples.resize(spec.num_samples);
    for (int i = 0; i < spec.num_samples; ++i) {
        MultimodalSample& s = ds.samples[i];
        s.label = i % spec.num_classes;  // balanced within +-1
        s.features.resize(spec.num_modalities);
        for (int m = 0; m < spec.num_modalities; ++m) {
            s.features[m].resize(spec.dims[m]);
            for (int j = 0; j < spec.dims[m]; ++j) s.features[m][j] = centers[s.label][m][j] + rng.normal();
        }
    }
    return ds;
}

// --- tabular ingestion ------------------------------------------------------

namespace {

std::vector<std::vector<double>> read_numeric_rows(const std::string& path, const TabularOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("load_tabular: cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && opts.header) continue;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, opts.delimiter)) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw DataError("load_tabular: non-numeric cell '" + cell + "' at " + path + ":" +
                                std::to_string(lineno));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError("load_tabular: ragged row at " + path + ":" + std::to_string(lineno));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("load_tabular: no data rows in '" + path + "'");
    return rows;
}

}  // namespace

Dataset load_tabular(const std::vector<std::string>& modality_paths, const std::string& label_path,
                     const TabularOptions& opts) {
    if (modality_paths.empty()) throw DataError("load_tabular: need at least one modality file");

    std::vector<std::vector<std::vector<double>>> tables;
    for (const auto& p : modality_paths) tables.push_back(read_numeric_rows(p, opts));

    auto label_rows = read_numeric_rows(label_path, opts);
    for (const auto& r : label_rows) {
        if (r.size() != 1) throw DataError("load_tabular: label file must have exactly one column");
    }

    std::size_t n = label_rows.size();
    for (std::size_t m = 0; m < tables.size(); ++m) {
        if (tables[m].size() != n) {
            throw DataError("load_tabular: row count mismatch, '" + modality_paths[m] + "' has " +
                            std::to_string(tables[m].size()) + " rows but '" + label_path + "' has " +
                            std::to_string(n));
        }
    }

    std::map<long, int> label_index;
    for (const auto& r : label_rows) {
        double v = r[0];
        long lv = static_cast<long>(std::llround(v));
        if (std::fabs(v - static_cast<double>(lv)) > 1e-9)
            throw DataError("load_tabular: non-integer label " + std::to_string(v));
        label_index.emplace(lv, 0);
    }
    int next = 0;
    for (auto& [k, v] : label_index) v = next++;

    Dataset ds;
    ds.num_modalities = static_cast<int>(tables.size());
    ds.num_classes = next;
    for (const auto& t : tables) ds.dims.push_back(static_cast<int>(t.front().size()));
    ds.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = ds.samples[i];
        s.label = label_index.at(static_cast<long>(std::llround(label_rows[i][0])));
        s.features.resize(tables.size());
        for (std::size_t m = 0; m < tables.size(); ++m) {
            for (double v : tables[m][i]) {
                if (!std::isfinite(v))
                    throw DataError("load_tabular: non-finite value in '" + modality_paths[m] + "' row " +
                                    std::to_string(i + 1));
            }
            s.features[m] = tables[m][i];
        }
    }
    return ds;
}

// --- noise ------------------------------------------------------------------

Dataset inject_noise(const Dataset& input, const NoiseSpec& noise) {
    if (noise.sigma < 0) throw DataError("inject_noise: sigma must be >= 0");
    if (noise.fraction < 0 || noise.fraction > 1) throw DataError("inject_noise: fraction must lie in [0,1]");
    for (int m : noise.modalities) {
        if (m < 0 || m >= input.num_modalities)
            throw DataError("inject_noise: target modality " + std::to_string(m) + " out of range");
    }

    Dataset out = input;
    if (noise.sigma == 0.0 || noise.modalities.empty()) return out;

    Rng select_rng = Rng(noise.seed).derive(0x73656c);
    std::vector<int> order(input.size());
    std::iota(order.begin(), order.end(), 0);
    select_rng.shuffle(order);
    int affected = static_cast<int>(std::floor(noise.fraction * input.size()));

    Rng noise_rng = Rng(noise.seed).derive(0x6e6f69);
    std::vector<int> chosen(order.begin(), order.begin() + affected);
    std::sort(chosen.begin(), chosen.end());  // draw order independent of shuffle order
    for (int idx : chosen) {
        for (int m : noise.modalities) {
            for (double& v : out.samples[idx].features[m]) v += noise.sigma * noise_rng.normal();
        }
    }
    return out;
}

// --- splits -------------------------------------------------------------

SplitResult split(const Dataset& data, const std::vector<double>& ratios, std::uint64_t seed) {
    if (ratios.size() != 3) throw DataError("split: expected three ratios");
    double total = 0.0;
    for (double r : ratios) {
        if (r <= 0) throw DataError("split: ratios must be positive");
        total += r;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw DataError("split: ratios must sum to 1");

    std::vector<std::vector<int>> by_class(data.num_classes);
    for (int i = 0; i < data.size(); ++i) by_class[data.samples[i].label].push_back(i);

    Rng rng(seed);
    std::vector<std::vector<int>> assignment(3);
    for (int c = 0; c < data.num_classes; ++c) {
        auto& idx = by_class[c];
        if (static_cast<int>(idx.size()) < 3) {
            throw DataError("split: class " + std::to_string(c) + " has only " + std::to_string(idx.size()) +
                            " samples, fewer than the 3 splits");
        }
        rng.shuffle(idx);
        // largest-remainder apportionment, exhaustive per class
        int n = static_cast<int>(idx.size());
        std::vector<int> counts(3);
        std::vector<std::pair<double, int>> rema;
        int used = 0;
        for (int k = 0; k < 3; ++k) {
            double exact = ratios[k] * n;
            counts[k] = static_cast<int>(std::floor(exact));
            used += counts[k];
            rema.push_back({exact - counts[k], k});
        }
        std::stable_sort(rema.begin(), rema.end(), [](auto& a, auto& b) { return a.first > b.first; });
        for (int r = 0; r < n - used; ++r) counts[rema[r % 3].second]++;
        int off = 0;
        for (int k = 0; k < 3; ++k) {
            for (int i = 0; i < counts[k]; ++i) assignment[k].push_back(idx[off + i]);
            off += counts[k];
        }
    }

    SplitResult res;
    Dataset* parts[3] = {&res.train, &res.val, &res.test};
    for (int k = 0; k < 3; ++k) {
        parts[k]->num_modalities = data.num_modalities;
        parts[k]->num_classes = data.num_classes;
        parts[k]->dims = data.dims;
        std::sort(assignment[k].begin(), assignment[k].end());
        for (int i : assignment[k]) parts[k]->samples.push_back(data.samples[i]);
    }
    return res;
}

// --- normalization ------------------------------------------------------

Normalizer Normalizer::fit(const Dataset& train) {
    if (train.size() == 0) throw DataError("Normalizer::fit: empty training set");
    Normalizer nz;
    nz.mean.resize(train.num_modalities);
    nz.stddev.resize(train.num_modalities);
    for (int m = 0; m < train.num_modalities; ++m) {
        int d = train.dims[m];
        nz.mean[m].assign(d, 0.0);
        nz.stddev[m].assign(d, 0.0);
        for (const auto& s : train.samples)
            for (int j = 0; j < d; ++j) nz.mean[m][j] += s.features[m][j];
        for (int j = 0; j < d; ++j) nz.mean[m][j] /= train.size();
        for (const auto& s : train.samples)
            for (int j = 0; j < d; ++j) {
                double dev = s.features[m][j] - nz.mean[m][j];
                nz.stddev[m][j] += dev * dev;
            }
        for (int j = 0; j < d; ++j) {
            double sd = std::sqrt(nz.stddev[m][j] / train.size());
            nz.stddev[m][j] = (sd > 0.0) ? sd : 1.0;  // constant column -> maps to 0
        }
    }
    return nz;
}

Dataset Normalizer::apply(const Dataset& data) const {
    if (static_cast<int>(mean.size()) != data.num_modalities)
        throw DataError("Normalizer::apply: modality count mismatch");
    Dataset out = data;
    for (auto& s : out.samples) {
        for (int m = 0; m < data.num_modalities; ++m) {
            if (s.features[m].size() != mean[m].size()) throw DataError("Normalizer::apply: dimension mismatch");
            for (std::size_t j = 0; j < s.features[m].size(); ++j) {
                s.features[m][j] = (s.features[m][j] - mean[m][j]) / stddev[m][j];
            }
        }
    }
    return out;
}

}  // namespace quad
