#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quad/common.hpp"

namespace quad {

struct MultimodalSample {
    std::vector<std::vector<double>> features;  // one vector per modality
    int label = 0;
};

// Immutable after construction; safe to share read-only across threads.
struct Dataset {
    int num_modalities = 0;
    int num_classes = 0;
    std::vector<int> dims;  // per-modality feature dimension
    std::vector<MultimodalSample> samples;

    int size() const { return static_cast<int>(samples.size()); }
    std::uint64_t fingerprint() const;
};

struct DatasetSpec {
    int num_modalities = 2;
    int num_classes = 2;
    std::vector<int> dims;
    int num_samples = 100;
    std::vector<double> separation;  // per-modality class-center scale
    std::uint64_t seed = 0;
};

struct NoiseSpec {
    std::vector<int> modalities;  // targets; empty means none
    double sigma = 0.0;
    double fraction = 1.0;  // portion of samples affected
    std::uint64_t seed = 0;
};

// Per class and modality a center ~ N(0, separation^2 I); samples are
// center + unit normal noise. Labels balanced within +-1.
Dataset generate_synthetic(const DatasetSpec& spec);

// The seeded class centers of a synthetic spec, for ground-truth probes.
std::vector<std::vector<std::vector<double>>> synthetic_class_centers(const DatasetSpec& spec);

struct TabularOptions {
    char delimiter = ',';
    bool header = false;
};

// One numeric file per modality (one row per sample) plus an integer label
// column. Labels are remapped to contiguous [0, C) in sorted order.
Dataset load_tabular(const std::vector<std::string>& modality_paths, const std::string& label_path,
                     const TabularOptions& opts = {});

// Additive iid Gaussian noise on the target modalities of a seeded sample
// subset (exactly floor(fraction*N) samples). sigma = 0 is the identity.
Dataset inject_noise(const Dataset& input, const NoiseSpec& noise);

struct SplitResult {
    Dataset train, val, test;
};

// Class-stratified, seeded, disjoint, exhaustive.
SplitResult split(const Dataset& data, const std::vector<double>& ratios, std::uint64_t seed);

// Per-modality per-feature z-score statistics, fitted on training data only.
// A constant column keeps denominator 1 and maps to 0.
struct Normalizer {
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> stddev;

    static Normalizer fit(const Dataset& train);
    Dataset apply(const Dataset& data) const;
};

}  // namespace quad
