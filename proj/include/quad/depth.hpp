#pragma once

#include <vector>

#include "quad/common.hpp"

namespace quad {

// Per-sample, per-modality unimodal network depths in [1, K].
struct DepthPlan {
    std::vector<int> depths;

    int max_depth() const;
};

// Min-max normalizer over the pooled (1 - modality quality) values of all
// training samples and modalities jointly. Fitted once, then frozen; at
// inference out-of-range values clamp.
struct DepthNormalizer {
    double v_min = 0.0;
    double v_max = 0.0;
    int max_depth = 1;  // K

    bool degenerate() const { return !(v_max > v_min); }
};

// Pool holds 1 - quality over all samples x modalities.
DepthNormalizer fit_normalizer(const std::vector<double>& pooled_inverse_quality, int max_depth);

// round-half-up onto [1, K]; a degenerate pool maps everything to depth 1.
DepthPlan assign_depths(const std::vector<double>& modality_quality, const DepthNormalizer& nz);

int assign_depth_single(double inverse_quality, const DepthNormalizer& nz);

}  // namespace quad
