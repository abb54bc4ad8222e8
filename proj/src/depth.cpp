#include "quad/depth.hpp"

#include <algorithm>
#include <cmath>

namespace quad {

int DepthPlan::max_depth() const {
    int mx = 1;
    for (int d : depths) mx = std::max(mx, d);
    return mx;
}

DepthNormalizer fit_normalizer(const std::vector<double>& pooled_inverse_quality, int max_depth) {
    if (pooled_inverse_quality.empty()) throw DataError("fit_normalizer: empty quality pool");
    if (max_depth < 1) throw DataError("fit_normalizer: max depth must be >= 1");
    DepthNormalizer nz;
    nz.v_min = *std::min_element(pooled_inverse_quality.begin(), pooled_inverse_quality.end());
    nz.v_max = *std::max_element(pooled_inverse_quality.begin(), pooled_inverse_quality.end());
    nz.max_depth = max_depth;
    return nz;
}

int assign_depth_single(double inverse_quality, const DepthNormalizer& nz) {
    if (nz.max_depth == 1 || nz.degenerate()) return 1;
    double v = std::clamp(inverse_quality, nz.v_min, nz.v_max);
    double frac = (v - nz.v_min) / (nz.v_max - nz.v_min);
    int depth = static_cast<int>(std::floor(1.0 + (nz.max_depth - 1) * frac + 0.5));  // round half up
    return std::clamp(depth, 1, nz.max_depth);
}

DepthPlan assign_depths(const std::vector<double>& modality_quality, const DepthNormalizer& nz) {
    DepthPlan plan;
    plan.depths.reserve(modality_quality.size());
    for (double q : modality_quality) plan.depths.push_back(assign_depth_single(1.0 - q, nz));
    return plan;
}

}  // namespace quad
