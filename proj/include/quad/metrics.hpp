#pragma once

#include <vector>

#include "quad/common.hpp"

namespace quad {

struct MetricsReport {
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    double binary_f1 = 0.0;  // C == 2 only
    double auc = 0.0;        // C == 2 only
    bool has_binary = false;
    std::vector<std::vector<long>> confusion;  // [true][pred]
};

MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<int>& predictions, int num_classes);

// Rank statistic (Mann-Whitney) with midranks for ties; scores are the
// positive-class probabilities.
double binary_auc(const std::vector<int>& labels, const std::vector<double>& scores);

}  // namespace quad
