#include "quad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace quad {

MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<int>& predictions, int num_classes) {
    if (labels.size() != predictions.size() || labels.empty())
        throw DataError("compute_metrics: labels and predictions must be non-empty and equal length");

    MetricsReport rep;
    rep.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
    long correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i], p = predictions[i];
        if (y < 0 || y >= num_classes || p < 0 || p >= num_classes)
            throw DataError("compute_metrics: class index out of range");
        rep.confusion[y][p]++;
        if (y == p) ++correct;
    }
    rep.accuracy = static_cast<double>(correct) / labels.size();

    double weighted = 0.0, macro = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        long tp = rep.confusion[c][c];
        long support = std::accumulate(rep.confusion[c].begin(), rep.confusion[c].end(), 0L);
        long predicted = 0;
        for (int r = 0; r < num_classes; ++r) predicted += rep.confusion[r][c];
        double precision = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
        double recall = support > 0 ? static_cast<double>(tp) / support : 0.0;
        double f1 = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        weighted += f1 * support;
        macro += f1;
        if (num_classes == 2 && c == 1) rep.binary_f1 = f1;
    }
    rep.weighted_f1 = weighted / labels.size();
    rep.macro_f1 = macro / num_classes;
    rep.has_binary = (num_classes == 2);
    return rep;
}

double binary_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size() || labels.empty())
        throw DataError("binary_auc: labels and scores must be non-empty and equal length");
    long n_pos = 0, n_neg = 0;
    for (int y : labels) {
        if (y == 1)
            ++n_pos;
        else if (y == 0)
            ++n_neg;
        else
            throw DataError("binary_auc: only defined for binary labels, got class " + std::to_string(y));
    }
    if (n_pos == 0 || n_neg == 0) throw DataError("binary_auc: need both classes present");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tied scores
    std::vector<double> rank(labels.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k] == 1) rank_sum_pos += rank[k];
    double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace quad
