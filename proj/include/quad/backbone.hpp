#pragma once

#include <vector>

#include "quad/tensor.hpp"

namespace quad {

// One quality-enhancing block: gate = sigmoid(W x + b), output = gate (*) x.
// W is square so feature dimension is preserved through any number of blocks.
struct BlockParams {
    ad::Value weight;  // d x d
    ad::Value bias;    // d x 1
};

struct BlockOutput {
    ad::Value next;  // gated features, d x 1
    ad::Value gate;  // entries in (0,1)
};

BlockOutput block_forward(const ad::Value& input, const BlockParams& params);

// Affine map over concatenated per-modality features -> 1 x C logits row.
struct Classifier {
    ad::Value weight;  // C x sum(d)
    ad::Value bias;    // C x 1

    static Classifier init(int num_classes, int total_dim, Rng& rng, double scale = 0.01);
    ad::Value logits(const std::vector<ad::Value>& features) const;
    std::vector<ad::Value> parameters() const { return {weight, bias}; }
};

// Per-sample forward record: intermediate features, gate vectors, final
// features and logits.
struct ForwardTrace {
    std::vector<std::vector<ad::Value>> features;  // [modality][0..depth], features[m][0] = input
    std::vector<std::vector<ad::Value>> gates;     // [modality][0..depth-1]
    std::vector<ad::Value> final_features;         // [modality]
    ad::Value logits;                              // 1 x C
};

}  // namespace quad
