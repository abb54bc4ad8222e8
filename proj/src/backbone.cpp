#include "quad/backbone.hpp"

namespace quad {

using ad::Value;

BlockOutput block_forward(const Value& input, const BlockParams& params) {
    if (params.weight.rows() != params.weight.cols() || params.weight.cols() != input.rows() || input.cols() != 1) {
        throw ShapeError("block_forward: weight must be square and match the feature dimension");
    }
    BlockOutput out;
    out.gate = ad::sigmoid(ad::add(ad::matvec(params.weight, input), params.bias));
    out.next = ad::mul(out.gate, input);
    return out;
}

Classifier Classifier::init(int num_classes, int total_dim, Rng& rng, double scale) {
    Classifier c;
    c.weight = Value::randn(num_classes, total_dim, rng, scale, true);
    c.bias = Value::zeros(num_classes, 1, true);
    return c;
}

Value Classifier::logits(const std::vector<Value>& features) const {
    if (features.empty()) throw ShapeError("classify: no modality features given");
    int total = 0;
    for (const auto& f : features) {
        if (!f.defined()) throw ShapeError("classify: missing modality feature");
        total += f.rows();
    }
    if (total != weight.cols()) {
        throw ShapeError("classify: concatenated dimension " + std::to_string(total) +
                         " does not match classifier width " + std::to_string(weight.cols()));
    }
    Value cat = ad::concat_rows(features);
    return ad::transpose(ad::add(ad::matvec(weight, cat), bias));
}

}  // namespace quad
