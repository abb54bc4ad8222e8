#pragma once

#include <vector>

#include "quad/tensor.hpp"

namespace quad::ad {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam. step() applies the update and leaves gradients untouched;
// the caller zeroes them via zero_grad().
class Adam {
public:
    Adam(std::vector<Value> params, AdamConfig cfg = {});

    void step();
    void zero_grad();
    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    long step_count() const { return t_; }
    const std::vector<Value>& params() const { return params_; }

private:
    std::vector<Value> params_;
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace quad::ad
