#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "quad/common.hpp"

namespace quad::ad {

// Reverse-mode autodiff over dense rank-0/1/2 arrays of doubles.
// Scalars are 1x1, vectors are n x 1, matrices are rows x cols (row-major).
// A graph node is recorded only when some input requires grad; backward
// accumulates into .grad and never overwrites, so running backward twice
// without zeroing doubles every gradient.

struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // adds into parents' grads

    int size() const { return rows * cols; }
};

class Value {
public:
    Value() = default;

    static Value zeros(int rows, int cols, bool requires_grad = false);
    static Value full(int rows, int cols, double fill, bool requires_grad = false);
    static Value scalar(double v, bool requires_grad = false);
    static Value from(std::vector<double> data, int rows, int cols, bool requires_grad = false);
    static Value column(std::vector<double> data, bool requires_grad = false);
    static Value randn(int rows, int cols, Rng& rng, double scale = 1.0, bool requires_grad = false);
    static Value identity(int n, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    int size() const { return node_->size(); }
    bool is_scalar() const { return rows() == 1 && cols() == 1; }
    bool requires_grad() const { return node_->requires_grad; }

    double at(int r, int c) const { return node_->data[static_cast<std::size_t>(r) * cols() + c]; }
    double operator[](int i) const { return node_->data[i]; }
    double item() const;

    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& mutable_data() { return node_->data; }
    const std::vector<double>& grad() const;
    std::vector<double>& mutable_grad();

    void zero_grad();
    // Deep copy with no graph history.
    Value detach_copy(bool requires_grad = false) const;

    std::shared_ptr<Node>& node() { return node_; }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// While alive, no graph nodes are recorded; pure numeric evaluation.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// --- operators ---------------------------------------------------------

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);  // elementwise
Value matmul(const Value& a, const Value& b);
Value matvec(const Value& a, const Value& x);
Value sigmoid(const Value& x);
Value tanh_op(const Value& x);
Value relu(const Value& x);
Value abs_op(const Value& x);
Value neg(const Value& x);
Value log_op(const Value& x);
Value exp_op(const Value& x);
Value softmax_rows(const Value& m);
Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const std::vector<Value>& parts);
Value mean(const Value& x);
Value sum(const Value& x);
Value l1_norm(const Value& x);
Value cosine_similarity(const Value& a, const Value& b);
Value cross_entropy_with_logits(const Value& logits, int label);
Value scale(const Value& x, double k);
Value transpose(const Value& m);
Value reshape(const Value& x, int rows, int cols);
Value slice_rows(const Value& x, int start, int len);
Value col(const Value& m, int j);

enum class OpKind {
    Add,
    Sub,
    Mul,
    MatMul,
    MatVec,
    Sigmoid,
    Tanh,
    Relu,
    Abs,
    Neg,
    Log,
    Exp,
    SoftmaxRows,
    Concat,
    Mean,
    Sum,
    L1Norm,
    CosineSimilarity,
    CrossEntropyWithLogits,
};

// Tag-dispatched entry point. Concat stacks along rows; cross-entropy takes
// the label as a 1x1 second input.
Value op_forward(OpKind kind, const std::vector<Value>& inputs);

// root must be 1x1; accumulates d(root)/d(ancestor) into every
// grad-requiring ancestor.
void backward(const Value& root);

// Max over coordinates of |analytic - central difference| / max(1, |cd|).
double grad_check(const std::function<Value(const Value&)>& f, const Value& x, double eps = 1e-5);

int argmax(const Value& v);

}  // namespace quad::ad
