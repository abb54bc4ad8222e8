#include "quad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace quad::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Value& v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(%d,%d)", v.rows(), v.cols());
    return buf;
}

[[noreturn]] void shape_fail(const char* op, const Value& a) {
    throw ShapeError(std::string(op) + ": bad shape " + shape_str(a));
}

[[noreturn]] void shape_fail(const char* op, const Value& a, const Value& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

std::shared_ptr<Node> make_node(int rows, int cols, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->data.size(), 0.0);
    return n;
}

Value wrap(std::shared_ptr<Node> n) {
    Value v;
    v.node() = std::move(n);
    return v;
}

bool track(const std::vector<Value>& inputs) {
    if (!g_grad_enabled) return false;
    for (const auto& v : inputs) {
        if (v.requires_grad()) return true;
    }
    return false;
}

// Builds the result node; records parents + backward rule only when tracking.
Value make_result(int rows, int cols, const std::vector<Value>& inputs, std::function<void(Node&)> backward_fn) {
    bool rg = track(inputs);
    auto n = make_node(rows, cols, rg);
    if (rg) {
        n->parents.reserve(inputs.size());
        for (const auto& v : inputs) n->parents.push_back(v.node());
        n->backward_fn = std::move(backward_fn);
    }
    return wrap(n);
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

// --- Value basics -------------------------------------------------------

Value Value::zeros(int rows, int cols, bool requires_grad) {
    if (rows < 1 || cols < 1) throw ShapeError("Value::zeros: non-positive shape");
    return wrap(make_node(rows, cols, requires_grad));
}

Value Value::full(int rows, int cols, double fill, bool requires_grad) {
    Value v = zeros(rows, cols, requires_grad);
    std::fill(v.mutable_data().begin(), v.mutable_data().end(), fill);
    return v;
}

Value Value::scalar(double v, bool requires_grad) { return full(1, 1, v, requires_grad); }

Value Value::from(std::vector<double> data, int rows, int cols, bool requires_grad) {
    if (static_cast<std::size_t>(rows) * cols != data.size()) {
        throw ShapeError("Value::from: data length does not match shape");
    }
    Value v = zeros(rows, cols, requires_grad);
    v.mutable_data() = std::move(data);
    return v;
}

Value Value::column(std::vector<double> data, bool requires_grad) {
    int n = static_cast<int>(data.size());
    return from(std::move(data), n, 1, requires_grad);
}

Value Value::randn(int rows, int cols, Rng& rng, double s, bool requires_grad) {
    Value v = zeros(rows, cols, requires_grad);
    for (auto& x : v.mutable_data()) x = s * rng.normal();
    return v;
}

Value Value::identity(int n, bool requires_grad) {
    Value v = zeros(n, n, requires_grad);
    for (int i = 0; i < n; ++i) v.mutable_data()[static_cast<std::size_t>(i) * n + i] = 1.0;
    return v;
}

double Value::item() const {
    if (!is_scalar()) throw ShapeError("Value::item: not a scalar, shape " + shape_str(*this));
    return node_->data[0];
}

const std::vector<double>& Value::grad() const {
    if (!node_->requires_grad) throw Error("Value::grad: value does not require grad");
    return node_->grad;
}

std::vector<double>& Value::mutable_grad() {
    if (!node_->requires_grad) throw Error("Value::grad: value does not require grad");
    return node_->grad;
}

void Value::zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Value Value::detach_copy(bool requires_grad) const {
    Value v = zeros(rows(), cols(), requires_grad);
    v.mutable_data() = node_->data;
    return v;
}

// --- elementwise binary -------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Value ew_binary(const char* name, const Value& a, const Value& b, Fwd fwd, Bwd bwd) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail(name, a, b);
    auto pa = a.node();
    auto pb = b.node();
    Value out = make_result(a.rows(), a.cols(), {a, b}, [pa, pb, bwd](Node& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            double g = self.grad[i];
            double da, db;
            bwd(pa->data[i], pb->data[i], g, da, db);
            if (pa->requires_grad) pa->grad[i] += da;
            if (pb->requires_grad) pb->grad[i] += db;
        }
    });
    auto& d = out.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = fwd(pa->data[i], pb->data[i]);
    return out;
}

template <typename Fwd, typename Bwd>
Value ew_unary(const Value& x, Fwd fwd, Bwd bwd) {
    auto px = x.node();
    Value out = make_result(x.rows(), x.cols(), {x}, [px, bwd](Node& self) {
        if (!px->requires_grad) return;
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            px->grad[i] += bwd(px->data[i], self.data[i]) * self.grad[i];
        }
    });
    auto& d = out.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = fwd(px->data[i]);
    return out;
}

}  // namespace

Value add(const Value& a, const Value& b) {
    return ew_binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Value sub(const Value& a, const Value& b) {
    return ew_binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Value mul(const Value& a, const Value& b) {
    return ew_binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

// --- matrix products ----------------------------------------------------

Value matmul(const Value& a, const Value& b) {
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    const int m = a.rows(), k = a.cols(), n = b.cols();
    auto pa = a.node();
    auto pb = b.node();
    Value out = make_result(m, n, {a, b}, [pa, pb, m, k, n](Node& self) {
        // dA += dC * B^T ; dB += A^T * dC
        if (pa->requires_grad) {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < k; ++j) {
                    double acc = 0.0;
                    for (int c = 0; c < n; ++c) acc += self.grad[i * n + c] * pb->data[j * n + c];
                    pa->grad[i * k + j] += acc;
                }
        }
        if (pb->requires_grad) {
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int r = 0; r < m; ++r) acc += pa->data[r * k + i] * self.grad[r * n + j];
                    pb->grad[i * n + j] += acc;
                }
        }
    });
    auto& d = out.mutable_data();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
            double av = pa->data[i * k + j];
            if (av == 0.0) continue;
            const double* brow = &pb->data[static_cast<std::size_t>(j) * n];
            double* drow = &d[static_cast<std::size_t>(i) * n];
            for (int c = 0; c < n; ++c) drow[c] += av * brow[c];
        }
    }
    return out;
}

Value matvec(const Value& a, const Value& x) {
    if (x.cols() != 1 || a.cols() != x.rows()) shape_fail("matvec", a, x);
    const int m = a.rows(), k = a.cols();
    auto pa = a.node();
    auto px = x.node();
    Value out = make_result(m, 1, {a, x}, [pa, px, m, k](Node& self) {
        if (pa->requires_grad) {
            for (int i = 0; i < m; ++i) {
                double g = self.grad[i];
                if (g == 0.0) continue;
                double* arow = &pa->grad[static_cast<std::size_t>(i) * k];
                for (int j = 0; j < k; ++j) arow[j] += g * px->data[j];
            }
        }
        if (px->requires_grad) {
            for (int i = 0; i < m; ++i) {
                double g = self.grad[i];
                if (g == 0.0) continue;
                const double* arow = &pa->data[static_cast<std::size_t>(i) * k];
                for (int j = 0; j < k; ++j) px->grad[j] += g * arow[j];
            }
        }
    });
    auto& d = out.mutable_data();
    for (int i = 0; i < m; ++i) {
        const double* arow = &pa->data[static_cast<std::size_t>(i) * k];
        double acc = 0.0;
        for (int j = 0; j < k; ++j) acc += arow[j] * px->data[j];
        d[i] = acc;
    }
    return out;
}

// --- elementwise unary ---------------------------------------------------

Value sigmoid(const Value& x) {
    return ew_unary(
        x,
        [](double v) {
            if (v >= 0) {
                double e = std::exp(-v);
                return 1.0 / (1.0 + e);
            }
            double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Value tanh_op(const Value& x) {
    return ew_unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Value relu(const Value& x) {
    return ew_unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Value abs_op(const Value& x) {
    return ew_unary(
        x, [](double v) { return std::fabs(v); },
        [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Value neg(const Value& x) {
    return ew_unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Value log_op(const Value& x) {
    for (double v : x.data()) {
        if (!(v > 0.0)) throw NumericError("log: domain error, argument not strictly positive");
    }
    return ew_unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Value exp_op(const Value& x) {
    return ew_unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Value scale(const Value& x, double k) {
    return ew_unary(x, [k](double v) { return k * v; }, [k](double, double) { return k; });
}

// --- softmax / reductions -------------------------------------------------

Value softmax_rows(const Value& m) {
    const int r = m.rows(), c = m.cols();
    auto pm = m.node();
    Value out = make_result(r, c, {m}, [pm, r, c](Node& self) {
        if (!pm->requires_grad) return;
        for (int i = 0; i < r; ++i) {
            const double* p = &self.data[static_cast<std::size_t>(i) * c];
            const double* g = &self.grad[static_cast<std::size_t>(i) * c];
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += g[j] * p[j];
            double* gx = &pm->grad[static_cast<std::size_t>(i) * c];
            for (int j = 0; j < c; ++j) gx[j] += p[j] * (g[j] - dot);
        }
    });
    auto& d = out.mutable_data();
    for (int i = 0; i < r; ++i) {
        const double* x = &pm->data[static_cast<std::size_t>(i) * c];
        double mx = x[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        double* drow = &d[static_cast<std::size_t>(i) * c];
        for (int j = 0; j < c; ++j) {
            drow[j] = std::exp(x[j] - mx);
            z += drow[j];
        }
        for (int j = 0; j < c; ++j) drow[j] /= z;
    }
    return out;
}

Value sum(const Value& x) {
    auto px = x.node();
    Value out = make_result(1, 1, {x}, [px](Node& self) {
        if (!px->requires_grad) return;
        double g = self.grad[0];
        for (auto& gi : px->grad) gi += g;
    });
    double acc = 0.0;
    for (double v : px->data) acc += v;
    out.mutable_data()[0] = acc;
    return out;
}

Value mean(const Value& x) {
    auto px = x.node();
    const double inv = 1.0 / x.size();
    Value out = make_result(1, 1, {x}, [px, inv](Node& self) {
        if (!px->requires_grad) return;
        double g = self.grad[0] * inv;
        for (auto& gi : px->grad) gi += g;
    });
    double acc = 0.0;
    for (double v : px->data) acc += v;
    out.mutable_data()[0] = acc * inv;
    return out;
}

Value l1_norm(const Value& x) {
    auto px = x.node();
    Value out = make_result(1, 1, {x}, [px](Node& self) {
        if (!px->requires_grad) return;
        double g = self.grad[0];
        for (std::size_t i = 0; i < px->data.size(); ++i) {
            double v = px->data[i];
            px->grad[i] += g * (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
        }
    });
    double acc = 0.0;
    for (double v : px->data) acc += std::fabs(v);
    out.mutable_data()[0] = acc;
    return out;
}

Value cosine_similarity(const Value& a, const Value& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("cosine-similarity", a, b);
    constexpr double kNormEps = 1e-12;
    auto pa = a.node();
    auto pb = b.node();
    Value out = make_result(1, 1, {a, b}, [pa, pb](Node& self) {
        double dot = 0.0, na2 = 0.0, nb2 = 0.0;
        for (std::size_t i = 0; i < pa->data.size(); ++i) {
            dot += pa->data[i] * pb->data[i];
            na2 += pa->data[i] * pa->data[i];
            nb2 += pb->data[i] * pb->data[i];
        }
        double na = std::sqrt(na2) + kNormEps;
        double nb = std::sqrt(nb2) + kNormEps;
        double g = self.grad[0];
        double inv = 1.0 / (na * nb);
        // d cos / da = b/(na*nb) - dot * a / (na^2 * nb * |a|)
        double ca = (na2 > 0.0) ? dot / (na * na * nb * std::sqrt(na2)) : 0.0;
        double cb = (nb2 > 0.0) ? dot / (nb * nb * na * std::sqrt(nb2)) : 0.0;
        for (std::size_t i = 0; i < pa->data.size(); ++i) {
            if (pa->requires_grad) pa->grad[i] += g * (pb->data[i] * inv - ca * pa->data[i]);
            if (pb->requires_grad) pb->grad[i] += g * (pa->data[i] * inv - cb * pb->data[i]);
        }
    });
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t i = 0; i < pa->data.size(); ++i) {
        dot += pa->data[i] * pb->data[i];
        na2 += pa->data[i] * pa->data[i];
        nb2 += pb->data[i] * pb->data[i];
    }
    out.mutable_data()[0] = dot / ((std::sqrt(na2) + kNormEps) * (std::sqrt(nb2) + kNormEps));
    return out;
}

Value cross_entropy_with_logits(const Value& logits, int label) {
    if (logits.rows() != 1 && logits.cols() != 1) shape_fail("cross-entropy-with-logits", logits);
    const int n = logits.size();
    if (label < 0 || label >= n) {
        throw DataError("cross-entropy-with-logits: label " + std::to_string(label) + " out of range [0," +
                        std::to_string(n) + ")");
    }
    auto pl = logits.node();
    Value out = make_result(1, 1, {logits}, [pl, label, n](Node& self) {
        if (!pl->requires_grad) return;
        double mx = pl->data[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, pl->data[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(pl->data[j] - mx);
        double g = self.grad[0];
        for (int j = 0; j < n; ++j) {
            double p = std::exp(pl->data[j] - mx) / z;
            pl->grad[j] += g * (p - (j == label ? 1.0 : 0.0));
        }
    });
    double mx = pl->data[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, pl->data[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(pl->data[j] - mx);
    out.mutable_data()[0] = std::log(z) + mx - pl->data[label];
    return out;
}

// --- structure ops --------------------------------------------------------

Value concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw ShapeError("concat: empty input list");
    int cols = parts[0].cols();
    int rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) shape_fail("concat", parts[0], p);
        rows += p.rows();
    }
    std::vector<std::shared_ptr<Node>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node());
    Value out = make_result(rows, cols, parts, [nodes](Node& self) {
        std::size_t off = 0;
        for (const auto& p : nodes) {
            std::size_t n = p->data.size();
            if (p->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) p->grad[i] += self.grad[off + i];
            }
            off += n;
        }
    });
    auto& d = out.mutable_data();
    std::size_t off = 0;
    for (const auto& p : nodes) {
        std::copy(p->data.begin(), p->data.end(), d.begin() + off);
        off += p->data.size();
    }
    return out;
}

Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw ShapeError("concat: empty input list");
    int rows = parts[0].rows();
    int cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) shape_fail("concat", parts[0], p);
        cols += p.cols();
    }
    std::vector<std::shared_ptr<Node>> nodes;
    std::vector<int> widths;
    for (const auto& p : parts) {
        nodes.push_back(p.node());
        widths.push_back(p.cols());
    }
    Value out = make_result(rows, cols, parts, [nodes, widths, rows, cols](Node& self) {
        int coff = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto& p = nodes[k];
            if (p->requires_grad) {
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < widths[k]; ++j)
                        p->grad[static_cast<std::size_t>(i) * widths[k] + j] +=
                            self.grad[static_cast<std::size_t>(i) * cols + coff + j];
            }
            coff += widths[k];
        }
    });
    auto& d = out.mutable_data();
    int coff = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < widths[k]; ++j)
                d[static_cast<std::size_t>(i) * cols + coff + j] =
                    nodes[k]->data[static_cast<std::size_t>(i) * widths[k] + j];
        coff += widths[k];
    }
    return out;
}

Value transpose(const Value& m) {
    const int r = m.rows(), c = m.cols();
    auto pm = m.node();
    Value out = make_result(c, r, {m}, [pm, r, c](Node& self) {
        if (!pm->requires_grad) return;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                pm->grad[static_cast<std::size_t>(i) * c + j] += self.grad[static_cast<std::size_t>(j) * r + i];
    });
    auto& d = out.mutable_data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) d[static_cast<std::size_t>(j) * r + i] = pm->data[static_cast<std::size_t>(i) * c + j];
    return out;
}

Value reshape(const Value& x, int rows, int cols) {
    if (rows * cols != x.size()) shape_fail("reshape", x);
    auto px = x.node();
    Value out = make_result(rows, cols, {x}, [px](Node& self) {
        if (!px->requires_grad) return;
        for (std::size_t i = 0; i < self.data.size(); ++i) px->grad[i] += self.grad[i];
    });
    out.mutable_data() = px->data;
    return out;
}

Value slice_rows(const Value& x, int start, int len) {
    if (start < 0 || len < 1 || start + len > x.rows()) shape_fail("slice_rows", x);
    const int c = x.cols();
    auto px = x.node();
    Value out = make_result(len, c, {x}, [px, start, c](Node& self) {
        if (!px->requires_grad) return;
        std::size_t off = static_cast<std::size_t>(start) * c;
        for (std::size_t i = 0; i < self.data.size(); ++i) px->grad[off + i] += self.grad[i];
    });
    auto& d = out.mutable_data();
    std::size_t off = static_cast<std::size_t>(start) * c;
    std::copy(px->data.begin() + off, px->data.begin() + off + static_cast<std::size_t>(len) * c, d.begin());
    return out;
}

Value col(const Value& m, int j) {
    if (j < 0 || j >= m.cols()) shape_fail("col", m);
    const int r = m.rows(), c = m.cols();
    auto pm = m.node();
    Value out = make_result(r, 1, {m}, [pm, j, r, c](Node& self) {
        if (!pm->requires_grad) return;
        for (int i = 0; i < r; ++i) pm->grad[static_cast<std::size_t>(i) * c + j] += self.grad[i];
    });
    auto& d = out.mutable_data();
    for (int i = 0; i < r; ++i) d[i] = pm->data[static_cast<std::size_t>(i) * c + j];
    return out;
}

Value op_forward(OpKind kind, const std::vector<Value>& inputs) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n) throw ShapeError("op_forward: wrong input count");
    };
    switch (kind) {
        case OpKind::Add: need(2); return add(inputs[0], inputs[1]);
        case OpKind::Sub: need(2); return sub(inputs[0], inputs[1]);
        case OpKind::Mul: need(2); return mul(inputs[0], inputs[1]);
        case OpKind::MatMul: need(2); return matmul(inputs[0], inputs[1]);
        case OpKind::MatVec: need(2); return matvec(inputs[0], inputs[1]);
        case OpKind::Sigmoid: need(1); return sigmoid(inputs[0]);
        case OpKind::Tanh: need(1); return tanh_op(inputs[0]);
        case OpKind::Relu: need(1); return relu(inputs[0]);
        case OpKind::Abs: need(1); return abs_op(inputs[0]);
        case OpKind::Neg: need(1); return neg(inputs[0]);
        case OpKind::Log: need(1); return log_op(inputs[0]);
        case OpKind::Exp: need(1); return exp_op(inputs[0]);
        case OpKind::SoftmaxRows: need(1); return softmax_rows(inputs[0]);
        case OpKind::Concat: return concat_rows(inputs);
        case OpKind::Mean: need(1); return mean(inputs[0]);
        case OpKind::Sum: need(1); return sum(inputs[0]);
        case OpKind::L1Norm: need(1); return l1_norm(inputs[0]);
        case OpKind::CosineSimilarity: need(2); return cosine_similarity(inputs[0], inputs[1]);
        case OpKind::CrossEntropyWithLogits:
            need(2);
            return cross_entropy_with_logits(inputs[0], static_cast<int>(inputs[1].item()));
    }
    throw Error("op_forward: unknown operator tag");
}

// --- backward -------------------------------------------------------------

void backward(const Value& root) {
    if (!root.is_scalar()) throw ShapeError("backward: root must be scalar, got " + shape_str(root));
    if (!root.requires_grad()) return;

    // Iterative post-order DFS; reverse of the order is a valid topological
    // ordering, so each node's backward rule runs exactly once.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* n;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node* p = f.n->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    // Each call propagates a fresh unit of gradient and then restores prior
    // accumulation, so two backward calls without zeroing double every grad.
    std::vector<std::vector<double>> saved(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        saved[i] = std::move(order[i]->grad);
        order[i]->grad.assign(saved[i].size(), 0.0);
    }

    root.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }

    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t j = 0; j < saved[i].size(); ++j) order[i]->grad[j] += saved[i][j];
    }
}

double grad_check(const std::function<Value(const Value&)>& f, const Value& x, double eps) {
    Value probe = x.detach_copy(true);
    Value y = f(probe);
    if (!y.is_scalar()) throw ShapeError("grad_check: f must produce a scalar");
    probe.zero_grad();
    backward(y);
    std::vector<double> analytic = probe.grad();

    double worst = 0.0;
    NoGradGuard guard;
    for (int i = 0; i < probe.size(); ++i) {
        Value xp = x.detach_copy(false);
        Value xm = x.detach_copy(false);
        xp.mutable_data()[i] += eps;
        xm.mutable_data()[i] -= eps;
        double num = (f(xp).item() - f(xm).item()) / (2.0 * eps);
        double err = std::fabs(analytic[i] - num) / std::max(1.0, std::fabs(num));
        worst = std::max(worst, err);
    }
    return worst;
}

int argmax(const Value& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace quad::ad
