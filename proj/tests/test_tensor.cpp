#include <doctest.h>

#include <cmath>
#include <functional>

#include "quad/optim.hpp"
#include "quad/tensor.hpp"

using namespace quad;
using ad::Value;

namespace {

Value random_value(int rows, int cols, Rng& rng, bool rg = true) { return Value::randn(rows, cols, rng, 1.0, rg); }

}  // namespace

TEST_CASE("elementwise forward values") {
    Value z = Value::scalar(0.0);
    CHECK(ad::sigmoid(z).item() == doctest::Approx(0.5));

    Value v = Value::column({1.0, 2.0, -3.0});
    CHECK(ad::cosine_similarity(v, v).item() == doctest::Approx(1.0).epsilon(1e-9));

    // checked against the direct formula exp(x_j) / sum exp
    Value logits = Value::from({1.0, 0.0}, 1, 2);
    Value sm = ad::softmax_rows(logits);
    double e = std::exp(1.0);
    CHECK(sm[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(sm[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
    CHECK(sm[0] == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("shape errors name the operator and shapes") {
    Value a = Value::zeros(2, 2);
    Value b = Value::zeros(3, 1);
    CHECK_THROWS_WITH_AS(ad::add(a, b), "add: incompatible shapes (2,2) and (3,1)", ShapeError);
    CHECK_THROWS_AS(ad::matvec(a, Value::zeros(3, 1)), ShapeError);
    CHECK_THROWS_AS(ad::matmul(a, Value::zeros(3, 3)), ShapeError);
}

TEST_CASE("log rejects non-positive input") {
    CHECK_THROWS_AS(ad::log_op(Value::column({1.0, 0.0})), NumericError);
    CHECK_THROWS_AS(ad::log_op(Value::column({-2.0})), NumericError);
}

TEST_CASE("backward on sum gives all-ones") {
    Value x = Value::column({3.0, -1.0, 2.0}, true);
    ad::backward(ad::sum(x));
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward on l1 of strictly positive input gives all-ones") {
    Value x = Value::column({3.0, 1.0, 2.0}, true);
    ad::backward(ad::l1_norm(x));
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("cross-entropy gradient equals softmax minus one-hot") {
    Value logits = Value::from({0.2, -1.0, 2.0, 0.5}, 1, 4, true);
    ad::backward(ad::cross_entropy_with_logits(logits, 2));
    Value sm = ad::softmax_rows(logits.detach_copy());
    for (int j = 0; j < 4; ++j) {
        double expect = sm[j] - (j == 2 ? 1.0 : 0.0);
        CHECK(logits.grad()[j] == doctest::Approx(expect).epsilon(1e-9));
    }
    // and against central finite differences
    double err = ad::grad_check([](const Value& x) { return ad::cross_entropy_with_logits(x, 2); }, logits);
    CHECK(err <= 1e-4);
}

TEST_CASE("backward accumulates: running twice doubles gradients") {
    Value x = Value::column({1.0, 2.0}, true);
    Value y = ad::sum(ad::mul(x, x));
    ad::backward(y);
    std::vector<double> once = x.grad();
    ad::backward(y);
    for (int i = 0; i < 2; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * once[i]));
}

TEST_CASE("backward requires a scalar root") {
    Value x = Value::column({1.0, 2.0}, true);
    CHECK_THROWS_AS(ad::backward(ad::mul(x, x)), ShapeError);
}

TEST_CASE("grad_check on constant is exactly zero") {
    Value x = Value::column({1.0, -2.0}, true);
    double err = ad::grad_check([](const Value&) { return Value::scalar(4.0); }, x);
    CHECK(err == 0.0);
}

TEST_CASE("grad_check per operator over random configurations") {
    Rng rng(20240811);
    using Fn = std::function<Value(const Value&)>;

    auto check_many = [&](const std::string& name, int rows, int cols, const Fn& f, double tol = 1e-4) {
        CAPTURE(name);
        for (int rep = 0; rep < 20; ++rep) {
            Value x = random_value(rows, cols, rng);
            CHECK(ad::grad_check(f, x) <= tol);
        }
    };

    Rng crng(7);
    Value other = random_value(3, 4, crng, false);
    Value mate = random_value(4, 2, crng, false);
    Value v_other = random_value(4, 1, crng, false);
    Value v_six = random_value(6, 1, crng, false);

    check_many("add", 3, 4, [&](const Value& x) { return ad::sum(ad::add(x, other)); });
    check_many("sub", 3, 4, [&](const Value& x) { return ad::sum(ad::sub(other, x)); });
    check_many("mul", 3, 4, [&](const Value& x) { return ad::sum(ad::mul(x, other)); });
    check_many("matmul", 3, 4, [&](const Value& x) { return ad::sum(ad::matmul(x, mate)); });
    check_many("matvec", 3, 4, [&](const Value& x) { return ad::sum(ad::matvec(x, v_other)); });
    check_many("matvec-by-x", 4, 1, [&](const Value& x) { return ad::sum(ad::matvec(ad::transpose(mate), x)); });
    check_many("sigmoid", 5, 1, [](const Value& x) { return ad::sum(ad::sigmoid(x)); });
    check_many("tanh", 5, 1, [](const Value& x) { return ad::sum(ad::tanh_op(x)); });
    check_many("relu", 5, 1, [](const Value& x) { return ad::sum(ad::relu(x)); });
    check_many("abs", 5, 1, [](const Value& x) { return ad::sum(ad::abs_op(x)); });
    check_many("neg", 5, 1, [](const Value& x) { return ad::sum(ad::neg(x)); });
    check_many("exp", 5, 1, [](const Value& x) { return ad::sum(ad::exp_op(x)); });
    check_many("softmax", 3, 4, [](const Value& x) { return ad::sum(ad::mul(ad::softmax_rows(x), x)); });
    check_many("mean", 4, 3, [](const Value& x) { return ad::mean(ad::mul(x, x)); });
    check_many("sum", 4, 3, [](const Value& x) { return ad::sum(ad::mul(x, x)); });
    check_many("cosine", 6, 1, [&](const Value& x) { return ad::cosine_similarity(x, v_six); });
    check_many("cosine-both", 4, 1, [&](const Value& x) { return ad::cosine_similarity(x, v_other); });
    check_many("concat-slice", 3, 1, [&](const Value& x) {
        Value cat = ad::concat_rows({x, x});
        return ad::sum(ad::mul(cat, cat));
    });
    check_many("transpose-reshape", 3, 4, [](const Value& x) {
        return ad::sum(ad::mul(ad::reshape(ad::transpose(x), 2, 6), ad::reshape(ad::transpose(x), 2, 6)));
    });
    check_many("cross-entropy", 1, 5, [](const Value& x) { return ad::cross_entropy_with_logits(x, 3); });

    // log needs positive input
    for (int rep = 0; rep < 20; ++rep) {
        Value x = Value::zeros(5, 1, true);
        for (auto& v : x.mutable_data()) v = 0.2 + rng.uniform();
        CHECK(ad::grad_check([](const Value& y) { return ad::sum(ad::log_op(y)); }, x) <= 1e-4);
    }
    // l1 away from the kink
    for (int rep = 0; rep < 20; ++rep) {
        Value x = Value::zeros(5, 1, true);
        for (auto& v : x.mutable_data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
        CHECK(ad::grad_check([](const Value& y) { return ad::l1_norm(y); }, x) <= 1e-4);
    }
}

TEST_CASE("grad_check through deep sigmoid/tanh chains") {
    Rng rng(99);
    for (int rep = 0; rep < 10; ++rep) {
        Value x = random_value(4, 1, rng);
        Value w1 = random_value(4, 4, rng, false);
        Value w2 = random_value(4, 4, rng, false);
        Value w3 = random_value(4, 4, rng, false);
        auto f = [&](const Value& v) {
            Value h = ad::sigmoid(ad::matvec(w1, v));
            h = ad::tanh_op(ad::matvec(w2, h));
            h = ad::sigmoid(ad::matvec(w3, h));
            return ad::mean(h);
        };
        CHECK(ad::grad_check(f, x) <= 1e-3);
    }
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    Rng rng(5);
    for (int rep = 0; rep < 25; ++rep) {
        Value x = random_value(4, 6, rng, false);
        Value p = ad::softmax_rows(x);
        for (int i = 0; i < 4; ++i) {
            double s = 0;
            for (int j = 0; j < 6; ++j) s += p.at(i, j);
            CHECK(std::fabs(s - 1.0) <= 1e-12);
        }
        Value shifted = x.detach_copy();
        double c = rng.normal() * 10;
        for (int j = 0; j < 6; ++j) shifted.mutable_data()[2 * 6 + j] += c;
        Value p2 = ad::softmax_rows(shifted);
        for (int j = 0; j < 6; ++j) CHECK(std::fabs(p2.at(2, j) - p.at(2, j)) <= 1e-9);
    }
}

TEST_CASE("forward determinism across runs") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Value x = random_value(6, 6, rng, false);
        Value y = random_value(6, 1, rng, false);
        return ad::sum(ad::sigmoid(ad::matvec(x, y))).item();
    };
    double a = run(42), b = run(42);
    CHECK(a == b);  // bit identical
}

TEST_CASE("op_forward dispatch matches the named entry points") {
    Value a = Value::column({1.0, 2.0});
    Value b = Value::column({0.5, -1.0});
    CHECK(ad::op_forward(ad::OpKind::Add, {a, b}).data() == ad::add(a, b).data());
    CHECK(ad::op_forward(ad::OpKind::Concat, {a, b}).rows() == 4);
    Value logits = Value::from({0.3, 0.7}, 1, 2);
    CHECK(ad::op_forward(ad::OpKind::CrossEntropyWithLogits, {logits, Value::scalar(1.0)}).item() ==
          doctest::Approx(ad::cross_entropy_with_logits(logits, 1).item()));
    CHECK_THROWS_AS(ad::op_forward(ad::OpKind::Sigmoid, {a, b}), ShapeError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Value p = Value::column({1.5, -2.0}, true);
    ad::Adam adam({p});
    std::vector<double> before = p.data();
    adam.step();
    CHECK(p.data() == before);
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
    Value p = Value::scalar(0.0, true);
    ad::AdamConfig cfg;
    cfg.lr = 1e-2;
    ad::Adam adam({p}, cfg);
    p.mutable_grad()[0] = 1.0;
    adam.step();
    // mhat = 1, vhat = 1 after bias correction -> step = -lr / (1 + eps)
    CHECK(p.item() == doctest::Approx(-cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam: step counter advances with zeroing between") {
    Value p = Value::scalar(0.0, true);
    ad::Adam adam({p});
    p.mutable_grad()[0] = 0.5;
    adam.step();
    adam.zero_grad();
    p.mutable_grad()[0] = 0.5;
    adam.step();
    CHECK(adam.step_count() == 2);
}

TEST_CASE("adam: shape drift is rejected") {
    Value p = Value::column({1.0, 2.0}, true);
    ad::Adam adam({p});
    p.node()->data.resize(3);  // simulate drift
    p.node()->grad.resize(3);
    CHECK_THROWS_AS(adam.step(), ShapeError);
}

TEST_CASE("grad is only available when requested") {
    Value x = Value::column({1.0});
    CHECK_THROWS_AS(x.grad(), Error);
    Value y = Value::column({1.0}, true);
    CHECK(y.grad().size() == 1);
}

TEST_CASE("no-grad guard suppresses graph recording") {
    Value x = Value::column({1.0, 2.0}, true);
    ad::NoGradGuard guard;
    Value y = ad::sum(ad::mul(x, x));
    CHECK_FALSE(y.requires_grad());
}
