#include <doctest.h>

#include <cmath>
#include <vector>

#include "quad/hyper.hpp"

using namespace quad;
using ad::Value;

namespace {

double sigmoid_ref(double v) { return 1.0 / (1.0 + std::exp(-v)); }

std::vector<double> matvec_ref(const Value& m, const std::vector<double>& x) {
    std::vector<double> y(m.rows(), 0.0);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) y[i] += m.at(i, j) * x[j];
    return y;
}

// independent scalar-loop LSTM cell
void lstm_ref(const LstmUnit& u, const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) {
    auto gate = [&](const Value& wx, const Value& wh, const Value& b, bool tanh_act) {
        std::vector<double> g = matvec_ref(wx, x);
        std::vector<double> gh = matvec_ref(wh, h);
        for (int i = 0; i < u.hidden_dim; ++i) {
            g[i] += gh[i] + b[i];
            g[i] = tanh_act ? std::tanh(g[i]) : sigmoid_ref(g[i]);
        }
        return g;
    };
    auto gi = gate(u.wx_i, u.wh_i, u.b_i, false);
    auto gf = gate(u.wx_f, u.wh_f, u.b_f, false);
    auto go = gate(u.wx_o, u.wh_o, u.b_o, false);
    auto gg = gate(u.wx_g, u.wh_g, u.b_g, true);
    for (int i = 0; i < u.hidden_dim; ++i) {
        c[i] = gf[i] * c[i] + gi[i] * gg[i];
        h[i] = go[i] * std::tanh(c[i]);
    }
}

// feature-level quality of x for class y against per-class prototypes
std::vector<double> quality_ref(const std::vector<double>& x, const std::vector<std::vector<double>>& protos, int y) {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        double mx = -1e300;
        std::vector<double> vals(protos.size());
        for (std::size_t c = 0; c < protos.size(); ++c) {
            vals[c] = -std::fabs(x[j] - protos[c][j]);
            mx = std::max(mx, vals[c]);
        }
        double z = 0;
        for (double v : vals) z += std::exp(v - mx);
        out[j] = std::exp(vals[y] - mx) / z;
    }
    return out;
}

BankConstants two_class_bank(int d0, int d1) {
    std::vector<std::vector<std::vector<double>>> protos(2);
    for (int c = 0; c < 2; ++c) {
        protos[c].push_back(std::vector<double>(d0, c == 0 ? 1.0 : -1.0));
        protos[c].push_back(std::vector<double>(d1, c == 0 ? 2.0 : -2.0));
    }
    PrototypeBank bank = PrototypeBank::from_prototypes(protos, BankStage::Optimized);
    return BankConstants::from(bank);
}

}  // namespace

TEST_CASE("initial states: shared-fixed reuses the construction draw") {
    Rng rng(3);
    LstmUnit unit = LstmUnit::init(6, 4, rng);
    LstmState a = initial_state(unit, StateInitMode::SharedFixed, 99, 0);
    LstmState b = initial_state(unit, StateInitMode::SharedFixed, 123, 57);
    CHECK(a.h.data() == b.h.data());
    CHECK(a.c.data() == b.c.data());
    CHECK(a.h.rows() == 4);
    CHECK(a.c.rows() == 4);
}

TEST_CASE("initial states: per-sample draws are reproducible and distinct") {
    Rng rng(3);
    LstmUnit unit = LstmUnit::init(6, 4, rng);
    LstmState a = initial_state(unit, StateInitMode::PerSampleRandom, 99, 7);
    LstmState b = initial_state(unit, StateInitMode::PerSampleRandom, 99, 7);
    LstmState c = initial_state(unit, StateInitMode::PerSampleRandom, 99, 8);
    CHECK(a.h.data() == b.h.data());
    CHECK(a.c.data() == b.c.data());
    CHECK(a.h.data() != c.h.data());
}

TEST_CASE("lstm cell: all-zero parameters and state produce the zero vector") {
    LstmUnit u;
    u.input_dim = 3;
    u.hidden_dim = 2;
    auto zero_mat = [](int r, int c) { return Value::zeros(r, c, true); };
    u.wx_i = zero_mat(2, 3); u.wh_i = zero_mat(2, 2); u.b_i = zero_mat(2, 1);
    u.wx_f = zero_mat(2, 3); u.wh_f = zero_mat(2, 2); u.b_f = zero_mat(2, 1);
    u.wx_o = zero_mat(2, 3); u.wh_o = zero_mat(2, 2); u.b_o = zero_mat(2, 1);
    u.wx_g = zero_mat(2, 3); u.wh_g = zero_mat(2, 2); u.b_g = zero_mat(2, 1);

    LstmState s{Value::zeros(2, 1), Value::zeros(2, 1)};
    auto [code, next] = lstm_step(Value::column({1.0, -2.0, 3.0}), s, u);
    for (int i = 0; i < 2; ++i) CHECK(code[i] == doctest::Approx(0.0));  // 0.5 * tanh(0)
}

TEST_CASE("lstm cell: saturated forget keeps the cell, closed input adds nothing") {
    LstmUnit u;
    u.input_dim = 2;
    u.hidden_dim = 3;
    auto zero_mat = [](int r, int c) { return Value::zeros(r, c, true); };
    u.wx_i = zero_mat(3, 2); u.wh_i = zero_mat(3, 3); u.b_i = Value::full(3, 1, -50.0, true);
    u.wx_f = zero_mat(3, 2); u.wh_f = zero_mat(3, 3); u.b_f = Value::full(3, 1, 50.0, true);
    u.wx_o = zero_mat(3, 2); u.wh_o = zero_mat(3, 3); u.b_o = zero_mat(3, 1);
    u.wx_g = zero_mat(3, 2); u.wh_g = zero_mat(3, 3); u.b_g = zero_mat(3, 1);

    std::vector<double> cell = {4.0, 6.0, -2.0};
    LstmState s{Value::zeros(3, 1), Value::column(cell)};
    auto [code, next] = lstm_step(Value::column({0.5, 0.5}), s, u);
    for (int i = 0; i < 3; ++i) {
        CHECK(next.c[i] == doctest::Approx(cell[i]).epsilon(1e-9));
        CHECK(code[i] == doctest::Approx(0.5 * std::tanh(cell[i])).epsilon(1e-9));  // o-gate at 0.5
    }
}

TEST_CASE("lstm cell matches an independent per-coordinate loop") {
    Rng rng(8);
    LstmUnit u = LstmUnit::init(5, 4, rng);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(5), h0(4), c0(4);
        for (auto& v : x) v = rng.normal();
        for (auto& v : h0) v = rng.normal();
        for (auto& v : c0) v = rng.normal();

        LstmState s{Value::column(h0), Value::column(c0)};
        auto [code, next] = lstm_step(Value::column(x), s, u);

        std::vector<double> h = h0, c = c0;
        lstm_ref(u, x, h, c);
        for (int i = 0; i < 4; ++i) {
            CHECK(std::fabs(code[i] - h[i]) <= 1e-12);
            CHECK(std::fabs(next.c[i] - c[i]) <= 1e-12);
        }
    }
}

TEST_CASE("lstm cell rejects a mis-sized input") {
    Rng rng(9);
    LstmUnit u = LstmUnit::init(5, 4, rng);
    LstmState s = initial_state(u, StateInitMode::SharedFixed, 0, 0);
    CHECK_THROWS_AS(lstm_step(Value::column({1.0, 2.0}), s, u), ShapeError);
}

TEST_CASE("decoder output reshapes into a square gate map plus bias") {
    Rng rng(10);
    ParamDecoder d = ParamDecoder::init(4, 6, rng);
    CHECK(d.weight.rows() == 4 * 5);
    Value code = Value::randn(6, 1, rng);
    BlockParams p = d.decode(code);
    CHECK(p.weight.rows() == 4);
    CHECK(p.weight.cols() == 4);
    CHECK(p.bias.rows() == 4);

    // reshape is row-major over the first d*d outputs
    std::vector<double> flat = matvec_ref(d.weight, code.data());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(p.weight.at(i, j) == doctest::Approx(flat[i * 4 + j]).epsilon(1e-12));
    for (int i = 0; i < 4; ++i) CHECK(p.bias[i] == doctest::Approx(flat[16 + i]).epsilon(1e-12));
}

TEST_CASE("greedy pass with unit depths runs one step and one ledger entry") {
    Rng rng(11);
    BankConstants bank = two_class_bank(3, 4);
    LstmUnit unit = LstmUnit::init(7, 5, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(3, 5, rng), ParamDecoder::init(4, 5, rng)};

    std::vector<Value> inputs = {Value::randn(3, 1, rng), Value::randn(4, 1, rng)};
    DepthPlan plan{{1, 1}};
    GreedyResult res = greedy_forward(inputs, plan, unit, decoders, bank, {0, 0}, {});
    CHECK(res.gains.per_depth.size() == 1);
    CHECK(res.trace.gates[0].size() == 1);
    CHECK(res.trace.gates[1].size() == 1);
    CHECK(res.trace.features[0].size() == 2);  // input + one block output
}

TEST_CASE("unchanged feature quality contributes zero gain") {
    // a single-class bank pins every quality at 1, so each rectified delta is 0
    PrototypeBank bank =
        PrototypeBank::from_prototypes({{std::vector<double>(3, 0.5), std::vector<double>(3, -0.5)}},
                                       BankStage::Optimized);
    BankConstants bc = BankConstants::from(bank);
    Rng rng(12);
    LstmUnit unit = LstmUnit::init(6, 4, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(3, 4, rng), ParamDecoder::init(3, 4, rng)};
    std::vector<Value> inputs = {Value::randn(3, 1, rng), Value::randn(3, 1, rng)};
    GreedyResult res = greedy_forward(inputs, DepthPlan{{2, 2}}, unit, decoders, bc, {0, 0}, {});
    CHECK(res.gains.total.item() == doctest::Approx(0.0));
}

TEST_CASE("mixed depths freeze the finished modality inside the joint input") {
    // M = 2 with depths (2, 1): at t = 2 the concatenated input must hold
    // modality 1's frozen final features; verified by unrolling by hand
    Rng rng(13);
    int d0 = 3, d1 = 4, hdim = 5;
    BankConstants bank = two_class_bank(d0, d1);
    LstmUnit unit = LstmUnit::init(d0 + d1, hdim, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(d0, hdim, rng), ParamDecoder::init(d1, hdim, rng)};

    std::vector<double> x0 = {0.5, -1.0, 2.0};
    std::vector<double> x1 = {1.0, 0.0, -0.5, 0.25};
    std::vector<Value> inputs = {Value::column(x0), Value::column(x1)};
    GreedyOptions opts;  // shared-fixed states
    GreedyResult res = greedy_forward(inputs, DepthPlan{{2, 1}}, unit, decoders, bank, {1, 0}, opts);

    // --- independent unrolling on plain doubles ---
    std::vector<std::vector<double>> protos0 = {std::vector<double>(d0, 1.0), std::vector<double>(d0, -1.0)};
    std::vector<std::vector<double>> protos1 = {std::vector<double>(d1, 2.0), std::vector<double>(d1, -2.0)};

    std::vector<double> h = unit.h0, c = unit.c0;
    auto decode_apply = [&](const ParamDecoder& dec, const std::vector<double>& code, std::vector<double>& feat) {
        std::vector<double> flat = matvec_ref(dec.weight, code);
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += dec.bias[static_cast<int>(i)];
        int d = dec.feature_dim;
        std::vector<double> next(d);
        for (int i = 0; i < d; ++i) {
            double acc = flat[d * d + i];
            for (int j = 0; j < d; ++j) acc += flat[i * d + j] * feat[j];
            next[i] = sigmoid_ref(acc) * feat[i];
        }
        feat = next;
    };

    std::vector<double> f0 = x0, f1 = x1;
    double expected_total = 0.0;

    // t = 1: both modalities active
    std::vector<double> joint = f0;
    joint.insert(joint.end(), f1.begin(), f1.end());
    lstm_ref(unit, joint, h, c);
    {
        auto q0_old = quality_ref(f0, protos0, 1);
        auto q1_old = quality_ref(f1, protos1, 0);
        decode_apply(decoders[0], h, f0);
        decode_apply(decoders[1], h, f1);
        auto q0_new = quality_ref(f0, protos0, 1);
        auto q1_new = quality_ref(f1, protos1, 0);
        double g0 = 0, g1 = 0;
        for (int j = 0; j < d0; ++j) g0 += std::max(q0_new[j] - q0_old[j], 0.0);
        for (int j = 0; j < d1; ++j) g1 += std::max(q1_new[j] - q1_old[j], 0.0);
        expected_total += (g0 / d0 + g1 / d1) / 2.0;
    }

    // t = 2: modality 1 finished; joint input carries its frozen final features
    joint = f0;
    joint.insert(joint.end(), f1.begin(), f1.end());
    lstm_ref(unit, joint, h, c);
    {
        auto q0_old = quality_ref(f0, protos0, 1);
        decode_apply(decoders[0], h, f0);
        auto q0_new = quality_ref(f0, protos0, 1);
        double g0 = 0;
        for (int j = 0; j < d0; ++j) g0 += std::max(q0_new[j] - q0_old[j], 0.0);
        expected_total += g0 / d0;  // single active modality
    }

    for (int j = 0; j < d0; ++j) CHECK(std::fabs(res.trace.final_features[0][j] - f0[j]) <= 1e-12);
    for (int j = 0; j < d1; ++j) CHECK(std::fabs(res.trace.final_features[1][j] - f1[j]) <= 1e-12);
    CHECK(res.gains.total.item() == doctest::Approx(expected_total).epsilon(1e-12));
    CHECK(res.trace.gates[0].size() == 2);
    CHECK(res.trace.gates[1].size() == 1);
}

TEST_CASE("sparsity accumulates gate l1 norms") {
    ForwardTrace trace;
    trace.gates.resize(1);
    trace.gates[0].push_back(Value::full(6, 1, 1.0));
    CHECK(trace_sparsity(trace).item() == doctest::Approx(6.0));

    ForwardTrace empty_gates;
    empty_gates.gates.resize(2);
    CHECK(trace_sparsity(empty_gates).item() == doctest::Approx(0.0));
}

TEST_CASE("sparsity matches a naive triple loop on random traces") {
    Rng rng(14);
    std::vector<ForwardTrace> traces(3);
    double expect = 0.0;
    for (auto& t : traces) {
        t.gates.resize(2);
        for (int m = 0; m < 2; ++m) {
            int depth = 1 + static_cast<int>(rng.index(3));
            for (int k = 0; k < depth; ++k) {
                Value q = Value::zeros(4, 1);
                for (auto& v : q.mutable_data()) v = rng.uniform();
                t.gates[m].push_back(q);
            }
        }
    }
    for (const auto& t : traces)
        for (const auto& gates : t.gates)
            for (const auto& q : gates)
                for (double v : q.data()) expect += std::fabs(v);
    expect /= traces.size();
    CHECK(sparsity_loss(traces).item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("every recorded gain is non-negative") {
    Rng rng(15);
    BankConstants bank = two_class_bank(4, 4);
    LstmUnit unit = LstmUnit::init(8, 6, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(4, 6, rng), ParamDecoder::init(4, 6, rng)};
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<Value> inputs = {Value::randn(4, 1, rng, 2.0), Value::randn(4, 1, rng, 2.0)};
        DepthPlan plan{{1 + static_cast<int>(rng.index(3)), 1 + static_cast<int>(rng.index(3))}};
        GreedyResult res = greedy_forward(inputs, plan, unit, decoders, bank, {0, 1}, {});
        double total = 0;
        for (const auto& g : res.gains.per_depth) {
            CHECK(g.item() >= 0.0);
            total += g.item();
        }
        CHECK(res.gains.total.item() == doctest::Approx(total).epsilon(1e-12));
    }
}

TEST_CASE("parameter prediction is cross-modal") {
    // zeroing the second modality's input changes the parameters predicted for
    // the first modality, because the LSTM consumes the joint features
    Rng rng(16);
    BankConstants bank = two_class_bank(3, 3);
    LstmUnit unit = LstmUnit::init(6, 5, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(3, 5, rng), ParamDecoder::init(3, 5, rng)};

    std::vector<Value> a = {Value::randn(3, 1, rng), Value::randn(3, 1, rng)};
    std::vector<Value> b = {a[0], Value::zeros(3, 1)};

    GreedyResult ra = greedy_forward(a, DepthPlan{{1, 1}}, unit, decoders, bank, {0, 0}, {});
    GreedyResult rb = greedy_forward(b, DepthPlan{{1, 1}}, unit, decoders, bank, {0, 0}, {});
    // same modality-0 input, different gates => different predicted parameters
    CHECK(ra.trace.gates[0][0].data() != rb.trace.gates[0][0].data());
}

TEST_CASE("shared-fixed inference is bit-deterministic") {
    Rng rng(17);
    BankConstants bank = two_class_bank(3, 3);
    LstmUnit unit = LstmUnit::init(6, 5, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(3, 5, rng), ParamDecoder::init(3, 5, rng)};
    std::vector<Value> inputs = {Value::randn(3, 1, rng), Value::randn(3, 1, rng)};

    GreedyResult a = greedy_forward(inputs, DepthPlan{{2, 2}}, unit, decoders, bank, {1, 1}, {});
    GreedyResult b = greedy_forward(inputs, DepthPlan{{2, 2}}, unit, decoders, bank, {1, 1}, {});
    for (int m = 0; m < 2; ++m) {
        CHECK(a.trace.final_features[m].data() == b.trace.final_features[m].data());
        for (std::size_t t = 0; t < a.trace.gates[m].size(); ++t)
            CHECK(a.trace.gates[m][t].data() == b.trace.gates[m][t].data());
    }
}

TEST_CASE("predicted parameters vary more across samples under heavy noise") {
    Rng rng(18);
    int d = 4, hdim = 6;
    BankConstants bank = two_class_bank(d, d);
    LstmUnit unit = LstmUnit::init(2 * d, hdim, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(d, hdim, rng), ParamDecoder::init(d, hdim, rng)};

    auto gate_variance = [&](double sigma) {
        Rng srng(404);
        std::vector<std::vector<double>> gates;
        for (int i = 0; i < 40; ++i) {
            std::vector<double> x0(d), x1(d);
            for (auto& v : x0) v = 1.0 + srng.normal() + sigma * srng.normal();
            for (auto& v : x1) v = 1.0 + srng.normal();
            GreedyResult r = greedy_forward({Value::column(x0), Value::column(x1)}, DepthPlan{{1, 1}}, unit, decoders,
                                            bank, {0, 0}, {});
            gates.push_back(r.trace.gates[0][0].data());
        }
        double var = 0;
        for (int j = 0; j < d; ++j) {
            double mean = 0;
            for (const auto& g : gates) mean += g[j];
            mean /= gates.size();
            for (const auto& g : gates) var += (g[j] - mean) * (g[j] - mean);
        }
        return var / (d * gates.size());
    };

    CHECK(gate_variance(10.0) > gate_variance(0.0));
}

TEST_CASE("full composition gradient matches finite differences") {
    // block + LSTM + decoder + loss on a 2-modality, d = 4, K = 2 instance
    Rng rng(19);
    int d = 4, hdim = 5;
    BankConstants bank = two_class_bank(d, d);
    LstmUnit unit = LstmUnit::init(2 * d, hdim, rng);
    std::vector<ParamDecoder> decoders = {ParamDecoder::init(d, hdim, rng, 0.5), ParamDecoder::init(d, hdim, rng, 0.5)};
    Value clf_w = Value::randn(2, 2 * d, rng, 0.3);
    std::vector<Value> inputs = {Value::randn(d, 1, rng), Value::randn(d, 1, rng)};
    DepthPlan plan{{2, 1}};

    auto loss_with = [&](const LstmUnit& u, const std::vector<ParamDecoder>& dec) {
        GreedyResult res = greedy_forward(inputs, plan, u, dec, bank, {0, 1}, {});
        Value logits = ad::transpose(ad::matvec(clf_w, ad::concat_rows(res.trace.final_features)));
        Value loss = ad::cross_entropy_with_logits(logits, 0);
        loss = ad::sub(loss, res.gains.total);
        return ad::add(loss, trace_sparsity(res.trace));
    };

    // gradient with respect to an LSTM gate matrix
    auto f_lstm = [&](const Value& probe) {
        LstmUnit u2 = unit;
        u2.wx_g = probe;
        return loss_with(u2, decoders);
    };
    CHECK(ad::grad_check(f_lstm, unit.wx_g, 1e-5) <= 1e-3);

    auto f_lstm_h = [&](const Value& probe) {
        LstmUnit u2 = unit;
        u2.wh_f = probe;
        return loss_with(u2, decoders);
    };
    CHECK(ad::grad_check(f_lstm_h, unit.wh_f, 1e-5) <= 1e-3);

    // gradient with respect to a decoder map
    auto f_dec = [&](const Value& probe) {
        std::vector<ParamDecoder> dec2 = decoders;
        dec2[0].weight = probe;
        return loss_with(unit, dec2);
    };
    CHECK(ad::grad_check(f_dec, decoders[0].weight, 1e-5) <= 1e-3);

    auto f_dec_b = [&](const Value& probe) {
        std::vector<ParamDecoder> dec2 = decoders;
        dec2[1].bias = probe;
        return loss_with(unit, dec2);
    };
    CHECK(ad::grad_check(f_dec_b, decoders[1].bias, 1e-5) <= 1e-3);
}
