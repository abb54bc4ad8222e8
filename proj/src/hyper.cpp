#include "quad/hyper.hpp"

#include <algorithm>
#include <cmath>

namespace quad {

using ad::Value;

LstmUnit LstmUnit::init(int input_dim, int hidden_dim, Rng& rng) {
    if (input_dim < 1 || hidden_dim < 1) throw DataError("LstmUnit::init: dimensions must be >= 1");
    LstmUnit u;
    u.input_dim = input_dim;
    u.hidden_dim = hidden_dim;
    double k = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    auto mat = [&](int r, int c) {
        Value v = Value::zeros(r, c, true);
        for (auto& x : v.mutable_data()) x = rng.uniform(-k, k);
        return v;
    };
    u.wx_i = mat(hidden_dim, input_dim);
    u.wh_i = mat(hidden_dim, hidden_dim);
    u.b_i = Value::zeros(hidden_dim, 1, true);
    u.wx_f = mat(hidden_dim, input_dim);
    u.wh_f = mat(hidden_dim, hidden_dim);
    u.b_f = Value::zeros(hidden_dim, 1, true);
    u.wx_o = mat(hidden_dim, input_dim);
    u.wh_o = mat(hidden_dim, hidden_dim);
    u.b_o = Value::zeros(hidden_dim, 1, true);
    u.wx_g = mat(hidden_dim, input_dim);
    u.wh_g = mat(hidden_dim, hidden_dim);
    u.b_g = Value::zeros(hidden_dim, 1, true);

    Rng state_rng = rng.derive(0x737461);
    u.h0.resize(hidden_dim);
    u.c0.resize(hidden_dim);
    for (auto& v : u.h0) v = 0.1 * state_rng.normal();
    for (auto& v : u.c0) v = 0.1 * state_rng.normal();
    return u;
}

std::vector<Value> LstmUnit::parameters() const {
    return {wx_i, wh_i, b_i, wx_f, wh_f, b_f, wx_o, wh_o, b_o, wx_g, wh_g, b_g};
}

LstmState initial_state(const LstmUnit& unit, StateInitMode mode, std::uint64_t seed, long sample_index) {
    LstmState s;
    if (mode == StateInitMode::SharedFixed) {
        s.h = Value::column(unit.h0);
        s.c = Value::column(unit.c0);
    } else {
        Rng rng = Rng(seed).derive(static_cast<std::uint64_t>(sample_index));
        s.h = Value::zeros(unit.hidden_dim, 1, false);
        s.c = Value::zeros(unit.hidden_dim, 1, false);
        for (auto& v : s.h.mutable_data()) v = 0.1 * rng.normal();
        for (auto& v : s.c.mutable_data()) v = 0.1 * rng.normal();
    }
    return s;
}

std::pair<Value, LstmState> lstm_step(const Value& input, const LstmState& state, const LstmUnit& unit) {
    if (input.rows() != unit.input_dim || input.cols() != 1) {
        throw ShapeError("lstm_step: input dimension " + std::to_string(input.rows()) + " does not match unit width " +
                         std::to_string(unit.input_dim));
    }
    auto gate = [&](const Value& wx, const Value& wh, const Value& b) {
        return ad::add(ad::add(ad::matvec(wx, input), ad::matvec(wh, state.h)), b);
    };
    Value i = ad::sigmoid(gate(unit.wx_i, unit.wh_i, unit.b_i));
    Value f = ad::sigmoid(gate(unit.wx_f, unit.wh_f, unit.b_f));
    Value o = ad::sigmoid(gate(unit.wx_o, unit.wh_o, unit.b_o));
    Value g = ad::tanh_op(gate(unit.wx_g, unit.wh_g, unit.b_g));

    LstmState next;
    next.c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
    next.h = ad::mul(o, ad::tanh_op(next.c));
    return {next.h, next};
}

ParamDecoder ParamDecoder::init(int feature_dim, int hidden_dim, Rng& rng, double output_scale) {
    ParamDecoder d;
    d.feature_dim = feature_dim;
    int out = feature_dim * (feature_dim + 1);
    // small output scale keeps early gates near sigmoid(0)
    d.weight = Value::randn(out, hidden_dim, rng, output_scale / std::sqrt(static_cast<double>(hidden_dim)), true);
    d.bias = Value::zeros(out, 1, true);
    return d;
}

BlockParams ParamDecoder::decode(const Value& code) const {
    Value out = ad::add(ad::matvec(weight, code), bias);
    BlockParams p;
    p.weight = ad::reshape(ad::slice_rows(out, 0, feature_dim * feature_dim), feature_dim, feature_dim);
    p.bias = ad::slice_rows(out, feature_dim * feature_dim, feature_dim);
    return p;
}

GreedyResult greedy_forward(const std::vector<Value>& inputs, const DepthPlan& plan, const LstmUnit& unit,
                            const std::vector<ParamDecoder>& decoders, const BankConstants& bank,
                            const std::vector<int>& class_indices, const GreedyOptions& opts) {
    const int M = static_cast<int>(inputs.size());
    if (static_cast<int>(plan.depths.size()) != M || static_cast<int>(decoders.size()) != M ||
        static_cast<int>(class_indices.size()) != M) {
        throw ShapeError("greedy_forward: modality count mismatch across inputs, plan, decoders, class indices");
    }
    for (int d : plan.depths) {
        if (d < 1) throw DataError("greedy_forward: depths must be >= 1");
    }

    std::function<Value(int, const Value&)> view = opts.quality_view;
    if (!view) view = [](int, const Value& v) { return v; };

    GreedyResult res;
    res.trace.features.resize(M);
    res.trace.gates.resize(M);
    res.trace.final_features.resize(M);

    std::vector<Value> current(inputs);
    std::vector<Value> quality(M);
    for (int m = 0; m < M; ++m) {
        res.trace.features[m].push_back(inputs[m]);
        quality[m] = feature_quality_graph(view(m, inputs[m]), bank, m, class_indices[m]);
    }

    LstmState state = initial_state(unit, opts.state_mode, opts.state_seed, opts.sample_index);
    const int T = plan.max_depth();
    for (int t = 1; t <= T; ++t) {
        // finished modalities contribute their frozen final features
        Value joint = ad::concat_rows(current);
        auto [code, next_state] = lstm_step(joint, state, unit);
        state = next_state;

        int active = 0;
        for (int m = 0; m < M; ++m)
            if (t <= plan.depths[m]) ++active;

        Value gain = Value::scalar(0.0);
        for (int m = 0; m < M; ++m) {
            if (t > plan.depths[m]) continue;
            BlockParams params = decoders[m].decode(code);
            BlockOutput out = block_forward(current[m], params);
            Value new_quality = feature_quality_graph(view(m, out.next), bank, m, class_indices[m]);
            gain = ad::add(gain, ad::mean(ad::relu(ad::sub(new_quality, quality[m]))));
            current[m] = out.next;
            quality[m] = new_quality;
            res.trace.features[m].push_back(out.next);
            res.trace.gates[m].push_back(out.gate);
        }
        res.gains.per_depth.push_back(ad::scale(gain, 1.0 / active));
    }

    for (int m = 0; m < M; ++m) res.trace.final_features[m] = current[m];
    res.gains.total = ad::sum(ad::concat_rows(res.gains.per_depth));
    return res;
}

Value trace_sparsity(const ForwardTrace& trace) {
    Value acc = Value::scalar(0.0);
    for (const auto& gates : trace.gates)
        for (const auto& q : gates) acc = ad::add(acc, ad::l1_norm(q));
    return acc;
}

Value sparsity_loss(const std::vector<ForwardTrace>& traces) {
    if (traces.empty()) throw DataError("sparsity_loss: no traces");
    Value acc = Value::scalar(0.0);
    for (const auto& t : traces) acc = ad::add(acc, trace_sparsity(t));
    return ad::scale(acc, 1.0 / traces.size());
}

}  // namespace quad
