#pragma once

#include <utility>
#include <vector>

#include "quad/backbone.hpp"
#include "quad/confidence.hpp"
#include "quad/depth.hpp"
#include "quad/tensor.hpp"

namespace quad {

// Shared LSTM unit consuming the concatenated cross-modality features depth
// by depth. Its per-depth output code is decoded into each modality's block
// parameters, so the parameters predicted for one modality depend on every
// modality's current features.
struct LstmUnit {
    int input_dim = 0;
    int hidden_dim = 0;
    // gate transforms: input (i), forget (f), output (o), candidate (g)
    ad::Value wx_i, wh_i, b_i;
    ad::Value wx_f, wh_f, b_f;
    ad::Value wx_o, wh_o, b_o;
    ad::Value wx_g, wh_g, b_g;
    // shared-fixed initial state, drawn once at construction
    std::vector<double> h0, c0;

    static LstmUnit init(int input_dim, int hidden_dim, Rng& rng);
    std::vector<ad::Value> parameters() const;
};

struct LstmState {
    ad::Value h;
    ad::Value c;
};

enum class StateInitMode { SharedFixed, PerSampleRandom };

// SharedFixed reuses the unit's construction-time draw for every sample so
// inference is deterministic; PerSampleRandom draws fresh states from
// (seed, sample_index).
LstmState initial_state(const LstmUnit& unit, StateInitMode mode, std::uint64_t seed, long sample_index);

// Standard cell: c' = f (*) c + i (*) g, h' = o (*) tanh(c'); returns h' as
// the shared code along with the new state.
std::pair<ad::Value, LstmState> lstm_step(const ad::Value& input, const LstmState& state, const LstmUnit& unit);

// Affine map hidden -> d(d+1), reshaped to a block's (W, b).
struct ParamDecoder {
    ad::Value weight;  // d(d+1) x hidden
    ad::Value bias;    // d(d+1) x 1
    int feature_dim = 0;

    static ParamDecoder init(int feature_dim, int hidden_dim, Rng& rng, double output_scale = 0.01);
    BlockParams decode(const ad::Value& code) const;
    std::vector<ad::Value> parameters() const { return {weight, bias}; }
};

// Per-depth rectified feature-quality gains; every entry is >= 0 by
// construction and differentiable, so training can maximize the total.
struct GainLedger {
    std::vector<ad::Value> per_depth;
    ad::Value total;
};

struct GreedyOptions {
    StateInitMode state_mode = StateInitMode::SharedFixed;
    std::uint64_t state_seed = 0;
    long sample_index = 0;
    // optional transform applied to features before the prototype contrast
    std::function<ad::Value(int, const ad::Value&)> quality_view;
};

struct GreedyResult {
    ForwardTrace trace;  // logits left undefined; the model fills them in
    GainLedger gains;
};

// Depth-by-depth greedy pass: at each depth the concatenated "latest"
// features (finished modalities contribute their frozen final vector) drive
// the LSTM unit; each still-active modality gets decoded block parameters,
// applies its block, and records the rectified quality gain averaged over
// the active modalities.
GreedyResult greedy_forward(const std::vector<ad::Value>& inputs, const DepthPlan& plan, const LstmUnit& unit,
                            const std::vector<ParamDecoder>& decoders, const BankConstants& bank,
                            const std::vector<int>& class_indices, const GreedyOptions& opts);

// Sum over gates of one trace of ||q||_1.
ad::Value trace_sparsity(const ForwardTrace& trace);

// (1/N) sum over traces of trace_sparsity.
ad::Value sparsity_loss(const std::vector<ForwardTrace>& traces);

}  // namespace quad
