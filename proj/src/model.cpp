#include "quad/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace quad {

using ad::Value;

Variant variant_from_tag(const std::string& tag) {
    if (tag == "full") return Variant::Full;
    if (tag == "wo-gcnd") return Variant::FixedDepth;
    if (tag == "wo-lgp") return Variant::StaticParams;
    if (tag == "depth-minus-1") return Variant::DepthMinusOne;
    if (tag == "depth-plus-1") return Variant::DepthPlusOne;
    if (tag == "cls-confidence") return Variant::ClassifierConfidence;
    throw UsageError("unknown variant tag '" + tag + "'");
}

std::string variant_tag(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::FixedDepth: return "wo-gcnd";
        case Variant::StaticParams: return "wo-lgp";
        case Variant::DepthMinusOne: return "depth-minus-1";
        case Variant::DepthPlusOne: return "depth-plus-1";
        case Variant::ClassifierConfidence: return "cls-confidence";
    }
    throw UsageError("unknown variant");
}

std::vector<double> ModalityClassifier::probs(const std::vector<double>& x) const {
    ad::NoGradGuard guard;
    Value logits = clf.logits({Value::column(x)});
    return ad::softmax_rows(logits).data();
}

std::vector<double> quality_input(const Model& model, int m, const std::vector<double>& x) {
    if (!model.config.compare_encoded) return x;
    ad::NoGradGuard guard;
    return model.encoders.encoders[m].apply(Value::column(x)).data();
}

std::vector<Value> Model::trainable_parameters() const {
    std::vector<Value> ps;
    if (config.variant == Variant::StaticParams) {
        for (const auto& blocks : static_blocks)
            for (const auto& b : blocks) {
                ps.push_back(b.weight);
                ps.push_back(b.bias);
            }
    } else {
        for (const auto& p : unit.parameters()) ps.push_back(p);
        for (const auto& d : decoders)
            for (const auto& p : d.parameters()) ps.push_back(p);
    }
    for (const auto& p : classifier.parameters()) ps.push_back(p);
    return ps;
}

long Model::parameter_count() const {
    long n = 0;
    for (const auto& p : trainable_parameters()) n += p.size();
    return n;
}

Model::SamplePlan Model::plan_for(const MultimodalSample& sample, LabelMode quality_mode) const {
    SamplePlan out;
    const int M = static_cast<int>(dims.size());
    out.class_indices.resize(M);
    out.modality_quality.resize(M);
    for (int m = 0; m < M; ++m) {
        std::vector<double> probs;
        if (config.variant == Variant::ClassifierConfidence) {
            probs = modality_classifiers[m].probs(sample.features[m]);
        } else {
            probs = modality_probs(quality_input(*this, m, sample.features[m]), bank, m);
        }
        int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        int quality_class;
        if (config.variant == Variant::ClassifierConfidence) {
            quality_class = pred;  // maximum-class probability
        } else {
            quality_class = (quality_mode == LabelMode::TrueLabel) ? sample.label : pred;
        }
        out.modality_quality[m] = probs[quality_class];
        out.class_indices[m] =
            (config.gain_uses_labels && quality_mode == LabelMode::TrueLabel) ? sample.label : pred;
    }

    if (config.variant == Variant::FixedDepth) {
        out.plan.depths.assign(M, config.max_depth);
        return out;
    }
    out.plan = assign_depths(out.modality_quality, normalizer);
    if (config.variant == Variant::DepthMinusOne) {
        for (int& d : out.plan.depths) d = std::max(d - 1, 1);
    } else if (config.variant == Variant::DepthPlusOne) {
        for (int& d : out.plan.depths) d += 1;
    }
    return out;
}

namespace {

// StaticParams counterpart of the greedy pass: same loop, same gain ledger,
// but block parameters come from trained per-depth tables.
Model::SampleForward static_forward(const Model& model, const std::vector<Value>& inputs, const DepthPlan& plan,
                                    const std::vector<int>& class_indices,
                                    const std::function<Value(int, const Value&)>& quality_view) {
    const int M = static_cast<int>(inputs.size());
    Model::SampleForward res;
    res.trace.features.resize(M);
    res.trace.gates.resize(M);
    res.trace.final_features.resize(M);

    std::vector<Value> current(inputs);
    std::vector<Value> quality(M);
    for (int m = 0; m < M; ++m) {
        res.trace.features[m].push_back(inputs[m]);
        quality[m] =
            feature_quality_graph(quality_view(m, inputs[m]), model.bank_constants, m, class_indices[m]);
    }

    const int T = plan.max_depth();
    for (int t = 1; t <= T; ++t) {
        int active = 0;
        for (int m = 0; m < M; ++m)
            if (t <= plan.depths[m]) ++active;
        Value gain = Value::scalar(0.0);
        for (int m = 0; m < M; ++m) {
            if (t > plan.depths[m]) continue;
            const BlockParams& params = model.static_blocks[m][t - 1];
            BlockOutput out = block_forward(current[m], params);
            Value new_quality =
                feature_quality_graph(quality_view(m, out.next), model.bank_constants, m, class_indices[m]);
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

}  // namespace

Model::SampleForward Model::forward(const MultimodalSample& sample, const SamplePlan& plan, long sample_index) const {
    const int M = static_cast<int>(dims.size());
    std::vector<Value> inputs;
    inputs.reserve(M);
    for (int m = 0; m < M; ++m) inputs.push_back(Value::column(sample.features[m]));

    std::function<Value(int, const Value&)> quality_view;
    if (config.compare_encoded) {
        quality_view = [this](int m, const Value& x) { return encoders.encoders[m].apply(x); };
    } else {
        quality_view = [](int, const Value& x) { return x; };
    }

    SampleForward res;
    if (config.variant == Variant::StaticParams) {
        if (plan.plan.max_depth() > static_cast<int>(static_blocks.empty() ? 0 : static_blocks[0].size()))
            throw DataError("forward: plan exceeds trained static depth");
        res = static_forward(*this, inputs, plan.plan, plan.class_indices, quality_view);
    } else {
        GreedyOptions opts;
        opts.state_mode = config.state_mode;
        opts.state_seed = config.seed;
        opts.sample_index = sample_index;
        opts.quality_view = quality_view;
        GreedyResult g = greedy_forward(inputs, plan.plan, unit, decoders, bank_constants, plan.class_indices, opts);
        res.trace = std::move(g.trace);
        res.gains = std::move(g.gains);
    }
    res.trace.logits = classifier.logits(res.trace.final_features);
    return res;
}

Model::Inference Model::infer(const MultimodalSample& sample, long sample_index) const {
    ad::NoGradGuard guard;
    SamplePlan plan = plan_for(sample, LabelMode::Predicted);
    SampleForward fwd = forward(sample, plan, sample_index);
    Inference inf;
    inf.class_probs = ad::softmax_rows(fwd.trace.logits).data();
    inf.prediction =
        static_cast<int>(std::max_element(inf.class_probs.begin(), inf.class_probs.end()) - inf.class_probs.begin());
    inf.plan = std::move(plan.plan);
    return inf;
}

double Model::flops_for_plan(const DepthPlan& plan) const {
    double total_dim = 0;
    for (int d : dims) total_dim += d;
    double flops = 0.0;
    for (std::size_t m = 0; m < dims.size(); ++m) {
        double d = dims[m];
        flops += plan.depths[m] * (2.0 * d * d + 4.0 * d);  // gate affine + sigmoid + gating
    }
    if (config.variant != Variant::StaticParams) {
        double h = config.hidden_dim;
        flops += plan.max_depth() * (8.0 * h * (total_dim + h) + 13.0 * h);
        for (std::size_t m = 0; m < dims.size(); ++m) {
            double d = dims[m];
            flops += plan.depths[m] * 2.0 * h * d * (d + 1.0);
        }
    }
    flops += 2.0 * num_classes * total_dim;
    return flops;
}

// --- checkpoint io -----------------------------------------------------------

namespace {

constexpr std::uint32_t kMagic = 0x5143504bu;  // "QCPK"
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    }
    void u32(std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
    void u64(std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
    void f64(double v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
    void vec(const std::vector<double>& v) {
        u64(v.size());
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    void value(const Value& v) {
        u32(static_cast<std::uint32_t>(v.rows()));
        u32(static_cast<std::uint32_t>(v.cols()));
        u32(v.requires_grad() ? 1 : 0);
        vec(v.data());
    }
};

struct Reader {
    std::ifstream in;
    std::string path;
    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw DataError("checkpoint: cannot open '" + p + "'");
    }
    std::uint32_t u32() {
        std::uint32_t v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        check();
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        check();
        return v;
    }
    double f64() {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        check();
        return v;
    }
    std::vector<double> vec() {
        std::uint64_t n = u64();
        std::vector<double> v(n);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        check();
        return v;
    }
    Value value() {
        std::uint32_t r = u32(), c = u32(), rg = u32();
        return Value::from(vec(), static_cast<int>(r), static_cast<int>(c), rg != 0);
    }
    void check() {
        if (!in) throw DataError("checkpoint: truncated or corrupt file '" + path + "'");
    }
};

}  // namespace

void Model::save(const std::string& path) const {
    Writer w(path);
    w.u32(kMagic);
    w.u32(kVersion);
    w.u64(config_hash);
    w.u32(static_cast<std::uint32_t>(config.max_depth));
    w.u32(static_cast<std::uint32_t>(config.hidden_dim));
    w.u32(config.state_mode == StateInitMode::SharedFixed ? 0 : 1);
    w.u32(config.gain_uses_labels ? 1 : 0);
    w.u32(config.compare_encoded ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(config.variant));
    w.u64(config.seed);

    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(num_classes));

    for (const auto& e : encoders.encoders) {
        w.value(e.weight);
        w.value(e.bias);
        w.u32(e.linear ? 1 : 0);
    }

    w.u32(static_cast<std::uint32_t>(bank.stage == BankStage::Optimized ? 1 : 0));
    for (int c = 0; c < bank.num_classes; ++c)
        for (int m = 0; m < bank.num_modalities; ++m) w.vec(bank.at(c, m));

    w.f64(normalizer.v_min);
    w.f64(normalizer.v_max);
    w.u32(static_cast<std::uint32_t>(normalizer.max_depth));

    bool hyper = config.variant != Variant::StaticParams;
    w.u32(hyper ? 1 : 0);
    if (hyper) {
        for (const auto& p : unit.parameters()) w.value(p);
        w.vec(unit.h0);
        w.vec(unit.c0);
        for (const auto& d : decoders) {
            w.value(d.weight);
            w.value(d.bias);
        }
    } else {
        w.u32(static_cast<std::uint32_t>(static_blocks[0].size()));
        for (const auto& blocks : static_blocks)
            for (const auto& b : blocks) {
                w.value(b.weight);
                w.value(b.bias);
            }
    }

    w.value(classifier.weight);
    w.value(classifier.bias);

    w.u32(static_cast<std::uint32_t>(modality_classifiers.size()));
    for (const auto& mc : modality_classifiers) {
        w.u32(static_cast<std::uint32_t>(mc.modality));
        w.value(mc.clf.weight);
        w.value(mc.clf.bias);
    }
    if (!w.out) throw DataError("checkpoint: write failed for '" + path + "'");
}

Model Model::load(const std::string& path) {
    Reader r(path);
    if (r.u32() != kMagic) throw DataError("checkpoint: bad magic in '" + path + "'");
    if (r.u32() != kVersion) throw DataError("checkpoint: unsupported version in '" + path + "'");

    Model m;
    m.config_hash = r.u64();
    m.config.max_depth = static_cast<int>(r.u32());
    m.config.hidden_dim = static_cast<int>(r.u32());
    m.config.state_mode = r.u32() == 0 ? StateInitMode::SharedFixed : StateInitMode::PerSampleRandom;
    m.config.gain_uses_labels = r.u32() != 0;
    m.config.compare_encoded = r.u32() != 0;
    m.config.variant = static_cast<Variant>(r.u32());
    m.config.seed = r.u64();

    std::uint32_t M = r.u32();
    m.dims.resize(M);
    for (auto& d : m.dims) d = static_cast<int>(r.u32());
    m.num_classes = static_cast<int>(r.u32());

    for (std::uint32_t i = 0; i < M; ++i) {
        Encoder e;
        e.weight = r.value();
        e.bias = r.value();
        e.linear = r.u32() != 0;
        m.encoders.encoders.push_back(std::move(e));
    }

    BankStage stage = r.u32() ? BankStage::Optimized : BankStage::InitializedMeans;
    std::vector<std::vector<std::vector<double>>> protos(m.num_classes,
                                                         std::vector<std::vector<double>>(M));
    for (int c = 0; c < m.num_classes; ++c)
        for (std::uint32_t mm = 0; mm < M; ++mm) protos[c][mm] = r.vec();
    m.bank = PrototypeBank::from_prototypes(std::move(protos), stage);
    m.bank_constants = BankConstants::from(m.bank);

    m.normalizer.v_min = r.f64();
    m.normalizer.v_max = r.f64();
    m.normalizer.max_depth = static_cast<int>(r.u32());

    bool hyper = r.u32() != 0;
    if (hyper) {
        m.unit.input_dim = 0;
        for (int d : m.dims) m.unit.input_dim += d;
        m.unit.hidden_dim = m.config.hidden_dim;
        m.unit.wx_i = r.value();
        m.unit.wh_i = r.value();
        m.unit.b_i = r.value();
        m.unit.wx_f = r.value();
        m.unit.wh_f = r.value();
        m.unit.b_f = r.value();
        m.unit.wx_o = r.value();
        m.unit.wh_o = r.value();
        m.unit.b_o = r.value();
        m.unit.wx_g = r.value();
        m.unit.wh_g = r.value();
        m.unit.b_g = r.value();
        m.unit.h0 = r.vec();
        m.unit.c0 = r.vec();
        for (std::uint32_t i = 0; i < M; ++i) {
            ParamDecoder d;
            d.weight = r.value();
            d.bias = r.value();
            d.feature_dim = m.dims[i];
            m.decoders.push_back(std::move(d));
        }
    } else {
        std::uint32_t depth = r.u32();
        m.static_blocks.resize(M);
        for (std::uint32_t i = 0; i < M; ++i) {
            for (std::uint32_t t = 0; t < depth; ++t) {
                BlockParams b;
                b.weight = r.value();
                b.bias = r.value();
                m.static_blocks[i].push_back(std::move(b));
            }
        }
    }

    m.classifier.weight = r.value();
    m.classifier.bias = r.value();

    std::uint32_t n_mc = r.u32();
    for (std::uint32_t i = 0; i < n_mc; ++i) {
        ModalityClassifier mc;
        mc.modality = static_cast<int>(r.u32());
        mc.clf.weight = r.value();
        mc.clf.bias = r.value();
        m.modality_classifiers.push_back(std::move(mc));
    }
    return m;
}

}  // namespace quad
