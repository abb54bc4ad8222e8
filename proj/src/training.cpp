#include "quad/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "quad/optim.hpp"

namespace quad {

using ad::Value;

std::string TrainConfig::canonical() const {
    std::ostringstream ss;
    ss << "k=" << max_depth << ";hdim=" << hidden_dim << ";proto_epochs=" << proto_epochs << ";proto_lr=" << proto_lr
       << ";mi=" << (mi_mode == MiSurrogate::Cosine ? "cos" : "infonce") << ";epochs=" << epochs << ";lr=" << lr
       << ";lr_step=" << lr_step_every << ";lr_gamma=" << lr_step_gamma << ";batch=" << batch_size
       << ";patience=" << patience << ";seed=" << seed << ";gain=" << use_gain_term
       << ";sparsity=" << use_sparsity_term << ";gain_labels=" << gain_uses_labels << ";encoded=" << compare_encoded
       << ";state=" << (state_mode == StateInitMode::SharedFixed ? "fixed" : "random")
       << ";variant=" << variant_tag(variant);
    return ss.str();
}

ModalityClassifier train_modality_classifier(const Dataset& train, int modality, int epochs, double lr,
                                             std::uint64_t seed) {
    Rng rng = Rng(seed).derive(0xc15f + static_cast<std::uint64_t>(modality));
    ModalityClassifier mc;
    mc.modality = modality;
    mc.clf = Classifier::init(train.num_classes, train.dims[modality], rng, 0.01);

    ad::AdamConfig acfg;
    acfg.lr = lr;
    ad::Adam adam(mc.clf.parameters(), acfg);
    for (int e = 0; e < epochs; ++e) {
        adam.zero_grad();
        double inv = 1.0 / train.size();
        for (const auto& s : train.samples) {
            Value logits = mc.clf.logits({Value::column(s.features[modality])});
            ad::backward(ad::scale(ad::cross_entropy_with_logits(logits, s.label), inv));
        }
        adam.step();
    }
    return mc;
}

namespace {

struct ParamSnapshot {
    std::vector<std::vector<double>> data;

    static ParamSnapshot take(const std::vector<Value>& params) {
        ParamSnapshot s;
        for (const auto& p : params) s.data.push_back(p.data());
        return s;
    }
    void restore(std::vector<Value>& params) const {
        for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_data() = data[i];
    }
};

}  // namespace

TrainResult train_model(const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
    if (train.size() == 0) throw DataError("train_model: empty training set");

    TrainResult out;
    Model& model = out.model;
    model.config.max_depth = cfg.max_depth;
    model.config.hidden_dim = cfg.hidden_dim;
    model.config.state_mode = cfg.state_mode;
    model.config.gain_uses_labels = cfg.gain_uses_labels;
    model.config.compare_encoded = cfg.compare_encoded;
    model.config.variant = cfg.variant;
    model.config.seed = cfg.seed;
    model.dims = train.dims;
    model.num_classes = train.num_classes;
    model.config_hash = fnv1a(cfg.canonical());

    Rng rng(cfg.seed);

    // Stage one: prototypes. The bank is frozen before the main stage begins.
    model.encoders = EncoderSet::identity_init(train.dims);
    model.bank = init_prototypes(train, model.encoders);
    PrototypeOptOptions popts;
    popts.epochs = cfg.proto_epochs;
    popts.lr = cfg.proto_lr;
    popts.mi_mode = cfg.mi_mode;
    popts.seed = cfg.seed;
    auto pres = optimize_prototypes(model.bank, model.encoders, train, popts);
    out.history.proto_objective = pres.objective;
    model.bank_constants = BankConstants::from(model.bank);

    if (cfg.variant == Variant::ClassifierConfidence) {
        for (int m = 0; m < train.num_modalities; ++m) {
            model.modality_classifiers.push_back(train_modality_classifier(train, m, 100, 0.05, cfg.seed));
        }
    }

    // Depth normalizer over the pooled training inverse qualities.
    {
        std::vector<double> pool;
        pool.reserve(static_cast<std::size_t>(train.size()) * train.num_modalities);
        for (const auto& s : train.samples) {
            for (int m = 0; m < train.num_modalities; ++m) {
                std::vector<double> probs;
                if (cfg.variant == Variant::ClassifierConfidence) {
                    probs = model.modality_classifiers[m].probs(s.features[m]);
                    pool.push_back(1.0 - *std::max_element(probs.begin(), probs.end()));
                } else {
                    probs = modality_probs(quality_input(model, m, s.features[m]), model.bank, m);
                    pool.push_back(1.0 - probs[s.label]);
                }
            }
        }
        model.normalizer = fit_normalizer(pool, cfg.max_depth);
    }

    // Depth plans and gain class indices are fixed once the estimator is
    // frozen, so compute them per training sample up front.
    std::vector<Model::SamplePlan> plans;
    plans.reserve(train.size());
    for (const auto& s : train.samples) plans.push_back(model.plan_for(s, LabelMode::TrueLabel));

    int total_dim = std::accumulate(train.dims.begin(), train.dims.end(), 0);
    Rng init_rng = rng.derive(0x6d61696e);
    if (cfg.variant == Variant::StaticParams) {
        model.static_blocks.resize(train.num_modalities);
        for (int m = 0; m < train.num_modalities; ++m) {
            for (int t = 0; t < cfg.max_depth; ++t) {
                BlockParams b;
                b.weight = Value::randn(train.dims[m], train.dims[m], init_rng,
                                        0.01 / std::sqrt(static_cast<double>(train.dims[m])), true);
                b.bias = Value::zeros(train.dims[m], 1, true);
                model.static_blocks[m].push_back(std::move(b));
            }
        }
    } else {
        model.unit = LstmUnit::init(total_dim, cfg.hidden_dim, init_rng);
        for (int m = 0; m < train.num_modalities; ++m) {
            model.decoders.push_back(ParamDecoder::init(train.dims[m], cfg.hidden_dim, init_rng));
        }
    }
    model.classifier = Classifier::init(train.num_classes, total_dim, init_rng, 0.01);

    std::vector<Value> params = model.trainable_parameters();
    ad::AdamConfig acfg;
    acfg.lr = cfg.lr;
    ad::Adam adam(params, acfg);

    ParamSnapshot best = ParamSnapshot::take(params);
    out.history.best_val_accuracy = -1.0;
    int since_best = 0;

    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr_now = cfg.lr * std::pow(cfg.lr_step_gamma, cfg.lr_step_every > 0 ? epoch / cfg.lr_step_every : 0);
        adam.set_lr(lr_now);

        Rng erng = rng.derive(0xe0000 + static_cast<std::uint64_t>(epoch));
        erng.shuffle(order);

        double sum_loss = 0, sum_task = 0, sum_gain = 0, sum_sparsity = 0;
        bool finite = true;
        for (int start = 0; start < train.size() && finite; start += cfg.batch_size) {
            int stop = std::min(start + cfg.batch_size, train.size());
            double inv = 1.0 / (stop - start);
            adam.zero_grad();
            for (int b = start; b < stop; ++b) {
                int i = order[b];
                const auto& s = train.samples[i];
                Model::SampleForward fwd = model.forward(s, plans[i], i);
                Value task = ad::cross_entropy_with_logits(fwd.trace.logits, s.label);
                Value loss = task;
                if (cfg.use_gain_term) loss = ad::sub(loss, fwd.gains.total);
                Value sparsity;
                if (cfg.use_sparsity_term) {
                    sparsity = trace_sparsity(fwd.trace);
                    loss = ad::add(loss, sparsity);
                }
                double lv = loss.item();
                if (!std::isfinite(lv)) {
                    finite = false;
                    break;
                }
                sum_loss += lv;
                sum_task += task.item();
                sum_gain += fwd.gains.total.item();
                if (cfg.use_sparsity_term) sum_sparsity += sparsity.item();
                ad::backward(ad::scale(loss, inv));
            }
            if (finite) adam.step();
        }

        if (!finite) {
            out.history.diverged = true;
            best.restore(params);
            break;
        }

        long correct = 0;
        for (int i = 0; i < val.size(); ++i) {
            if (model.infer(val.samples[i], i).prediction == val.samples[i].label) ++correct;
        }
        double val_acc = val.size() ? static_cast<double>(correct) / val.size() : 0.0;

        EpochStats st;
        st.epoch = epoch;
        st.loss = sum_loss / train.size();
        st.task_loss = sum_task / train.size();
        st.gain = sum_gain / train.size();
        st.sparsity = sum_sparsity / train.size();
        st.val_accuracy = val_acc;
        st.lr = lr_now;
        out.history.epochs.push_back(st);

        if (val_acc > out.history.best_val_accuracy) {
            out.history.best_val_accuracy = val_acc;
            out.history.best_epoch = epoch;
            best = ParamSnapshot::take(params);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    best.restore(params);
    return out;
}

EvalResult evaluate(const Model& model, const Dataset& data) {
    if (data.size() == 0) throw DataError("evaluate: empty dataset");
    EvalResult res;
    std::vector<int> labels;
    std::vector<double> scores;
    res.mean_depth.assign(data.num_modalities, 0.0);
    double flops = 0.0;
    for (int i = 0; i < data.size(); ++i) {
        Model::Inference inf = model.infer(data.samples[i], i);
        res.predictions.push_back(inf.prediction);
        res.plans.push_back(inf.plan);
        labels.push_back(data.samples[i].label);
        if (data.num_classes == 2) scores.push_back(inf.class_probs[1]);
        for (int m = 0; m < data.num_modalities; ++m) res.mean_depth[m] += inf.plan.depths[m];
        flops += model.flops_for_plan(inf.plan);
    }
    for (auto& d : res.mean_depth) d /= data.size();
    res.mean_flops = flops / data.size();
    res.metrics = compute_metrics(labels, res.predictions, data.num_classes);
    if (data.num_classes == 2) res.metrics.auc = binary_auc(labels, scores);
    return res;
}

TrainResult ablate(const std::string& tag, const Dataset& train, const Dataset& val, TrainConfig cfg) {
    cfg.variant = variant_from_tag(tag);
    return train_model(train, val, cfg);
}

}  // namespace quad
