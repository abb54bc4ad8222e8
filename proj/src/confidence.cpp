#include "quad/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "quad/optim.hpp"

namespace quad {

using ad::Value;

// --- encoders ---------------------------------------------------------------

Encoder Encoder::identity_init(int dim, bool linear, bool trainable) {
    Encoder e;
    e.weight = Value::identity(dim, trainable);
    e.bias = Value::zeros(dim, 1, trainable);
    e.linear = linear;
    return e;
}

Value Encoder::apply(const Value& x) const {
    Value z = ad::add(ad::matvec(weight, x), bias);
    return linear ? z : ad::tanh_op(z);
}

EncoderSet EncoderSet::identity_init(const std::vector<int>& dims, bool linear, bool trainable) {
    EncoderSet set;
    for (int d : dims) set.encoders.push_back(Encoder::identity_init(d, linear, trainable));
    return set;
}

std::vector<Value> EncoderSet::parameters() const {
    std::vector<Value> ps;
    for (const auto& e : encoders) {
        ps.push_back(e.weight);
        ps.push_back(e.bias);
    }
    return ps;
}

// --- prototype bank ----------------------------------------------------------

PrototypeBank PrototypeBank::from_prototypes(std::vector<std::vector<std::vector<double>>> protos, BankStage stage) {
    PrototypeBank bank;
    bank.num_classes = static_cast<int>(protos.size());
    bank.num_modalities = bank.num_classes ? static_cast<int>(protos[0].size()) : 0;
    for (int m = 0; m < bank.num_modalities; ++m) bank.dims.push_back(static_cast<int>(protos[0][m].size()));
    bank.stage = stage;
    bank.prototypes = std::move(protos);
    return bank;
}

void PrototypeBank::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("PrototypeBank::save: cannot open '" + path + "'");
    out << "QUADPROTO 1\n";
    out << num_classes << ' ' << num_modalities << ' ' << (stage == BankStage::Optimized ? 1 : 0) << '\n';
    for (int m = 0; m < num_modalities; ++m) out << dims[m] << (m + 1 < num_modalities ? ' ' : '\n');
    out.precision(17);
    for (int c = 0; c < num_classes; ++c)
        for (int m = 0; m < num_modalities; ++m) {
            for (int j = 0; j < dims[m]; ++j) out << prototypes[c][m][j] << (j + 1 < dims[m] ? ' ' : '\n');
        }
    if (!out) throw DataError("PrototypeBank::save: write failed for '" + path + "'");
}

PrototypeBank PrototypeBank::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("PrototypeBank::load: cannot open '" + path + "'");
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "QUADPROTO" || version != 1)
        throw DataError("PrototypeBank::load: unrecognized format in '" + path + "'");
    PrototypeBank bank;
    int opt = 0;
    in >> bank.num_classes >> bank.num_modalities >> opt;
    bank.stage = opt ? BankStage::Optimized : BankStage::InitializedMeans;
    bank.dims.resize(bank.num_modalities);
    for (int m = 0; m < bank.num_modalities; ++m) in >> bank.dims[m];
    bank.prototypes.assign(bank.num_classes, std::vector<std::vector<double>>(bank.num_modalities));
    for (int c = 0; c < bank.num_classes; ++c)
        for (int m = 0; m < bank.num_modalities; ++m) {
            bank.prototypes[c][m].resize(bank.dims[m]);
            for (int j = 0; j < bank.dims[m]; ++j) in >> bank.prototypes[c][m][j];
        }
    if (!in) throw DataError("PrototypeBank::load: truncated file '" + path + "'");
    return bank;
}

// --- initialization ----------------------------------------------------------

PrototypeBank init_prototypes(const Dataset& train, const EncoderSet& encoders) {
    if (static_cast<int>(encoders.encoders.size()) != train.num_modalities)
        throw DataError("init_prototypes: encoder count does not match modality count");
    std::vector<int> class_counts(train.num_classes, 0);
    for (const auto& s : train.samples) class_counts[s.label]++;
    for (int c = 0; c < train.num_classes; ++c) {
        if (class_counts[c] == 0) throw DataError("init_prototypes: class " + std::to_string(c) + " is empty");
    }

    ad::NoGradGuard guard;
    std::vector<std::vector<std::vector<double>>> protos(
        train.num_classes, std::vector<std::vector<double>>(train.num_modalities));
    for (int c = 0; c < train.num_classes; ++c)
        for (int m = 0; m < train.num_modalities; ++m) protos[c][m].assign(train.dims[m], 0.0);

    for (const auto& s : train.samples) {
        for (int m = 0; m < train.num_modalities; ++m) {
            Value z = encoders.encoders[m].apply(Value::column(s.features[m]));
            for (int j = 0; j < train.dims[m]; ++j) protos[s.label][m][j] += z[j];
        }
    }
    for (int c = 0; c < train.num_classes; ++c)
        for (int m = 0; m < train.num_modalities; ++m)
            for (auto& v : protos[c][m]) v /= class_counts[c];

    return PrototypeBank::from_prototypes(std::move(protos), BankStage::InitializedMeans);
}

// --- optimization --------------------------------------------------------------

namespace {

// Cross-modal pairing for unequal dimensions compares the first
// min(d_i, d_j) coordinates.
Value truncated_cosine(const Value& a, const Value& b) {
    if (a.rows() == b.rows()) return ad::cosine_similarity(a, b);
    int d = std::min(a.rows(), b.rows());
    return ad::cosine_similarity(ad::slice_rows(a, 0, d), ad::slice_rows(b, 0, d));
}

}  // namespace

PrototypeOptResult optimize_prototypes(PrototypeBank& bank, EncoderSet& encoders, const Dataset& train,
                                       const PrototypeOptOptions& opts,
                                       const std::function<void(int, const PrototypeBank&)>& on_epoch) {
    if (bank.stage != BankStage::InitializedMeans)
        throw DataError("optimize_prototypes: bank already optimized");
    const int C = bank.num_classes;
    const int M = bank.num_modalities;

    // Free per-prototype offsets on top of the (differentiable) class means.
    std::vector<std::vector<Value>> offsets(C, std::vector<Value>(M));
    for (int c = 0; c < C; ++c)
        for (int m = 0; m < M; ++m) offsets[c][m] = Value::zeros(bank.dims[m], 1, true);

    std::vector<Value> params;
    for (auto& row : offsets)
        for (auto& v : row) params.push_back(v);
    for (const auto& p : encoders.parameters()) params.push_back(p);

    ad::AdamConfig acfg;
    acfg.lr = opts.lr;
    ad::Adam adam(params, acfg);

    std::vector<std::vector<int>> by_class(C);
    for (int i = 0; i < train.size(); ++i) by_class[train.samples[i].label].push_back(i);

    PrototypeOptResult result;
    double prev = 0.0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        if (opts.lr_decay_every > 0 && epoch > 0 && epoch % opts.lr_decay_every == 0) {
            adam.set_lr(adam.lr() * opts.lr_decay);
        }

        // class means through the encoders, kept in the graph
        std::vector<std::vector<Value>> protos(C, std::vector<Value>(M));
        for (int c = 0; c < C; ++c) {
            double inv = 1.0 / by_class[c].size();
            for (int m = 0; m < M; ++m) {
                Value acc = Value::zeros(bank.dims[m], 1, false);
                for (int i : by_class[c]) {
                    acc = ad::add(acc, encoders.encoders[m].apply(Value::column(train.samples[i].features[m])));
                }
                protos[c][m] = ad::add(ad::scale(acc, inv), offsets[c][m]);
            }
        }

        // cross-modal agreement term
        Value agreement = Value::scalar(0.0);
        if (M > 1) {
            if (opts.mi_mode == MiSurrogate::Cosine) {
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < M; ++i)
                        for (int j = 0; j < M; ++j) {
                            if (i == j) continue;
                            agreement = ad::add(agreement, truncated_cosine(protos[c][i], protos[c][j]));
                        }
            } else {
                // InfoNCE over per-class sample batches: positives are the two
                // modality views of one sample, negatives the rest of the batch.
                for (int c = 0; c < C; ++c) {
                    int n = std::min<int>(opts.infonce_batch, static_cast<int>(by_class[c].size()));
                    std::vector<std::vector<Value>> z(M);
                    for (int m = 0; m < M; ++m)
                        for (int k = 0; k < n; ++k)
                            z[m].push_back(
                                encoders.encoders[m].apply(Value::column(train.samples[by_class[c][k]].features[m])));
                    for (int i = 0; i < M; ++i)
                        for (int j = 0; j < M; ++j) {
                            if (i == j) continue;
                            Value nce = Value::scalar(0.0);
                            for (int k = 0; k < n; ++k) {
                                std::vector<Value> sims;
                                for (int l = 0; l < n; ++l) sims.push_back(truncated_cosine(z[i][k], z[j][l]));
                                Value lse = ad::log_op(ad::sum(ad::exp_op(ad::concat_rows(sims))));
                                nce = ad::add(nce, ad::sub(sims[k], lse));
                            }
                            agreement = ad::add(agreement, ad::scale(nce, 1.0 / n));
                        }
                }
            }
            agreement = ad::scale(agreement, 1.0 / (C * M * M));
        }

        // inter-class separation term
        Value separation = Value::scalar(0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < C; ++c) {
                std::vector<Value> sims;
                for (int i = 0; i < C; ++i) sims.push_back(ad::cosine_similarity(protos[c][m], protos[i][m]));
                Value self_sim = ad::exp_op(sims[c]);
                Value denom = ad::sum(ad::exp_op(ad::concat_rows(sims)));
                separation = ad::add(separation, ad::sub(ad::log_op(self_sim), ad::log_op(denom)));
            }
        separation = ad::scale(separation, 1.0 / (C * M));

        Value objective = ad::add(agreement, separation);
        double obj = objective.item();
        if (!std::isfinite(obj)) throw NumericError("optimize_prototypes: objective became non-finite");
        result.objective.push_back(obj);

        adam.zero_grad();
        ad::backward(ad::neg(objective));  // ascent
        adam.step();

        // Recompute prototypes after the step so the recorded bank matches the
        // new parameters.
        {
            ad::NoGradGuard guard;
            for (int c = 0; c < C; ++c) {
                double inv = 1.0 / by_class[c].size();
                for (int m = 0; m < M; ++m) {
                    std::vector<double> acc(bank.dims[m], 0.0);
                    for (int i : by_class[c]) {
                        Value z = encoders.encoders[m].apply(Value::column(train.samples[i].features[m]));
                        for (int j = 0; j < bank.dims[m]; ++j) acc[j] += z[j];
                    }
                    for (int j = 0; j < bank.dims[m]; ++j)
                        acc[j] = acc[j] * inv + offsets[c][m][j];
                    bank.prototypes[c][m] = std::move(acc);
                }
            }
        }

        result.epochs_run = epoch + 1;
        if (on_epoch) on_epoch(epoch, bank);
        if (epoch > 0 && std::fabs(obj - prev) < opts.early_stop_tol) break;
        prev = obj;
    }

    bank.stage = BankStage::Optimized;
    return result;
}

// --- quality estimation --------------------------------------------------------

std::vector<double> modality_probs(const std::vector<double>& x, const PrototypeBank& bank, int m) {
    if (bank.stage != BankStage::Optimized) throw DataError("modality_probs: bank not optimized");
    if (m < 0 || m >= bank.num_modalities) throw DataError("modality_probs: modality index out of range");
    if (static_cast<int>(x.size()) != bank.dims[m])
        throw ShapeError("modality_probs: input dimension " + std::to_string(x.size()) + " does not match modality " +
                         std::to_string(m) + " dimension " + std::to_string(bank.dims[m]));

    ad::NoGradGuard guard;
    std::vector<Value> sims;
    Value xv = Value::column(x);
    for (int c = 0; c < bank.num_classes; ++c) {
        sims.push_back(ad::cosine_similarity(xv, Value::column(bank.at(c, m))));
    }
    Value probs = ad::softmax_rows(ad::transpose(ad::concat_rows(sims)));
    return probs.data();
}

std::vector<std::vector<double>> feature_probs(const std::vector<double>& x, const PrototypeBank& bank, int m) {
    if (bank.stage != BankStage::Optimized) throw DataError("feature_probs: bank not optimized");
    if (m < 0 || m >= bank.num_modalities) throw DataError("feature_probs: modality index out of range");
    const int d = bank.dims[m];
    if (static_cast<int>(x.size()) != d)
        throw ShapeError("feature_probs: input dimension " + std::to_string(x.size()) + " does not match modality " +
                         std::to_string(m) + " dimension " + std::to_string(d));

    ad::NoGradGuard guard;
    Value xv = Value::column(x);
    std::vector<Value> cols;
    for (int c = 0; c < bank.num_classes; ++c) {
        cols.push_back(ad::neg(ad::abs_op(ad::sub(xv, Value::column(bank.at(c, m))))));
    }
    Value probs = ad::softmax_rows(ad::concat_cols(cols));
    std::vector<std::vector<double>> rows(d, std::vector<double>(bank.num_classes));
    for (int j = 0; j < d; ++j)
        for (int c = 0; c < bank.num_classes; ++c) rows[j][c] = probs.at(j, c);
    return rows;
}

double true_class_prob(const std::vector<double>& p, int label) {
    if (label < 0 || label >= static_cast<int>(p.size()))
        throw DataError("true_class_prob: label " + std::to_string(label) + " out of range [0," +
                        std::to_string(p.size()) + ")");
    return p[label];
}

QualityReport estimate_quality(const MultimodalSample& sample, const PrototypeBank& bank, LabelMode mode) {
    QualityReport rep;
    rep.modality_quality.resize(bank.num_modalities);
    rep.feature_quality.resize(bank.num_modalities);
    rep.class_probs_modality.resize(bank.num_modalities);
    rep.class_probs_feature.resize(bank.num_modalities);
    for (int m = 0; m < bank.num_modalities; ++m) {
        auto pv = modality_probs(sample.features[m], bank, m);
        int cls = (mode == LabelMode::TrueLabel) ? sample.label
                                                 : static_cast<int>(std::max_element(pv.begin(), pv.end()) - pv.begin());
        rep.modality_quality[m] = true_class_prob(pv, cls);
        auto pf = feature_probs(sample.features[m], bank, m);
        rep.feature_quality[m].resize(pf.size());
        for (std::size_t j = 0; j < pf.size(); ++j) rep.feature_quality[m][j] = true_class_prob(pf[j], cls);
        rep.class_probs_modality[m] = std::move(pv);
        rep.class_probs_feature[m] = std::move(pf);
    }
    return rep;
}

std::vector<std::vector<double>> noise_probe(const PrototypeBank& bank,
                                             const std::vector<std::vector<std::vector<double>>>& clean_means,
                                             double sigma) {
    if (!(sigma > 0)) throw DataError("noise_probe: sigma must be > 0");
    std::vector<std::vector<double>> scores(bank.num_classes, std::vector<double>(bank.num_modalities, 0.0));
    for (int c = 0; c < bank.num_classes; ++c)
        for (int m = 0; m < bank.num_modalities; ++m) {
            const auto& proto = bank.at(c, m);
            const auto& clean = clean_means.at(c).at(m);
            if (proto.size() != clean.size()) throw ShapeError("noise_probe: clean mean dimension mismatch");
            double acc = 0.0;
            for (std::size_t j = 0; j < proto.size(); ++j) {
                double r = proto[j] - clean[j];
                acc += std::exp(-0.5 * r * r / (sigma * sigma));
            }
            scores[c][m] = acc / proto.size();
        }
    return scores;
}

// --- graph-level quality ---------------------------------------------------------

BankConstants BankConstants::from(const PrototypeBank& bank) {
    BankConstants bc;
    bc.protos.assign(bank.num_classes, std::vector<Value>(bank.num_modalities));
    for (int c = 0; c < bank.num_classes; ++c)
        for (int m = 0; m < bank.num_modalities; ++m) bc.protos[c][m] = Value::column(bank.at(c, m));
    return bc;
}

ad::Value feature_quality_graph(const Value& x, const BankConstants& bank, int m, int class_index) {
    std::vector<Value> cols;
    cols.reserve(bank.protos.size());
    for (const auto& row : bank.protos) {
        cols.push_back(ad::neg(ad::abs_op(ad::sub(x, row[m]))));
    }
    return ad::col(ad::softmax_rows(ad::concat_cols(cols)), class_index);
}

}  // namespace quad
