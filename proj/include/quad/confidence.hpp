#pragma once

#include <functional>
#include <string>
#include <vector>

#include "quad/data.hpp"
#include "quad/tensor.hpp"

namespace quad {

// Dimension-preserving modality encoder: affine map + tanh (tanh can be
// disabled to get a purely linear / identity encoder).
struct Encoder {
    ad::Value weight;  // d x d
    ad::Value bias;    // d x 1
    bool linear = false;

    static Encoder identity_init(int dim, bool linear = false, bool trainable = true);
    ad::Value apply(const ad::Value& x) const;
    int dim() const { return weight.rows(); }
};

struct EncoderSet {
    std::vector<Encoder> encoders;

    static EncoderSet identity_init(const std::vector<int>& dims, bool linear = false, bool trainable = true);
    std::vector<ad::Value> parameters() const;
};

enum class BankStage { InitializedMeans, Optimized };

// C x M class-and-modality representative vectors. Quality estimation
// contrasts raw inputs against these; no classifier is involved, so the
// estimates cannot overfit training noise baked into a downstream network.
struct PrototypeBank {
    int num_classes = 0;
    int num_modalities = 0;
    std::vector<int> dims;
    BankStage stage = BankStage::InitializedMeans;
    std::vector<std::vector<std::vector<double>>> prototypes;  // [class][modality][feature]

    static PrototypeBank from_prototypes(std::vector<std::vector<std::vector<double>>> protos, BankStage stage);

    const std::vector<double>& at(int c, int m) const { return prototypes[c][m]; }

    // Plain-text matrix file: dims header + row-major floats.
    void save(const std::string& path) const;
    static PrototypeBank load(const std::string& path);
};

struct QualityReport {
    std::vector<double> modality_quality;                          // per modality, in [0,1]
    std::vector<std::vector<double>> feature_quality;              // per modality, d values in [0,1]
    std::vector<std::vector<double>> class_probs_modality;         // per modality, C probabilities
    std::vector<std::vector<std::vector<double>>> class_probs_feature;  // per modality, d x C rows
};

enum class LabelMode { TrueLabel, Predicted };

// Class-and-modality means of encoder-enhanced training features.
PrototypeBank init_prototypes(const Dataset& train, const EncoderSet& encoders);

enum class MiSurrogate { Cosine, InfoNce };

struct PrototypeOptOptions {
    int epochs = 200;
    double lr = 1e-3;
    double early_stop_tol = 1e-7;
    MiSurrogate mi_mode = MiSurrogate::Cosine;
    int infonce_batch = 16;
    int lr_decay_every = 0;  // 0 disables step decay
    double lr_decay = 0.5;
    std::uint64_t seed = 0;
};

struct PrototypeOptResult {
    std::vector<double> objective;  // per-epoch value of the maximized constraint
    int epochs_run = 0;
};

// Gradient ascent (Adam) on the cross-modal agreement + inter-class
// separation objective. Prototypes are free parameters initialized at the
// class means; the encoders train jointly through the class-mean term.
PrototypeOptResult optimize_prototypes(PrototypeBank& bank, EncoderSet& encoders, const Dataset& train,
                                       const PrototypeOptOptions& opts,
                                       const std::function<void(int, const PrototypeBank&)>& on_epoch = {});

// Softmax over classes of cos(x, prototype[c]) for one modality.
std::vector<double> modality_probs(const std::vector<double>& x, const PrototypeBank& bank, int m);

// Row j = softmax over classes of -|x[j] - prototype[c][j]|.
std::vector<std::vector<double>> feature_probs(const std::vector<double>& x, const PrototypeBank& bank, int m);

// p[label]; with no label the caller passes the predicted class.
double true_class_prob(const std::vector<double>& p, int label);

QualityReport estimate_quality(const MultimodalSample& sample, const PrototypeBank& bank, LabelMode mode);

// Per-coordinate Gaussian(0, sigma^2) density at (prototype - clean mean),
// averaged over coordinates, normalized by the density at zero residual.
std::vector<std::vector<double>> noise_probe(const PrototypeBank& bank,
                                             const std::vector<std::vector<std::vector<double>>>& clean_means,
                                             double sigma);

// --- graph-level pieces used inside model training -------------------------

// Per-modality prototype constants for building differentiable quality terms.
struct BankConstants {
    std::vector<std::vector<ad::Value>> protos;  // [class][modality], d x 1 each

    static BankConstants from(const PrototypeBank& bank);
};

// Differentiable feature-level quality of a feature vector for one modality,
// with the class index fixed by the caller. Returns a d x 1 value in [0,1].
ad::Value feature_quality_graph(const ad::Value& x, const BankConstants& bank, int m, int class_index);

}  // namespace quad
