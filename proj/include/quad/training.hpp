#pragma once

#include <string>
#include <vector>

#include "quad/metrics.hpp"
#include "quad/model.hpp"

namespace quad {

struct TrainConfig {
    int max_depth = 3;  // K
    int hidden_dim = 64;
    int proto_epochs = 200;
    double proto_lr = 1e-3;
    MiSurrogate mi_mode = MiSurrogate::Cosine;
    int epochs = 60;
    double lr = 1e-4;
    int lr_step_every = 50;
    double lr_step_gamma = 0.5;
    int batch_size = 32;
    int patience = 30;
    std::uint64_t seed = 0;
    bool use_gain_term = true;      // subtract the quality gain in the loss
    bool use_sparsity_term = true;  // add the gate L1 penalty
    bool gain_uses_labels = false;
    bool compare_encoded = false;
    StateInitMode state_mode = StateInitMode::SharedFixed;
    Variant variant = Variant::Full;

    std::string canonical() const;  // stable text form, hashed into checkpoints
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double task_loss = 0.0;
    double gain = 0.0;
    double sparsity = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<double> proto_objective;
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    bool diverged = false;
};

struct TrainResult {
    Model model;
    TrainHistory history;
};

// Two-stage learning: the prototype stage optimizes encoders + prototypes and
// freezes them; the main stage minimizes task loss - gain + sparsity with
// Adam and step lr decay, keeping the best-validation parameters.
TrainResult train_model(const Dataset& train, const Dataset& val, const TrainConfig& cfg);

struct EvalResult {
    MetricsReport metrics;
    std::vector<int> predictions;
    std::vector<DepthPlan> plans;
    double mean_flops = 0.0;
    std::vector<double> mean_depth;  // per modality
};

EvalResult evaluate(const Model& model, const Dataset& data);

// Builds and trains the tagged variant under the given config and seeds.
TrainResult ablate(const std::string& tag, const Dataset& train, const Dataset& val, TrainConfig cfg);

// Linear per-modality probe trained with cross-entropy; quality baseline for
// the classifier-confidence variant and the confidence-shift comparison.
ModalityClassifier train_modality_classifier(const Dataset& train, int modality, int epochs, double lr,
                                             std::uint64_t seed);

}  // namespace quad
