#pragma once

#include <string>
#include <vector>

#include "quad/data.hpp"
#include "quad/harness/config.hpp"
#include "quad/model.hpp"
#include "quad/training.hpp"

namespace quad::harness {

struct CommandContext {
    Config cfg;
    std::string out_dir = "out";
};

// Raw dataset -> stratified splits -> optional train-stage noise -> z-score
// normalization fitted on the training split -> normalized splits. Test-stage
// corruption is applied separately via corrupted_copy.
struct PreparedData {
    SplitResult splits;  // normalized
    Normalizer normalizer;
    bool synthetic = false;
    DatasetSpec spec;  // valid when synthetic
    std::uint64_t fingerprint = 0;
};

PreparedData prepare_data(const Config& cfg);

// Post-normalization additive Gaussian corruption of an evaluation split.
Dataset corrupted_copy(const Dataset& data, const Config& cfg, double sigma);

TrainConfig train_config_from(const Config& cfg);

// Prototype stage + depth normalizer only; enough for depth diagnosis.
Model build_quality_model(const Dataset& train, const Config& cfg);

int cmd_gen_data(const CommandContext& ctx);
int cmd_train(const CommandContext& ctx);
int cmd_evaluate(const CommandContext& ctx, const std::string& model_path);
int cmd_sweep_noise(const CommandContext& ctx, std::vector<double> sigmas, std::vector<std::string> variants);
int cmd_ablate(const CommandContext& ctx, std::vector<std::string> variants);
int cmd_probe_confidence(const CommandContext& ctx, double sigma_train);
int cmd_probe_prototypes(const CommandContext& ctx, double sigma);
int cmd_diagnose_depth(const CommandContext& ctx, const std::string& model_path, std::vector<double> sigmas);
int cmd_flops(const CommandContext& ctx, const std::string& model_path);

}  // namespace quad::harness
