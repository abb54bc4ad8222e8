#pragma once

#include <string>
#include <vector>

#include "quad/backbone.hpp"
#include "quad/confidence.hpp"
#include "quad/data.hpp"
#include "quad/depth.hpp"
#include "quad/hyper.hpp"

namespace quad {

enum class Variant {
    Full,
    FixedDepth,       // depth pinned to K for every sample and modality
    StaticParams,     // trained per-depth block parameters, no hypernetwork
    DepthMinusOne,    // max(D - 1, 1)
    DepthPlusOne,     // D + 1 (may exceed K)
    ClassifierConfidence,  // modality quality from per-modality classifier MCP
};

Variant variant_from_tag(const std::string& tag);
std::string variant_tag(Variant v);

struct ModelConfig {
    int max_depth = 3;  // K
    int hidden_dim = 64;
    StateInitMode state_mode = StateInitMode::SharedFixed;
    bool gain_uses_labels = false;  // class index for quality gains during training
    bool compare_encoded = false;   // contrast encoded rather than raw inputs with prototypes
    Variant variant = Variant::Full;
    std::uint64_t seed = 0;
};

// Per-modality linear probe used by the ClassifierConfidence variant and the
// confidence-shift baseline.
struct ModalityClassifier {
    Classifier clf;
    int modality = 0;

    std::vector<double> probs(const std::vector<double>& x) const;
};

// The assembled classifier: frozen quality estimator (encoders + prototype
// bank + depth normalizer) plus the trainable inference network (LSTM unit,
// per-modality decoders, final classifier; or static blocks).
struct Model {
    ModelConfig config;
    EncoderSet encoders;
    PrototypeBank bank;
    BankConstants bank_constants;
    DepthNormalizer normalizer;
    LstmUnit unit;
    std::vector<ParamDecoder> decoders;
    Classifier classifier;
    std::vector<std::vector<BlockParams>> static_blocks;        // StaticParams variant: [modality][depth]
    std::vector<ModalityClassifier> modality_classifiers;       // ClassifierConfidence variant
    std::vector<int> dims;
    int num_classes = 0;
    std::uint64_t config_hash = 0;

    std::vector<ad::Value> trainable_parameters() const;
    long parameter_count() const;  // trainable, main stage

    struct SamplePlan {
        DepthPlan plan;
        std::vector<int> class_indices;
        std::vector<double> modality_quality;
    };

    // quality_mode picks the class for the modality-quality TCP (labels during
    // training, argmax at inference); the gain class index follows
    // config.gain_uses_labels.
    SamplePlan plan_for(const MultimodalSample& sample, LabelMode quality_mode) const;

    struct SampleForward {
        ForwardTrace trace;
        GainLedger gains;
    };

    SampleForward forward(const MultimodalSample& sample, const SamplePlan& plan, long sample_index) const;

    struct Inference {
        int prediction = 0;
        std::vector<double> class_probs;
        DepthPlan plan;
    };

    Inference infer(const MultimodalSample& sample, long sample_index = 0) const;

    // Analytic per-sample cost of one forward pass at the given plan.
    double flops_for_plan(const DepthPlan& plan) const;

    void save(const std::string& path) const;
    static Model load(const std::string& path);
};

// The vector a modality's features are contrasted against the prototypes
// with (raw by default, encoded behind the compare_encoded flag).
std::vector<double> quality_input(const Model& model, int m, const std::vector<double>& x);

}  // namespace quad
