// Command-line harness: dataset generation, training, evaluation, noise
// sweeps, confidence and prototype probes, depth diagnostics, and cost
// accounting. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 numerical failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quad/harness/commands.hpp"

using quad::harness::CommandContext;
using quad::harness::Config;

namespace {

struct SharedFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::string model_path;
    std::vector<double> sigmas;
    std::vector<std::string> variants;
    long long seed = -1;
    int k = -1;
    int hdim = -1;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
    cmd->add_option("--config", f.config_path, "flat key=value config file");
    cmd->add_option("--seed", f.seed, "base RNG seed");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--sigma", f.sigmas, "noise intensities")->delimiter(',');
    cmd->add_option("--variant", f.variants, "model variants")->delimiter(',');
    cmd->add_option("--k", f.k, "maximum depth K");
    cmd->add_option("--hdim", f.hdim, "LSTM hidden size");
}

CommandContext make_context(const SharedFlags& f) {
    CommandContext ctx;
    ctx.cfg = f.config_path.empty() ? Config::empty() : Config::from_file(f.config_path);
    if (f.seed >= 0) ctx.cfg.set("seed", std::to_string(f.seed));
    if (f.k >= 1) ctx.cfg.set("train.k", std::to_string(f.k));
    if (f.hdim >= 1) ctx.cfg.set("train.hdim", std::to_string(f.hdim));
    ctx.out_dir = f.out_dir;
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reliable multimodal classifier with per-sample dynamic depth and predicted layer parameters"};
    app.require_subcommand(1);

    SharedFlags gen, train, eval, sweep, abl, probe_conf, probe_proto, diag, flops;

    CLI::App* c_gen = app.add_subcommand("gen-data", "generate a synthetic multimodal dataset as CSV files");
    add_shared(c_gen, gen);
    CLI::App* c_train = app.add_subcommand("train", "two-stage training; writes checkpoint + history");
    add_shared(c_train, train);
    CLI::App* c_eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    add_shared(c_eval, eval);
    c_eval->add_option("--model", eval.model_path, "checkpoint path");
    CLI::App* c_sweep = app.add_subcommand("sweep-noise", "metrics over a (sigma, variant) grid");
    add_shared(c_sweep, sweep);
    CLI::App* c_ablate = app.add_subcommand("ablate", "train and compare model variants");
    add_shared(c_ablate, abl);
    CLI::App* c_pconf = app.add_subcommand("probe-confidence",
                                           "confidence shift of quality estimators under training noise");
    add_shared(c_pconf, probe_conf);
    CLI::App* c_pproto = app.add_subcommand("probe-prototypes", "prototype drift under the noise density");
    add_shared(c_pproto, probe_proto);
    CLI::App* c_diag = app.add_subcommand("diagnose-depth", "assigned depth distribution per noise level");
    add_shared(c_diag, diag);
    c_diag->add_option("--model", diag.model_path, "checkpoint path (optional)");
    CLI::App* c_flops = app.add_subcommand("flops", "analytic per-sample cost of a trained checkpoint");
    add_shared(c_flops, flops);
    c_flops->add_option("--model", flops.model_path, "checkpoint path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_gen->parsed()) return quad::harness::cmd_gen_data(make_context(gen));
        if (c_train->parsed()) return quad::harness::cmd_train(make_context(train));
        if (c_eval->parsed()) return quad::harness::cmd_evaluate(make_context(eval), eval.model_path);
        if (c_sweep->parsed()) return quad::harness::cmd_sweep_noise(make_context(sweep), sweep.sigmas, sweep.variants);
        if (c_ablate->parsed()) return quad::harness::cmd_ablate(make_context(abl), abl.variants);
        if (c_pconf->parsed()) {
            double sigma = probe_conf.sigmas.empty() ? 5.0 : probe_conf.sigmas[0];
            return quad::harness::cmd_probe_confidence(make_context(probe_conf), sigma);
        }
        if (c_pproto->parsed()) {
            double sigma = probe_proto.sigmas.empty() ? 5.0 : probe_proto.sigmas[0];
            return quad::harness::cmd_probe_prototypes(make_context(probe_proto), sigma);
        }
        if (c_diag->parsed()) return quad::harness::cmd_diagnose_depth(make_context(diag), diag.model_path, diag.sigmas);
        if (c_flops->parsed()) return quad::harness::cmd_flops(make_context(flops), flops.model_path);
    } catch (const quad::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const quad::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const quad::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
