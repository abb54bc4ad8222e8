#include "quad/harness/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "quad/harness/csv.hpp"
#include "quad/harness/manifest.hpp"
#include "quad/harness/pool.hpp"
#include "quad/harness/svg.hpp"

namespace quad::harness {

namespace {

std::vector<int> int_list_or_repeat(const Config& cfg, const std::string& key, int count, int fallback) {
    auto list = cfg.get_int_list(key, {fallback});
    if (static_cast<int>(list.size()) == 1) list.assign(count, list[0]);
    if (static_cast<int>(list.size()) != count)
        throw UsageError("config: '" + key + "' must have 1 or " + std::to_string(count) + " entries");
    return list;
}

std::vector<double> double_list_or_repeat(const Config& cfg, const std::string& key, int count, double fallback) {
    auto list = cfg.get_double_list(key, {fallback});
    if (static_cast<int>(list.size()) == 1) list.assign(count, list[0]);
    if (static_cast<int>(list.size()) != count)
        throw UsageError("config: '" + key + "' must have 1 or " + std::to_string(count) + " entries");
    return list;
}

DatasetSpec synthetic_spec_from(const Config& cfg) {
    DatasetSpec spec;
    spec.num_modalities = cfg.get_int("data.modalities", 3);
    spec.num_classes = cfg.get_int("data.classes", 4);
    spec.num_samples = cfg.get_int("data.samples", 1200);
    spec.dims = int_list_or_repeat(cfg, "data.dims", spec.num_modalities, 16);
    spec.separation = double_list_or_repeat(cfg, "data.separation", spec.num_modalities, 3.0);
    spec.seed = cfg.get_u64("data.seed", cfg.get_u64("seed", 7));
    return spec;
}

NoiseSpec noise_spec_from(const Config& cfg, const Dataset& data, double sigma) {
    NoiseSpec ns;
    ns.sigma = sigma;
    ns.fraction = cfg.get_double("noise.fraction", 1.0);
    ns.modalities = cfg.get_int_list("noise.modalities", {0});
    for (int m : ns.modalities) {
        if (m < 0 || m >= data.num_modalities)
            throw UsageError("noise.modalities: index " + std::to_string(m) + " out of range");
    }
    ns.seed = cfg.get_u64("noise.seed", cfg.get_u64("seed", 7));
    return ns;
}

}  // namespace

PreparedData prepare_data(const Config& cfg) {
    PreparedData prep;
    Dataset raw;
    std::string kind = cfg.get_string("data.kind", "synthetic");
    if (kind == "synthetic") {
        prep.synthetic = true;
        prep.spec = synthetic_spec_from(cfg);
        raw = generate_synthetic(prep.spec);
    } else if (kind == "tabular") {
        auto paths = cfg.get_string_list("data.paths", {});
        std::string labels = cfg.get_string("data.labels", "");
        if (paths.empty() || labels.empty())
            throw UsageError("config: tabular data needs data.paths and data.labels");
        TabularOptions opts;
        std::string delim = cfg.get_string("data.delimiter", ",");
        opts.delimiter = delim.empty() ? ',' : delim[0];
        opts.header = cfg.get_bool("data.header", false);
        raw = load_tabular(paths, labels, opts);
    } else {
        throw UsageError("config: data.kind must be synthetic or tabular, got '" + kind + "'");
    }
    prep.fingerprint = raw.fingerprint();

    std::vector<double> ratios = {cfg.get_double("split.train", 0.7), cfg.get_double("split.val", 0.15),
                                  cfg.get_double("split.test", 0.15)};
    SplitResult sp = split(raw, ratios, cfg.get_u64("split.seed", cfg.get_u64("seed", 7)));

    // train-stage noise goes in before normalization is fitted
    double sigma = cfg.get_double("noise.sigma", 0.0);
    if (sigma > 0 && cfg.get_string("noise.stage", "test") == "train") {
        sp.train = inject_noise(sp.train, noise_spec_from(cfg, sp.train, sigma));
    }

    prep.normalizer = Normalizer::fit(sp.train);
    prep.splits.train = prep.normalizer.apply(sp.train);
    prep.splits.val = prep.normalizer.apply(sp.val);
    prep.splits.test = prep.normalizer.apply(sp.test);
    return prep;
}

Dataset corrupted_copy(const Dataset& data, const Config& cfg, double sigma) {
    if (sigma <= 0) return data;
    return inject_noise(data, noise_spec_from(cfg, data, sigma));
}

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig tc;
    tc.max_depth = cfg.get_int("train.k", tc.max_depth);
    tc.hidden_dim = cfg.get_int("train.hdim", tc.hidden_dim);
    tc.proto_epochs = cfg.get_int("proto.epochs", tc.proto_epochs);
    tc.proto_lr = cfg.get_double("proto.lr", tc.proto_lr);
    std::string mi = cfg.get_string("proto.mi", "cos");
    if (mi == "cos")
        tc.mi_mode = MiSurrogate::Cosine;
    else if (mi == "infonce")
        tc.mi_mode = MiSurrogate::InfoNce;
    else
        throw UsageError("config: proto.mi must be cos or infonce");
    tc.epochs = cfg.get_int("train.epochs", tc.epochs);
    tc.lr = cfg.get_double("train.lr", tc.lr);
    tc.lr_step_every = cfg.get_int("train.lr_step", tc.lr_step_every);
    tc.lr_step_gamma = cfg.get_double("train.lr_gamma", tc.lr_step_gamma);
    tc.batch_size = cfg.get_int("train.batch", tc.batch_size);
    tc.patience = cfg.get_int("train.patience", tc.patience);
    tc.seed = cfg.get_u64("train.seed", cfg.get_u64("seed", 7));
    tc.use_gain_term = cfg.get_bool("train.gain_term", tc.use_gain_term);
    tc.use_sparsity_term = cfg.get_bool("train.sparsity_term", tc.use_sparsity_term);
    tc.gain_uses_labels = cfg.get_bool("train.gain_labels", tc.gain_uses_labels);
    tc.compare_encoded = cfg.get_bool("train.compare_encoded", tc.compare_encoded);
    std::string st = cfg.get_string("train.state_mode", "fixed");
    if (st == "fixed")
        tc.state_mode = StateInitMode::SharedFixed;
    else if (st == "random")
        tc.state_mode = StateInitMode::PerSampleRandom;
    else
        throw UsageError("config: train.state_mode must be fixed or random");
    tc.variant = variant_from_tag(cfg.get_string("train.variant", "full"));
    return tc;
}

Model build_quality_model(const Dataset& train, const Config& cfg) {
    TrainConfig tc = train_config_from(cfg);
    Model model;
    model.config.max_depth = tc.max_depth;
    model.config.hidden_dim = tc.hidden_dim;
    model.config.seed = tc.seed;
    model.dims = train.dims;
    model.num_classes = train.num_classes;
    model.config_hash = fnv1a(tc.canonical());

    model.encoders = EncoderSet::identity_init(train.dims, cfg.get_bool("proto.linear_encoders", false));
    model.bank = init_prototypes(train, model.encoders);
    PrototypeOptOptions popts;
    popts.epochs = tc.proto_epochs;
    popts.lr = tc.proto_lr;
    popts.mi_mode = tc.mi_mode;
    popts.seed = tc.seed;
    optimize_prototypes(model.bank, model.encoders, train, popts);
    model.bank_constants = BankConstants::from(model.bank);

    std::vector<double> pool;
    for (const auto& s : train.samples) {
        for (int m = 0; m < train.num_modalities; ++m) {
            auto probs = modality_probs(quality_input(model, m, s.features[m]), model.bank, m);
            pool.push_back(1.0 - probs[s.label]);
        }
    }
    model.normalizer = fit_normalizer(pool, tc.max_depth);
    return model;
}

// --- gen-data ----------------------------------------------------------------

int cmd_gen_data(const CommandContext& ctx) {
    ensure_dir(ctx.out_dir);
    DatasetSpec spec = synthetic_spec_from(ctx.cfg);
    Dataset ds = generate_synthetic(spec);

    Manifest manifest(ctx.out_dir, "gen-data");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(spec.seed);
    manifest.set_dataset_fingerprint(ds.fingerprint());

    for (int m = 0; m < ds.num_modalities; ++m) {
        std::vector<std::string> header;
        for (int j = 0; j < ds.dims[m]; ++j) header.push_back("f" + std::to_string(j));
        CsvWriter csv(ctx.out_dir + "/modality_" + std::to_string(m) + ".csv", header);
        for (const auto& s : ds.samples) {
            std::vector<std::string> cells;
            for (double v : s.features[m]) cells.push_back(format_number(v));
            csv.row(cells);
        }
        manifest.add_artifact(csv.finish());
    }
    CsvWriter labels(ctx.out_dir + "/labels.csv", {"label"});
    for (const auto& s : ds.samples) labels.row({std::to_string(s.label)});
    manifest.add_artifact(labels.finish());
    manifest.write();
    std::cout << "wrote dataset (" << ds.size() << " samples, " << ds.num_modalities << " modalities) to "
              << ctx.out_dir << "\n";
    return 0;
}

// --- train -------------------------------------------------------------------

namespace {

void write_history(const std::string& path, const TrainHistory& history, Manifest& manifest) {
    CsvWriter csv(path, {"epoch", "loss", "task_loss", "gain", "sparsity", "val_accuracy"});
    for (const auto& e : history.epochs) {
        csv.row({std::to_string(e.epoch), format_number(e.loss), format_number(e.task_loss), format_number(e.gain),
                 format_number(e.sparsity), format_number(e.val_accuracy)});
    }
    manifest.add_artifact(csv.finish());
}

void append_metric_rows(CsvWriter& csv, const std::vector<std::string>& prefix, const EvalResult& eval) {
    auto put = [&](const std::string& name, double v) {
        std::vector<std::string> cells = prefix;
        cells.push_back(name);
        cells.push_back(format_number(v));
        csv.row(cells);
    };
    put("accuracy", eval.metrics.accuracy);
    put("weighted_f1", eval.metrics.weighted_f1);
    put("macro_f1", eval.metrics.macro_f1);
    if (eval.metrics.has_binary) {
        put("f1", eval.metrics.binary_f1);
        put("auc", eval.metrics.auc);
    }
    for (std::size_t m = 0; m < eval.mean_depth.size(); ++m)
        put("mean_depth_m" + std::to_string(m), eval.mean_depth[m]);
    put("flops_per_sample", eval.mean_flops);
}

const Dataset& pick_split(const PreparedData& prep, const std::string& name) {
    if (name == "train") return prep.splits.train;
    if (name == "val") return prep.splits.val;
    if (name == "test") return prep.splits.test;
    throw UsageError("eval.split must be train, val or test, got '" + name + "'");
}

}  // namespace

int cmd_train(const CommandContext& ctx) {
    ensure_dir(ctx.out_dir);
    PreparedData prep = prepare_data(ctx.cfg);
    TrainConfig tc = train_config_from(ctx.cfg);

    TrainResult res = train_model(prep.splits.train, prep.splits.val, tc);
    if (res.history.diverged) throw NumericError("train: loss diverged; best checkpoint retained");

    Manifest manifest(ctx.out_dir, "train");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(tc.seed);
    manifest.set_dataset_fingerprint(prep.fingerprint);

    std::string model_path = ctx.out_dir + "/model.bin";
    res.model.save(model_path);
    manifest.add_artifact(model_path);

    write_history(ctx.out_dir + "/history.csv", res.history, manifest);

    CsvWriter proto(ctx.out_dir + "/prototype_history.csv", {"epoch", "objective"});
    for (std::size_t e = 0; e < res.history.proto_objective.size(); ++e)
        proto.row({std::to_string(e), format_number(res.history.proto_objective[e])});
    manifest.add_artifact(proto.finish());

    double sigma = ctx.cfg.get_double("noise.sigma", 0.0);
    bool test_stage = ctx.cfg.get_string("noise.stage", "test") == "test";
    Dataset test = test_stage ? corrupted_copy(prep.splits.test, ctx.cfg, sigma) : prep.splits.test;
    EvalResult eval = evaluate(res.model, test);
    CsvWriter metrics(ctx.out_dir + "/metrics.csv", {"split", "metric", "value"});
    append_metric_rows(metrics, {"test"}, eval);
    manifest.add_artifact(metrics.finish());

    manifest.write();
    std::cout << "trained " << variant_tag(tc.variant) << ": best val acc "
              << format_fixed(res.history.best_val_accuracy, 4) << ", test acc "
              << format_fixed(eval.metrics.accuracy, 4) << "\n";
    return 0;
}

int cmd_evaluate(const CommandContext& ctx, const std::string& model_path) {
    ensure_dir(ctx.out_dir);
    std::string path = model_path.empty() ? ctx.out_dir + "/model.bin" : model_path;
    Model model = Model::load(path);
    PreparedData prep = prepare_data(ctx.cfg);

    double sigma = ctx.cfg.get_double("noise.sigma", 0.0);
    bool test_stage = ctx.cfg.get_string("noise.stage", "test") == "test";
    std::string split_name = ctx.cfg.get_string("eval.split", "test");
    Dataset data = pick_split(prep, split_name);
    if (test_stage) data = corrupted_copy(data, ctx.cfg, sigma);

    EvalResult eval = evaluate(model, data);

    Manifest manifest(ctx.out_dir, "evaluate");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(ctx.cfg.get_u64("seed", 7));
    manifest.set_dataset_fingerprint(prep.fingerprint);
    CsvWriter metrics(ctx.out_dir + "/metrics.csv", {"split", "metric", "value"});
    append_metric_rows(metrics, {split_name}, eval);
    manifest.add_artifact(metrics.finish());
    manifest.write();
    std::cout << "accuracy " << format_fixed(eval.metrics.accuracy, 4) << " on " << split_name << "\n";
    return 0;
}

// --- sweep-noise ----------------------------------------------------------------

int cmd_sweep_noise(const CommandContext& ctx, std::vector<double> sigmas, std::vector<std::string> variants) {
    ensure_dir(ctx.out_dir);
    if (sigmas.empty()) sigmas = ctx.cfg.get_double_list("noise.sigmas", {0.0});
    if (variants.empty()) variants = ctx.cfg.get_string_list("sweep.variants", {"full"});
    for (const auto& v : variants) variant_from_tag(v);  // validate early

    PreparedData prep = prepare_data(ctx.cfg);
    bool train_stage_noise = ctx.cfg.get_string("noise.stage", "test") == "train";

    struct Cell {
        double sigma = 0;
        std::string variant;
        EvalResult eval;
        bool ok = false;
        std::string error;
    };

    std::vector<Cell> cells;
    for (const auto& v : variants)
        for (double s : sigmas) cells.push_back({s, v, {}, false, ""});

    if (!train_stage_noise) {
        // Test-stage corruption: one training per variant, evaluated per sigma.
        std::vector<TrainResult> trained(variants.size());
        std::vector<std::string> errors(variants.size());
        std::vector<std::function<void()>> jobs;
        for (std::size_t i = 0; i < variants.size(); ++i) {
            jobs.push_back([&, i]() {
                try {
                    TrainConfig tc = train_config_from(ctx.cfg);
                    tc.variant = variant_from_tag(variants[i]);
                    trained[i] = train_model(prep.splits.train, prep.splits.val, tc);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            });
        }
        run_parallel(jobs);
        for (std::size_t i = 0; i < variants.size(); ++i) {
            for (std::size_t k = 0; k < sigmas.size(); ++k) {
                Cell& cell = cells[i * sigmas.size() + k];
                if (!errors[i].empty()) {
                    cell.error = errors[i];
                    continue;
                }
                try {
                    Dataset test = corrupted_copy(prep.splits.test, ctx.cfg, sigmas[k]);
                    cell.eval = evaluate(trained[i].model, test);
                    cell.ok = true;
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
            }
        }
    } else {
        // Train-stage noise: every (sigma, variant) cell trains separately.
        std::vector<std::function<void()>> jobs;
        for (auto& cell : cells) {
            jobs.push_back([&ctx, &cell]() {
                try {
                    Config cell_cfg = ctx.cfg;
                    cell_cfg.set("noise.sigma", format_number(cell.sigma));
                    cell_cfg.set("noise.stage", "train");
                    PreparedData cell_prep = prepare_data(cell_cfg);
                    TrainConfig tc = train_config_from(cell_cfg);
                    tc.variant = variant_from_tag(cell.variant);
                    TrainResult res = train_model(cell_prep.splits.train, cell_prep.splits.val, tc);
                    cell.eval = evaluate(res.model, cell_prep.splits.test);
                    cell.ok = true;
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
            });
        }
        run_parallel(jobs);
    }

    Manifest manifest(ctx.out_dir, "sweep-noise");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(ctx.cfg.get_u64("seed", 7));
    manifest.set_dataset_fingerprint(prep.fingerprint);

    CsvWriter csv(ctx.out_dir + "/sweep.csv", {"sigma", "variant", "metric", "value"});
    for (const auto& cell : cells) {
        if (!cell.ok) {
            csv.row({format_number(cell.sigma), cell.variant, "failed", "1"});
            continue;
        }
        std::vector<std::string> prefix = {format_number(cell.sigma), cell.variant};
        auto put = [&](const std::string& name, double v) {
            csv.row({prefix[0], prefix[1], name, format_number(v)});
        };
        put("accuracy", cell.eval.metrics.accuracy);
        put("weighted_f1", cell.eval.metrics.weighted_f1);
        put("macro_f1", cell.eval.metrics.macro_f1);
        if (cell.eval.metrics.has_binary) {
            put("f1", cell.eval.metrics.binary_f1);
            put("auc", cell.eval.metrics.auc);
        }
        for (std::size_t m = 0; m < cell.eval.mean_depth.size(); ++m)
            put("mean_depth_m" + std::to_string(m), cell.eval.mean_depth[m]);
        put("flops_per_sample", cell.eval.mean_flops);
    }
    manifest.add_artifact(csv.finish());

    std::vector<Series> series;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        Series s;
        s.name = variants[i];
        for (std::size_t k = 0; k < sigmas.size(); ++k) {
            const Cell& cell = cells[i * sigmas.size() + k];
            if (cell.ok) {
                s.x.push_back(cell.sigma);
                s.y.push_back(cell.eval.metrics.accuracy);
            }
        }
        series.push_back(std::move(s));
    }
    std::string svg_path = ctx.out_dir + "/sweep_accuracy.svg";
    write_line_plot(svg_path, "accuracy vs noise intensity", "sigma", "accuracy", series);
    manifest.add_artifact(svg_path);
    manifest.write();

    for (const auto& cell : cells) {
        std::cout << "sigma=" << format_number(cell.sigma) << " variant=" << cell.variant << " ";
        if (cell.ok)
            std::cout << "acc=" << format_fixed(cell.eval.metrics.accuracy, 4) << "\n";
        else
            std::cout << "FAILED: " << cell.error << "\n";
    }
    return 0;
}

// --- ablate -------------------------------------------------------------------

int cmd_ablate(const CommandContext& ctx, std::vector<std::string> variants) {
    ensure_dir(ctx.out_dir);
    if (variants.empty()) variants = ctx.cfg.get_string_list("sweep.variants", {"full", "wo-gcnd", "wo-lgp"});
    for (const auto& v : variants) variant_from_tag(v);

    PreparedData prep = prepare_data(ctx.cfg);
    double sigma = ctx.cfg.get_double("noise.sigma", 0.0);
    bool test_stage = ctx.cfg.get_string("noise.stage", "test") == "test";
    Dataset test = test_stage ? corrupted_copy(prep.splits.test, ctx.cfg, sigma) : prep.splits.test;

    std::vector<EvalResult> evals(variants.size());
    std::vector<std::string> errors(variants.size());
    std::vector<std::function<void()>> jobs;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        jobs.push_back([&, i]() {
            try {
                TrainResult res = ablate(variants[i], prep.splits.train, prep.splits.val, train_config_from(ctx.cfg));
                evals[i] = evaluate(res.model, test);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });
    }
    run_parallel(jobs);

    Manifest manifest(ctx.out_dir, "ablate");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(ctx.cfg.get_u64("seed", 7));
    manifest.set_dataset_fingerprint(prep.fingerprint);
    CsvWriter csv(ctx.out_dir + "/ablate.csv", {"variant", "metric", "value"});
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (!errors[i].empty()) {
            csv.row({variants[i], "failed", "1"});
            continue;
        }
        auto put = [&](const std::string& name, double v) { csv.row({variants[i], name, format_number(v)}); };
        put("accuracy", evals[i].metrics.accuracy);
        put("weighted_f1", evals[i].metrics.weighted_f1);
        put("macro_f1", evals[i].metrics.macro_f1);
        for (std::size_t m = 0; m < evals[i].mean_depth.size(); ++m)
            put("mean_depth_m" + std::to_string(m), evals[i].mean_depth[m]);
        put("flops_per_sample", evals[i].mean_flops);
        std::cout << variants[i] << " acc=" << format_fixed(evals[i].metrics.accuracy, 4) << "\n";
    }
    manifest.add_artifact(csv.finish());
    manifest.write();
    return 0;
}

// --- probe-confidence ----------------------------------------------------------

int cmd_probe_confidence(const CommandContext& ctx, double sigma_train) {
    ensure_dir(ctx.out_dir);
    PreparedData prep = prepare_data(ctx.cfg);
    const Dataset& clean_train = prep.splits.train;
    const Dataset& test = prep.splits.test;

    // Both arms must score the identical test set, so the normalizer stays
    // fitted on the clean training data and the noisy arm corrupts the
    // normalized training copy.
    Dataset noisy_train = corrupted_copy(clean_train, ctx.cfg, sigma_train);

    TrainConfig tc = train_config_from(ctx.cfg);

    auto quality_confidences = [&](const Dataset& train_arm) {
        Config arm_cfg = ctx.cfg;
        Model qm = build_quality_model(train_arm, arm_cfg);
        std::vector<double> conf;
        conf.reserve(static_cast<std::size_t>(test.size()) * test.num_modalities);
        for (const auto& s : test.samples) {
            for (int m = 0; m < test.num_modalities; ++m) {
                auto probs = modality_probs(quality_input(qm, m, s.features[m]), qm.bank, m);
                conf.push_back(*std::max_element(probs.begin(), probs.end()));
            }
        }
        return conf;
    };

    auto classifier_confidences = [&](const Dataset& train_arm) {
        int cls_epochs = ctx.cfg.get_int("probe.cls_epochs", 100);
        double cls_lr = ctx.cfg.get_double("probe.cls_lr", 0.05);
        std::vector<double> conf;
        conf.reserve(static_cast<std::size_t>(test.size()) * test.num_modalities);
        std::vector<ModalityClassifier> clfs;
        for (int m = 0; m < test.num_modalities; ++m)
            clfs.push_back(train_modality_classifier(train_arm, m, cls_epochs, cls_lr, tc.seed));
        for (const auto& s : test.samples) {
            for (int m = 0; m < test.num_modalities; ++m) {
                auto probs = clfs[m].probs(s.features[m]);
                conf.push_back(*std::max_element(probs.begin(), probs.end()));
            }
        }
        return conf;
    };

    struct Arm {
        std::string method;
        std::vector<double> clean_trained;
        std::vector<double> noise_trained;
    };
    std::vector<Arm> arms(2);
    arms[0].method = "prototype-quality";
    arms[0].clean_trained = quality_confidences(clean_train);
    arms[0].noise_trained = quality_confidences(noisy_train);
    arms[1].method = "classifier-mcp";
    arms[1].clean_trained = classifier_confidences(clean_train);
    arms[1].noise_trained = classifier_confidences(noisy_train);

    Manifest manifest(ctx.out_dir, "probe-confidence");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(tc.seed);
    manifest.set_dataset_fingerprint(prep.fingerprint);

    CsvWriter csv(ctx.out_dir + "/confidence_shift.csv",
                  {"method", "sigma_train", "mean_confidence_clean_trained", "mean_confidence_noise_trained",
                   "mean_abs_shift"});
    for (const auto& arm : arms) {
        double mean_clean = 0, mean_noise = 0, shift = 0;
        for (std::size_t i = 0; i < arm.clean_trained.size(); ++i) {
            mean_clean += arm.clean_trained[i];
            mean_noise += arm.noise_trained[i];
            shift += std::fabs(arm.clean_trained[i] - arm.noise_trained[i]);
        }
        double n = static_cast<double>(arm.clean_trained.size());
        csv.row({arm.method, format_number(sigma_train), format_fixed(mean_clean / n, 3),
                 format_fixed(mean_noise / n, 3), format_number(shift / n)});
        std::cout << arm.method << ": mean shift " << format_number(shift / n) << "\n";
    }
    manifest.add_artifact(csv.finish());

    // confidence histograms, 20 bins over [0,1]
    for (const auto& arm : arms) {
        auto histogram = [](const std::vector<double>& values) {
            HistogramSeries h;
            std::vector<double> counts(20, 0.0);
            for (double v : values) {
                int b = std::min(19, std::max(0, static_cast<int>(v * 20.0)));
                counts[b] += 1.0;
            }
            for (int b = 0; b < 20; ++b) h.bin_centers.push_back((b + 0.5) / 20.0);
            h.counts = counts;
            return h;
        };
        HistogramSeries clean_h = histogram(arm.clean_trained);
        clean_h.name = "clean-trained";
        HistogramSeries noise_h = histogram(arm.noise_trained);
        noise_h.name = "noise-trained";
        std::string path = ctx.out_dir + "/confidence_" + arm.method + ".svg";
        write_histogram(path, "test confidence: " + arm.method, "confidence", {clean_h, noise_h});
        manifest.add_artifact(path);
    }
    manifest.write();
    return 0;
}

// --- probe-prototypes ------------------------------------------------------------

int cmd_probe_prototypes(const CommandContext& ctx, double sigma) {
    ensure_dir(ctx.out_dir);
    if (ctx.cfg.get_string("data.kind", "synthetic") != "synthetic")
        throw UsageError("probe-prototypes needs synthetic data with known clean class means");
    if (!(sigma > 0)) throw UsageError("probe-prototypes needs --sigma > 0");

    DatasetSpec spec = synthetic_spec_from(ctx.cfg);
    Dataset clean = generate_synthetic(spec);

    // noise every sample of every modality; the probe tracks the prototypes'
    // density under exactly this noise distribution
    NoiseSpec ns;
    ns.sigma = sigma;
    ns.fraction = 1.0;
    ns.modalities.resize(clean.num_modalities);
    std::iota(ns.modalities.begin(), ns.modalities.end(), 0);
    ns.seed = ctx.cfg.get_u64("noise.seed", ctx.cfg.get_u64("seed", 7));
    Dataset noisy = inject_noise(clean, ns);

    // clean per-class means in raw feature space
    std::vector<std::vector<std::vector<double>>> clean_means(
        clean.num_classes, std::vector<std::vector<double>>(clean.num_modalities));
    {
        std::vector<int> counts(clean.num_classes, 0);
        for (int c = 0; c < clean.num_classes; ++c)
            for (int m = 0; m < clean.num_modalities; ++m) clean_means[c][m].assign(clean.dims[m], 0.0);
        for (const auto& s : clean.samples) {
            counts[s.label]++;
            for (int m = 0; m < clean.num_modalities; ++m)
                for (int j = 0; j < clean.dims[m]; ++j) clean_means[s.label][m][j] += s.features[m][j];
        }
        for (int c = 0; c < clean.num_classes; ++c)
            for (int m = 0; m < clean.num_modalities; ++m)
                for (auto& v : clean_means[c][m]) v /= counts[c];
    }

    // linear encoders by default so prototypes stay in the raw feature space
    // the clean means live in
    EncoderSet encoders = EncoderSet::identity_init(clean.dims, ctx.cfg.get_bool("proto.linear_encoders", true));
    PrototypeBank bank = init_prototypes(noisy, encoders);

    auto mean_probe = [&](const PrototypeBank& b) {
        auto scores = noise_probe(b, clean_means, sigma);
        double acc = 0;
        int n = 0;
        for (const auto& row : scores)
            for (double v : row) {
                acc += v;
                ++n;
            }
        return acc / n;
    };

    std::vector<double> trajectory;
    {
        PrototypeBank pre = bank;
        pre.stage = BankStage::Optimized;
        trajectory.push_back(mean_probe(pre));  // epoch 0 = pre-optimization
    }

    PrototypeOptOptions popts;
    popts.epochs = ctx.cfg.get_int("proto.epochs", 200);
    popts.lr = ctx.cfg.get_double("proto.lr", 0.25);
    popts.lr_decay_every = ctx.cfg.get_int("proto.lr_decay_every", 25);
    popts.lr_decay = ctx.cfg.get_double("proto.lr_decay", 0.5);
    popts.early_stop_tol = ctx.cfg.get_double("proto.early_stop_tol", 1e-7);
    popts.seed = ctx.cfg.get_u64("seed", 7);
    optimize_prototypes(bank, encoders, noisy, popts,
                        [&](int, const PrototypeBank& b) { trajectory.push_back(mean_probe(b)); });

    Manifest manifest(ctx.out_dir, "probe-prototypes");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(popts.seed);
    manifest.set_dataset_fingerprint(noisy.fingerprint());

    CsvWriter csv(ctx.out_dir + "/prototype_probe.csv", {"epoch", "mean_score"});
    for (std::size_t e = 0; e < trajectory.size(); ++e) csv.row({std::to_string(e), format_number(trajectory[e])});
    manifest.add_artifact(csv.finish());

    std::string bank_path = ctx.out_dir + "/prototypes.txt";
    bank.save(bank_path);
    manifest.add_artifact(bank_path);

    Series s;
    s.name = "mean score";
    for (std::size_t e = 0; e < trajectory.size(); ++e) {
        s.x.push_back(static_cast<double>(e));
        s.y.push_back(trajectory[e]);
    }
    std::string svg = ctx.out_dir + "/prototype_probe.svg";
    write_line_plot(svg, "prototype density under the noise distribution", "epoch", "mean score", {s});
    manifest.add_artifact(svg);
    manifest.write();

    std::cout << "probe: initial " << format_number(trajectory.front()) << ", final "
              << format_number(trajectory.back()) << " over " << trajectory.size() - 1 << " epochs\n";
    return 0;
}

// --- diagnose-depth ----------------------------------------------------------------

int cmd_diagnose_depth(const CommandContext& ctx, const std::string& model_path, std::vector<double> sigmas) {
    ensure_dir(ctx.out_dir);
    if (sigmas.empty()) sigmas = ctx.cfg.get_double_list("noise.sigmas", {0.0, 1.0, 3.0, 5.0});

    PreparedData prep = prepare_data(ctx.cfg);
    Model model =
        model_path.empty() ? build_quality_model(prep.splits.train, ctx.cfg) : Model::load(model_path);

    Manifest manifest(ctx.out_dir, "diagnose-depth");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(ctx.cfg.get_u64("seed", 7));
    manifest.set_dataset_fingerprint(prep.fingerprint);

    CsvWriter means(ctx.out_dir + "/depth_mean.csv", {"sigma", "modality", "mean_depth"});
    CsvWriter hist(ctx.out_dir + "/depth_hist.csv", {"sigma", "modality", "depth", "count"});
    std::vector<Series> series(prep.splits.test.num_modalities);

    for (double sigma : sigmas) {
        Dataset noised = corrupted_copy(prep.splits.test, ctx.cfg, sigma);
        int M = noised.num_modalities;
        std::vector<double> mean_depth(M, 0.0);
        std::vector<std::vector<long>> counts(M, std::vector<long>(model.config.max_depth + 1, 0));
        for (const auto& s : noised.samples) {
            auto plan = model.plan_for(s, LabelMode::Predicted);
            for (int m = 0; m < M; ++m) {
                mean_depth[m] += plan.plan.depths[m];
                counts[m][plan.plan.depths[m]]++;
            }
        }
        for (int m = 0; m < M; ++m) {
            mean_depth[m] /= noised.size();
            means.row({format_number(sigma), std::to_string(m), format_number(mean_depth[m])});
            for (int d = 1; d <= model.config.max_depth; ++d)
                hist.row({format_number(sigma), std::to_string(m), std::to_string(d), std::to_string(counts[m][d])});
            series[m].name = "modality " + std::to_string(m);
            series[m].x.push_back(sigma);
            series[m].y.push_back(mean_depth[m]);
        }
    }
    manifest.add_artifact(means.finish());
    manifest.add_artifact(hist.finish());
    std::string svg = ctx.out_dir + "/depth_mean.svg";
    write_line_plot(svg, "assigned depth vs noise intensity", "sigma", "mean depth", series);
    manifest.add_artifact(svg);
    manifest.write();
    std::cout << "depth diagnosis over " << sigmas.size() << " noise levels written to " << ctx.out_dir << "\n";
    return 0;
}

// --- flops ------------------------------------------------------------------------

int cmd_flops(const CommandContext& ctx, const std::string& model_path) {
    ensure_dir(ctx.out_dir);
    if (model_path.empty()) throw UsageError("flops needs --model pointing at a trained checkpoint");
    Model model = Model::load(model_path);
    PreparedData prep = prepare_data(ctx.cfg);

    double sigma = ctx.cfg.get_double("noise.sigma", 0.0);
    Dataset data = pick_split(prep, ctx.cfg.get_string("eval.split", "test"));
    if (ctx.cfg.get_string("noise.stage", "test") == "test") data = corrupted_copy(data, ctx.cfg, sigma);

    EvalResult eval = evaluate(model, data);

    Manifest manifest(ctx.out_dir, "flops");
    manifest.set_config(ctx.cfg.canonical());
    manifest.set_seed(ctx.cfg.get_u64("seed", 7));
    manifest.set_dataset_fingerprint(prep.fingerprint);
    CsvWriter csv(ctx.out_dir + "/flops.csv", {"metric", "value"});
    csv.row({"flops_per_sample", format_number(eval.mean_flops)});
    csv.row({"parameter_count", std::to_string(model.parameter_count())});
    for (std::size_t m = 0; m < eval.mean_depth.size(); ++m)
        csv.row({"mean_depth_m" + std::to_string(m), format_number(eval.mean_depth[m])});
    csv.row({"accuracy", format_number(eval.metrics.accuracy)});
    manifest.add_artifact(csv.finish());
    manifest.write();
    std::cout << "flops/sample " << format_number(eval.mean_flops) << ", params " << model.parameter_count() << "\n";
    return 0;
}

}  // namespace quad::harness
