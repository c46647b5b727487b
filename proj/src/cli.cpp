#include "usseg/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "usseg/checkpoint.hpp"
#include "usseg/crf.hpp"
#include "usseg/crossval.hpp"
#include "usseg/errors.hpp"
#include "usseg/metrics.hpp"
#include "usseg/phantom.hpp"
#include "usseg/predict.hpp"
#include "usseg/preprocess.hpp"
#include "usseg/prob_map.hpp"
#include "usseg/threading.hpp"
#include "usseg/trainer.hpp"
#include "usseg/ussim.hpp"
#include "usseg/volume_io.hpp"

namespace usseg {

namespace {

namespace fs = std::filesystem;

struct ThreadFlags {
    int threads = 0;
    bool deterministic = false;

    void apply() const {
        if (deterministic) {
            set_thread_count(1);
        } else if (threads > 0) {
            set_thread_count(threads);
        } else {
            unsigned hw = std::thread::hardware_concurrency();
            set_thread_count(hw == 0 ? 1 : static_cast<int>(hw));
        }
    }
};

void add_thread_flags(CLI::App* cmd, ThreadFlags& tf) {
    cmd->add_option("--threads", tf.threads, "Worker thread count (default: hardware)");
    cmd->add_flag("--deterministic", tf.deterministic, "Single-threaded bit-reproducible mode");
}

std::array<int, 3> parse_dims(const std::vector<int>& dims) {
    if (dims.size() == 1) return {dims[0], dims[0], dims[0]};
    if (dims.size() == 3) return {dims[0], dims[1], dims[2]};
    throw ConfigError("--dims takes one value or three comma-separated values");
}

std::string strip_suffix(std::string s, const std::string& suffix) {
    if (s.size() > suffix.size() && s.ends_with(suffix)) s.resize(s.size() - suffix.size());
    return s;
}

// config file + flag overrides; flags win
struct TrainFlags {
    std::string config_path, data_dir, out_dir, init_stem;
    uint64_t seed = 0;
    bool seed_set = false;
    int64_t iterations = -1;
    int batch_size = -1;
    std::string activation;
    double synthetic_fraction = -1.0;

    RunConfig resolve() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed_set) cfg.seed = seed;
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (iterations >= 0) cfg.iterations = iterations;
        if (batch_size > 0) cfg.batch_size = batch_size;
        if (!activation.empty()) cfg.activation = activation_from_string(activation);
        if (synthetic_fraction > 0) cfg.synthetic_fraction = synthetic_fraction;
        cfg.validate();
        return cfg;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& tf) {
    cmd->add_option("--config", tf.config_path, "JSON run config");
    cmd->add_option("--data-dir", tf.data_dir, "Directory of <id>_vol/<id>_labels cases");
    cmd->add_option("--out-dir", tf.out_dir, "Output directory");
    cmd->add_option("--seed", tf.seed, "Random seed")->each([&tf](const std::string&) { tf.seed_set = true; });
    cmd->add_option("--iterations", tf.iterations, "Training iterations");
    cmd->add_option("--batch-size", tf.batch_size, "Mini-batch size");
    cmd->add_option("--activation", tf.activation, "relu or prelu");
    cmd->add_option("--synthetic-fraction", tf.synthetic_fraction,
                    "Fraction of pretraining volumes to keep (whole-volume subset)");
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"3D grey/white matter segmentation pipeline"};
    app.require_subcommand(1);

    // ---- convert ----
    auto* c_convert = app.add_subcommand("convert", "Convert between nrrd and raw+json formats");
    std::string cv_in, cv_out;
    bool cv_labels = false;
    c_convert->add_option("--in", cv_in, "Input file")->required();
    c_convert->add_option("--out", cv_out, "Output file")->required();
    c_convert->add_flag("--labels", cv_labels, "Treat the file as a labelmap (u8)");
    c_convert->callback([&] {
        if (cv_labels) {
            write_labelmap(read_labelmap(cv_in), cv_out);
        } else {
            write_volume(read_volume(cv_in), cv_out);
        }
    });

    // ---- preprocess ----
    auto* c_pre = app.add_subcommand("preprocess", "Resample to isotropic, mask, standardize");
    std::string pp_in, pp_labels, pp_out_dir, pp_id;
    double pp_target = 0.4;
    c_pre->add_option("--in", pp_in, "Input volume")->required();
    c_pre->add_option("--labels", pp_labels, "Co-registered labelmap");
    c_pre->add_option("--out-dir", pp_out_dir, "Output directory")->required();
    c_pre->add_option("--target", pp_target, "Isotropic voxel size in mm (default 0.4)");
    c_pre->add_option("--id", pp_id, "Case id (default: input stem)");
    c_pre->callback([&] {
        fs::create_directories(pp_out_dir);
        std::string id = pp_id.empty()
                             ? strip_suffix(fs::path(pp_in).stem().string(), "_vol")
                             : pp_id;
        Volume resampled = resample_isotropic(read_volume(pp_in), pp_target, Interp::trilinear);
        Mask mask = compute_mask(resampled);
        Volume std_vol = standardize(resampled, mask);
        write_volume(resampled, (fs::path(pp_out_dir) / (id + "_vol.nrrd")).string());
        write_volume(std_vol, (fs::path(pp_out_dir) / (id + "_std.nrrd")).string());
        LabelMap mask_lm;
        mask_lm.dims = mask.dims;
        mask_lm.spacing = resampled.spacing;
        mask_lm.origin = resampled.origin;
        mask_lm.labels = mask.bits;
        write_labelmap(mask_lm, (fs::path(pp_out_dir) / (id + "_mask.nrrd")).string());
        if (!pp_labels.empty()) {
            LabelMap lm = resample_isotropic(read_labelmap(pp_labels), pp_target);
            if (!same_grid(lm.dims, resampled.dims))
                throw ValidationError("preprocess: resampled labelmap and volume dims differ");
            write_labelmap(lm, (fs::path(pp_out_dir) / (id + "_labels.nrrd")).string());
        }
    });

    // ---- phantom ----
    auto* c_ph = app.add_subcommand("phantom", "Generate a brain-like labelmap phantom");
    std::vector<int> ph_dims{96};
    uint64_t ph_seed = 1;
    std::string ph_out;
    std::vector<double> ph_fracs{0.23, 0.30, 0.47};
    c_ph->add_option("--dims", ph_dims, "Cube side, or three comma-separated dims")->delimiter(',');
    c_ph->add_option("--seed", ph_seed, "Random seed");
    c_ph->add_option("--out", ph_out, "Output labelmap path")->required();
    c_ph->add_option("--fractions", ph_fracs, "Target BG,GM,WM fractions")->delimiter(',')->expected(3);
    c_ph->callback([&] {
        Rng rng(ph_seed);
        LabelMap lm = make_phantom(rng, parse_dims(ph_dims), {ph_fracs[0], ph_fracs[1], ph_fracs[2]});
        write_labelmap(lm, ph_out);
    });

    // ---- simulate ----
    auto* c_sim = app.add_subcommand("simulate", "Synthesize sweeps from labelmaps");
    std::vector<std::string> sm_labels;
    int sm_per_case = 5;
    uint64_t sm_seed = 1;
    std::string sm_out_dir;
    std::vector<double> sm_imp, sm_att, sm_rho, sm_amp, sm_psf;
    ThreadFlags sm_tf;
    c_sim->add_option("--labels", sm_labels, "Labelmap file(s)")->required();
    c_sim->add_option("--per-case", sm_per_case, "Sweeps per labelmap (default 5)");
    c_sim->add_option("--seed", sm_seed, "Random seed");
    c_sim->add_option("--out-dir", sm_out_dir, "Output directory")->required();
    c_sim->add_option("--impedance", sm_imp, "BG,GM,WM impedance override")->delimiter(',')->expected(3);
    c_sim->add_option("--attenuation", sm_att, "BG,GM,WM attenuation override")->delimiter(',')->expected(3);
    c_sim->add_option("--scatter-density", sm_rho, "BG,GM,WM scatterer density")->delimiter(',')->expected(3);
    c_sim->add_option("--scatter-amp", sm_amp, "BG,GM,WM scatterer amplitude")->delimiter(',')->expected(3);
    c_sim->add_option("--psf", sm_psf, "PSF sigmas: axial,lateral,elevational")->delimiter(',')->expected(3);
    add_thread_flags(c_sim, sm_tf);
    c_sim->callback([&] {
        sm_tf.apply();
        fs::create_directories(sm_out_dir);
        TissueAcoustics ac;
        if (!sm_imp.empty()) ac.impedance = {sm_imp[0], sm_imp[1], sm_imp[2]};
        if (!sm_att.empty()) ac.attenuation = {sm_att[0], sm_att[1], sm_att[2]};
        if (!sm_rho.empty()) ac.scatter_density = {sm_rho[0], sm_rho[1], sm_rho[2]};
        if (!sm_amp.empty()) ac.scatter_amp = {sm_amp[0], sm_amp[1], sm_amp[2]};
        SweepPsf psf;
        if (!sm_psf.empty()) {
            psf.axial = sm_psf[0];
            psf.lateral = sm_psf[1];
            psf.elevational = sm_psf[2];
        }
        std::vector<LabelMap> lms;
        std::vector<std::string> ids;
        for (const auto& p : sm_labels) {
            lms.push_back(read_labelmap(p));
            ids.push_back(strip_suffix(fs::path(p).stem().string(), "_labels"));
        }
        Rng rng(sm_seed);
        auto pairs = generate_pretrain_set(lms, sm_per_case, rng, ac, psf);
        for (size_t i = 0; i < pairs.size(); ++i) {
            const std::string& id = ids[i / sm_per_case];
            int sweep = static_cast<int>(i % sm_per_case);
            std::string stem = id + "_s" + std::to_string(sweep);
            write_volume(pairs[i].first, (fs::path(sm_out_dir) / (stem + "_vol.nrrd")).string());
            write_labelmap(pairs[i].second, (fs::path(sm_out_dir) / (stem + "_labels.nrrd")).string());
        }
    });

    // ---- train ----
    auto* c_train = app.add_subcommand("train", "Train a network on a case directory");
    TrainFlags tr;
    ThreadFlags tr_tf;
    add_train_flags(c_train, tr);
    c_train->add_option("--init", tr.init_stem, "Checkpoint stem to fine-tune from");
    add_thread_flags(c_train, tr_tf);
    c_train->callback([&] {
        tr_tf.apply();
        RunConfig cfg = tr.resolve();
        if (cfg.data_dir.empty()) throw ConfigError("train: data_dir is required");
        if (cfg.out_dir.empty()) throw ConfigError("train: out_dir is required");
        std::vector<TrainCase> cases = load_dataset(cfg.data_dir);
        if (cfg.synthetic_fraction < 1.0) {
            std::vector<TrainCase> subset;
            for (size_t i : synthetic_subset(cases.size(), cfg.synthetic_fraction, cfg.seed))
                subset.push_back(cases[i]);
            std::swap(cases, subset);
        }
        Network init_net;
        const Network* init = nullptr;
        if (!tr.init_stem.empty()) {
            Checkpoint ck = load_checkpoint(tr.init_stem);
            require_activation(ck, cfg.activation);
            init_net = std::move(ck.net);
            init = &init_net;
        }
        fs::create_directories(cfg.out_dir);
        TrainOutput out = train(cfg, cases, init, cfg.out_dir);
        write_loss_log(out.log, (fs::path(cfg.out_dir) / "loss_log.csv").string());
    });

    // ---- infer ----
    auto* c_inf = app.add_subcommand("infer", "Predict a probability map and labelmap for a volume");
    std::string in_ckpt, in_vol, in_mask, in_out_prob, in_out_labels;
    int in_block_batch = 24;
    ThreadFlags in_tf;
    c_inf->add_option("--checkpoint", in_ckpt, "Checkpoint stem")->required();
    c_inf->add_option("--in", in_vol, "Input volume (raw intensities)")->required();
    c_inf->add_option("--mask", in_mask, "Mask file (default: intensity > 0)");
    c_inf->add_option("--out-prob", in_out_prob, "Output probability map (.json/.raw stem)");
    c_inf->add_option("--out-labels", in_out_labels, "Output labelmap");
    c_inf->add_option("--block-batch", in_block_batch, "Tiling centers per forward pass");
    add_thread_flags(c_inf, in_tf);
    c_inf->callback([&] {
        in_tf.apply();
        if (in_out_prob.empty() && in_out_labels.empty())
            throw ConfigError("infer: need --out-prob and/or --out-labels");
        Checkpoint ck = load_checkpoint(in_ckpt);
        Volume raw = read_volume(in_vol);
        Mask mask;
        if (in_mask.empty()) {
            mask = compute_mask(raw);
        } else {
            LabelMap ml = read_labelmap(in_mask);
            if (!same_grid(ml.dims, raw.dims)) throw ValidationError("infer: mask dims mismatch");
            mask.dims = ml.dims;
            mask.bits = ml.labels;
        }
        Volume vol = standardize(raw, mask);
        PatchGeometry geo =
            PatchGeometry::for_depth(static_cast<int>(ck.net.config.pathway_widths.size()), 7);
        PredictOptions opt;
        opt.block_batch = in_block_batch;
        ProbabilityMap pm = predict_volume(ck.net, vol, mask, geo, opt);
        if (!in_out_prob.empty()) write_prob_map(pm, in_out_prob);
        if (!in_out_labels.empty()) {
            LabelMap lm = argmax_labels(pm);
            lm.spacing = raw.spacing;
            lm.origin = raw.origin;
            write_labelmap(lm, in_out_labels);
        }
    });

    // ---- crf ----
    auto* c_crf = app.add_subcommand("crf", "Mean-field CRF refinement of a probability map");
    std::string cr_prob, cr_vol, cr_out_prob, cr_out_labels;
    CrfParams cr_params;
    bool cr_exact = false, cr_no_std = false;
    ThreadFlags cr_tf;
    c_crf->add_option("--prob", cr_prob, "Input probability map")->required();
    c_crf->add_option("--vol", cr_vol, "Paired intensity volume")->required();
    c_crf->add_option("--out-prob", cr_out_prob, "Refined probability map output");
    c_crf->add_option("--out-labels", cr_out_labels, "Argmax labelmap output");
    c_crf->add_option("--w-spatial", cr_params.w_spatial, "Spatial kernel weight");
    c_crf->add_option("--theta-gamma", cr_params.theta_gamma, "Spatial kernel std (voxels)");
    c_crf->add_option("--w-bilateral", cr_params.w_bilateral, "Bilateral kernel weight");
    c_crf->add_option("--theta-alpha", cr_params.theta_alpha, "Bilateral spatial std (voxels)");
    c_crf->add_option("--theta-beta", cr_params.theta_beta, "Bilateral intensity std");
    c_crf->add_option("--iterations", cr_params.iterations, "Mean-field iterations");
    c_crf->add_flag("--exact", cr_exact, "Use the dense O(N^2) reference path");
    c_crf->add_flag("--no-standardize", cr_no_std, "Volume is already standardized");
    add_thread_flags(c_crf, cr_tf);
    c_crf->callback([&] {
        cr_tf.apply();
        if (cr_out_prob.empty() && cr_out_labels.empty())
            throw ConfigError("crf: need --out-prob and/or --out-labels");
        cr_params.path = cr_exact ? FilterPath::exact : FilterPath::truncated;
        ProbabilityMap pm = read_prob_map(cr_prob);
        Volume raw = read_volume(cr_vol);
        Volume vol = cr_no_std ? raw : standardize(raw, compute_mask(raw));
        ProbabilityMap refined = meanfield(pm, vol, cr_params);
        if (!cr_out_prob.empty()) write_prob_map(refined, cr_out_prob);
        if (!cr_out_labels.empty()) {
            LabelMap lm = argmax_labels(refined);
            lm.spacing = raw.spacing;
            lm.origin = raw.origin;
            write_labelmap(lm, cr_out_labels);
        }
    });

    // ---- eval ----
    auto* c_eval = app.add_subcommand("eval", "Dice/sensitivity/specificity for a prediction pair");
    std::string ev_pred, ev_ref, ev_vol, ev_out;
    bool ev_no_mask = false;
    c_eval->add_option("--pred", ev_pred, "Predicted labelmap")->required();
    c_eval->add_option("--ref", ev_ref, "Reference labelmap")->required();
    c_eval->add_option("--vol", ev_vol, "Volume supplying the information mask");
    c_eval->add_flag("--no-mask", ev_no_mask, "Score every voxel");
    c_eval->add_option("--out", ev_out, "CSV output path (default stdout)");
    c_eval->callback([&] {
        LabelMap pred = read_labelmap(ev_pred);
        LabelMap ref = read_labelmap(ev_ref);
        Mask mask;
        if (ev_no_mask) {
            mask = full_mask(pred.dims);
        } else if (!ev_vol.empty()) {
            mask = compute_mask(read_volume(ev_vol));
        } else {
            throw ConfigError("eval: give --vol for the information mask or pass --no-mask");
        }
        const char* names[3] = {"bg", "gm", "wm"};
        std::string csv = "class,dice,sensitivity,specificity\n";
        char buf[96];
        for (int l = 0; l < 3; ++l) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", names[l],
                          dice(pred, ref, static_cast<uint8_t>(l), mask),
                          sensitivity(pred, ref, static_cast<uint8_t>(l), mask),
                          specificity(pred, ref, static_cast<uint8_t>(l), mask));
            csv += buf;
        }
        if (ev_out.empty()) {
            std::cout << csv;
        } else {
            std::ofstream f(ev_out);
            if (!f) throw FormatError("cannot open for writing: " + ev_out);
            f << csv;
        }
    });

    // ---- crossval ----
    auto* c_cv = app.add_subcommand("crossval", "N-fold cross-validation at patient level");
    TrainFlags cv;
    ThreadFlags cv_tf;
    int cv_folds = 5;
    bool cv_crf = false, cv_no_mask = false;
    std::string cv_csv_out, cv_pretrain;
    add_train_flags(c_cv, cv);
    c_cv->add_option("--folds", cv_folds, "Fold count (default 5)");
    c_cv->add_flag("--crf", cv_crf, "Refine predictions with the CRF");
    c_cv->add_flag("--no-mask-metrics", cv_no_mask, "Score all voxels instead of the masked region");
    c_cv->add_option("--out", cv_csv_out, "Metrics CSV path (default stdout)");
    c_cv->add_option("--pretrain", cv_pretrain, "Checkpoint stem to fine-tune from");
    add_thread_flags(c_cv, cv_tf);
    c_cv->callback([&] {
        cv_tf.apply();
        RunConfig cfg = cv.resolve();
        if (cfg.data_dir.empty()) throw ConfigError("crossval: data_dir is required");
        std::vector<TrainCase> cases = load_dataset(cfg.data_dir);
        CrossValOptions opt;
        opt.n_folds = cv_folds;
        opt.use_crf = cv_crf;
        opt.metrics_in_mask = !cv_no_mask;
        Network pre;
        if (!cv_pretrain.empty()) {
            Checkpoint ck = load_checkpoint(cv_pretrain);
            require_activation(ck, cfg.activation);
            pre = std::move(ck.net);
            opt.pretrain = &pre;
        }
        auto rows = cross_validate(cfg, cases, opt);
        if (cv_csv_out.empty()) {
            write_metrics_csv(rows, std::cout);
        } else {
            std::ofstream f(cv_csv_out);
            if (!f) throw FormatError("cannot open for writing: " + cv_csv_out);
            write_metrics_csv(rows, f);
        }
    });

    // ---- lr-plot ----
    auto* c_lr = app.add_subcommand("lr-plot", "Emit iter,lr CSV for a triangular schedule");
    CyclicLr lr_sched;
    int64_t lr_iters = 3200;
    std::string lr_out;
    c_lr->add_option("--base", lr_sched.base, "Base learning rate");
    c_lr->add_option("--max", lr_sched.max, "Maximum learning rate");
    c_lr->add_option("--step", lr_sched.step_size, "Step size in iterations");
    c_lr->add_option("--iters", lr_iters, "Iterations to emit (inclusive)");
    c_lr->add_option("--out", lr_out, "CSV output path (default stdout)");
    c_lr->callback([&] {
        lr_sched.validate();
        std::string csv = "iter,lr\n";
        char buf[64];
        for (int64_t it = 0; it <= lr_iters; ++it) {
            std::snprintf(buf, sizeof(buf), "%lld,%.10g\n", static_cast<long long>(it), lr_sched.lr(it));
            csv += buf;
        }
        if (lr_out.empty()) {
            std::cout << csv;
        } else {
            std::ofstream f(lr_out);
            if (!f) throw FormatError("cannot open for writing: " + lr_out);
            f << csv;
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace

int cli_dispatch(int argc, const char* const* argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace usseg
