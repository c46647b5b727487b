#include "usseg/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "usseg/checkpoint.hpp"
#include "usseg/cyclic_lr.hpp"
#include "usseg/errors.hpp"
#include "usseg/preprocess.hpp"
#include "usseg/volume_io.hpp"

namespace usseg {

namespace fs = std::filesystem;

TrainCase make_train_case(std::string id, const Volume& raw, LabelMap labels) {
    if (!same_grid(raw.dims, labels.dims))
        throw ValidationError("case '" + id + "': volume and labelmap dims differ");
    TrainCase c;
    c.id = std::move(id);
    c.mask = compute_mask(raw);
    c.vol = standardize(raw, c.mask);
    c.labels = std::move(labels);
    return c;
}

std::vector<TrainCase> load_dataset(const std::string& data_dir) {
    if (!fs::is_directory(data_dir)) throw ConfigError("data dir does not exist: " + data_dir);
    std::vector<std::pair<std::string, std::string>> vols; // id, path
    for (const auto& e : fs::directory_iterator(data_dir)) {
        if (!e.is_regular_file()) continue;
        std::string name = e.path().filename().string();
        std::string stem = e.path().stem().string();
        std::string ext = e.path().extension().string();
        if ((ext == ".nrrd" || ext == ".json") && stem.size() > 4 && stem.ends_with("_vol"))
            vols.emplace_back(stem.substr(0, stem.size() - 4), e.path().string());
    }
    std::sort(vols.begin(), vols.end());
    std::vector<TrainCase> cases;
    for (const auto& [id, vol_path] : vols) {
        std::string labels_path;
        for (const char* ext : {".nrrd", ".json"}) {
            std::string cand = (fs::path(data_dir) / (id + "_labels" + ext)).string();
            if (fs::exists(cand)) {
                labels_path = cand;
                break;
            }
        }
        if (labels_path.empty()) throw ConfigError("case '" + id + "' has no _labels file");
        cases.push_back(make_train_case(id, read_volume(vol_path), read_labelmap(labels_path)));
    }
    if (cases.empty()) throw ConfigError("no '<id>_vol.*' cases found in " + data_dir);
    return cases;
}

std::vector<size_t> synthetic_subset(size_t n_cases, double fraction, uint64_t seed) {
    std::vector<size_t> idx(n_cases);
    std::iota(idx.begin(), idx.end(), size_t(0));
    Rng rng(seed);
    rng.shuffle(idx);
    size_t keep = static_cast<size_t>(std::llround(fraction * double(n_cases)));
    keep = std::clamp<size_t>(keep, 1, n_cases);
    idx.resize(keep);
    return idx;
}

TrainOutput train(const RunConfig& cfg, const std::vector<TrainCase>& cases, const Network* init,
                  const std::string& ckpt_dir) {
    cfg.validate();
    if (cases.empty()) throw ConfigError("train: dataset is empty");
    const PatchGeometry geo = PatchGeometry::for_depth(static_cast<int>(cfg.widths.size()), 7);
    const CyclicLr sched = cfg.schedule();

    TrainOutput out;
    if (init) {
        if (!(init->config == cfg.network_config()))
            throw ConfigError("train: initial checkpoint architecture differs from the run config");
        out.net = *init;
    } else {
        Rng rng(cfg.seed);
        out.net = make_network<float>(cfg.network_config(), rng);
    }
    out.opt = make_adam_state(out.net);

    // per-case samplers; a missing class is reported before iteration 0
    std::vector<CenterSampler> samplers;
    samplers.reserve(cases.size());
    for (const auto& c : cases) samplers.emplace_back(c.labels, c.mask);

    const Rng master(cfg.seed);
    const int B = cfg.batch_size;
    const size_t vox_t = static_cast<size_t>(geo.out_block) * geo.out_block * geo.out_block;

    auto save = [&](int64_t iter, const std::string& name) {
        if (ckpt_dir.empty()) return;
        fs::create_directories(ckpt_dir);
        save_checkpoint(out.net, &out.opt, iter, (fs::path(ckpt_dir) / name).string());
    };

    for (int64_t it = 0; it < cfg.iterations; ++it) {
        const double lr = sched.lr(it);

        Tensor p1(B, 1, geo.normal_size, geo.normal_size, geo.normal_size);
        Tensor p3(B, 1, geo.sub_size, geo.sub_size, geo.sub_size);
        Tensor p5(B, 1, geo.sub_size, geo.sub_size, geo.sub_size);
        std::vector<uint8_t> targets(static_cast<size_t>(B) * vox_t);
        const size_t s1 = p1.plane(), s3 = p3.plane();
        for (int j = 0; j < B; ++j) {
            Rng r = master.stream(static_cast<uint64_t>(it) * B + j);
            size_t ci = r.index(cases.size());
            auto center = samplers[ci].draw(r);
            TrainingSample s = extract_sample(cases[ci].vol, cases[ci].labels, center, geo);
            s = augment(s, r, 0.5, 0.5, geo);
            std::copy(s.p1.begin(), s.p1.end(), p1.data.begin() + j * s1);
            std::copy(s.p3.begin(), s.p3.end(), p3.data.begin() + j * s3);
            std::copy(s.p5.begin(), s.p5.end(), p5.data.begin() + j * s3);
            std::copy(s.target.begin(), s.target.end(), targets.begin() + j * vox_t);
        }

        ForwardCache<float> cache;
        Tensor logits = forward(out.net, p1, p3, p5, Mode::train, &cache);
        Tensor dlogits;
        float loss = softmax_cross_entropy(logits, targets, dlogits);
        Network grads = backward(out.net, cache, dlogits);
        update_running_stats(out.net, cache);
        adam_step(out.net, grads, out.opt, lr);

        out.log.push_back({it, lr, double(loss)});
        if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.iterations) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_iter%06lld", static_cast<long long>(it + 1));
            save(it + 1, name);
        }
    }
    save(cfg.iterations, "ckpt_final");
    return out;
}

void write_loss_log(const std::vector<TrainLogRow>& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f << "iter,lr,loss\n";
    char buf[96];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g\n", static_cast<long long>(row.iter), row.lr,
                      row.loss);
        f << buf;
    }
    if (!f) throw FormatError("write failed: " + path);
}

} // namespace usseg
