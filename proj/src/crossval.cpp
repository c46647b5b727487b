#include "usseg/crossval.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "usseg/crf.hpp"
#include "usseg/errors.hpp"
#include "usseg/metrics.hpp"
#include "usseg/predict.hpp"

namespace usseg {

namespace {

const char* kClassNames[3] = {"bg", "gm", "wm"};

} // namespace

std::vector<MetricRow> cross_validate(const RunConfig& cfg, const std::vector<TrainCase>& cases,
                                      const CrossValOptions& opt) {
    if (cases.size() < 2) throw ConfigError("cross_validate: need at least 2 cases");
    std::vector<std::string> ids;
    for (const auto& c : cases) ids.push_back(c.id);
    if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
        throw ConfigError("cross_validate: duplicate case ids");
    FoldPlan plan = make_folds(ids, opt.n_folds, cfg.seed);

    std::map<std::string, size_t> index;
    for (size_t i = 0; i < cases.size(); ++i) index[cases[i].id] = i;

    const PatchGeometry geo = PatchGeometry::for_depth(static_cast<int>(cfg.widths.size()), 7);

    // fold x class metric values (NaN = undefined in that fold)
    std::vector<std::array<double, 3>> fold_dice, fold_sens, fold_spec;
    std::vector<MetricRow> rows;

    for (size_t f = 0; f < plan.folds.size(); ++f) {
        std::set<std::string> held(plan.folds[f].begin(), plan.folds[f].end());
        std::vector<TrainCase> train_cases;
        for (const auto& c : cases)
            if (!held.count(c.id)) train_cases.push_back(c);

        TrainOutput trained = train(cfg, train_cases, opt.pretrain, "");

        std::array<double, 3> dsum{}, ssum{}, psum{};
        std::array<int, 3> dcount{}, scount{}, pcount{};
        for (const std::string& id : plan.folds[f]) {
            const TrainCase& tc = cases[index.at(id)];
            ProbabilityMap pm = predict_volume(trained.net, tc.vol, tc.mask, geo);
            if (opt.use_crf) pm = meanfield(pm, tc.vol, cfg.crf);
            LabelMap pred = argmax_labels(pm);
            Mask mask = opt.metrics_in_mask ? tc.mask : full_mask(tc.vol.dims);

            for (int l = 0; l < 3; ++l) {
                // class undefined for this case when the reference has no
                // masked voxel of it
                ConfusionCounts cc = confusion(pred, tc.labels, static_cast<uint8_t>(l), mask);
                if (cc.tp + cc.fn == 0) continue;
                dsum[l] += dice(pred, tc.labels, static_cast<uint8_t>(l), mask);
                ++dcount[l];
                ssum[l] += sensitivity(pred, tc.labels, static_cast<uint8_t>(l), mask);
                ++scount[l];
                psum[l] += specificity(pred, tc.labels, static_cast<uint8_t>(l), mask);
                ++pcount[l];
            }
        }
        std::array<double, 3> d{}, s{}, p{};
        for (int l = 0; l < 3; ++l) {
            d[l] = dcount[l] ? dsum[l] / dcount[l] : std::nan("");
            s[l] = scount[l] ? ssum[l] / scount[l] : std::nan("");
            p[l] = pcount[l] ? psum[l] / pcount[l] : std::nan("");
            rows.push_back({std::to_string(f), kClassNames[l], d[l], s[l], p[l]});
        }
        fold_dice.push_back(d);
        fold_sens.push_back(s);
        fold_spec.push_back(p);
    }

    auto summarize = [&](const std::vector<std::array<double, 3>>& vals, int l) {
        double sum = 0;
        int n = 0;
        for (const auto& v : vals)
            if (!std::isnan(v[l])) {
                sum += v[l];
                ++n;
            }
        if (n == 0) return std::pair<double, double>{std::nan(""), std::nan("")};
        double mean = sum / n;
        double ss = 0;
        for (const auto& v : vals)
            if (!std::isnan(v[l])) ss += (v[l] - mean) * (v[l] - mean);
        return std::pair<double, double>{mean, std::sqrt(ss / n)};
    };
    for (int l = 0; l < 3; ++l) {
        auto [dm, dsd] = summarize(fold_dice, l);
        auto [sm, ssd] = summarize(fold_sens, l);
        auto [pm, psd] = summarize(fold_spec, l);
        rows.push_back({"avg", kClassNames[l], dm, sm, pm});
        rows.push_back({"std", kClassNames[l], dsd, ssd, psd});
    }
    return rows;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& os) {
    os << "fold,class,dice,sensitivity,specificity\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f\n", r.fold.c_str(), r.cls.c_str(), r.dice,
                      r.sensitivity, r.specificity);
        os << buf;
    }
}

} // namespace usseg
