#ifndef USSEG_CROSSVAL_HPP
#define USSEG_CROSSVAL_HPP

#include <ostream>
#include <string>
#include <vector>

#include "usseg/folds.hpp"
#include "usseg/trainer.hpp"

namespace usseg {

struct CrossValOptions {
    int n_folds = 5;
    bool use_crf = false;
    bool metrics_in_mask = true; // restrict metrics to the US information mask
    const Network* pretrain = nullptr; // fine-tune start, fresh when null
};

// Per-fold/per-class metric row plus 'avg'/'std' summary rows. A class
// absent from a fold's reference labels yields NaN entries (reported, not
// dropped); summaries average the defined folds.
struct MetricRow {
    std::string fold; // "0".."n-1", "avg", "std"
    std::string cls;  // "bg", "gm", "wm"
    double dice;
    double sensitivity;
    double specificity;
};

// For each fold: train on the remaining cases (same RunConfig, same seed),
// predict the in-fold volumes, optionally refine with the CRF, and score
// per class. The fold plan is a function of (ids, n_folds, cfg.seed) only,
// so every experiment arm sees the same split.
std::vector<MetricRow> cross_validate(const RunConfig& cfg, const std::vector<TrainCase>& cases,
                                      const CrossValOptions& opt);

void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& os);

} // namespace usseg
#endif
