#ifndef USSEG_TRAINER_HPP
#define USSEG_TRAINER_HPP

#include <string>
#include <vector>

#include "usseg/adam.hpp"
#include "usseg/network.hpp"
#include "usseg/run_config.hpp"
#include "usseg/sampler.hpp"
#include "usseg/volume.hpp"

namespace usseg {

// One training case, already masked and standardized.
struct TrainCase {
    std::string id;
    Volume vol; // standardized
    Mask mask;
    LabelMap labels;
};

// Computes the >0 mask from the raw volume, standardizes, and checks the
// label geometry.
TrainCase make_train_case(std::string id, const Volume& raw, LabelMap labels);

// Scans data_dir for '<id>_vol.(nrrd|json)' with a matching
// '<id>_labels.(nrrd|json)', sorted by id.
std::vector<TrainCase> load_dataset(const std::string& data_dir);

// Seeded shuffle of {0..n-1}, then a prefix of round(fraction*n) (at least
// one) — whole-volume subsetting for pretraining-set reduction.
std::vector<size_t> synthetic_subset(size_t n_cases, double fraction, uint64_t seed);

struct TrainLogRow {
    int64_t iter;
    double lr;
    double loss;
};

struct TrainOutput {
    Network net;
    AdamState opt;
    std::vector<TrainLogRow> log;
};

// Mini-batch loop: per iteration draws a class-balanced augmented batch,
// runs forward/loss/backward, folds BN statistics, and applies one Adam
// step at the cyclic rate. Batch randomness comes from per-(iteration,
// slot) streams, so runs are bit-reproducible for a fixed seed. `init`
// (when non-null) supplies fine-tune weights and must match the
// configured architecture; the schedule and Adam state restart at 0.
// Checkpoints land in ckpt_dir ('ckpt_iter<N>' stems plus 'ckpt_final')
// unless it is empty.
TrainOutput train(const RunConfig& cfg, const std::vector<TrainCase>& cases, const Network* init,
                  const std::string& ckpt_dir);

// CSV rows 'iter,lr,loss'.
void write_loss_log(const std::vector<TrainLogRow>& log, const std::string& path);

} // namespace usseg
#endif
