#ifndef USSEG_METRICS_HPP
#define USSEG_METRICS_HPP

#include <cstdint>

#include "usseg/volume.hpp"

namespace usseg {

struct ConfusionCounts {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// One-vs-rest counts for the given label over masked voxels.
ConfusionCounts confusion(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask);

// 2|P∩R| / (|P|+|R|); 1 when both sets are empty, 0 when exactly one is.
double dice(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask);

// TP/(TP+FN) and TN/(TN+FP); 0/0 -> 1.
double sensitivity(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask);
double specificity(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask);

Mask full_mask(std::array<int, 3> dims);

} // namespace usseg
#endif
