#include "usseg/metrics.hpp"

#include "usseg/errors.hpp"

namespace usseg {

Mask full_mask(std::array<int, 3> dims) {
    Mask m;
    m.dims = dims;
    m.bits.assign(static_cast<size_t>(dims[0]) * dims[1] * dims[2], 1);
    return m;
}

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask) {
    if (!same_grid(pred.dims, ref.dims) || !same_grid(pred.dims, mask.dims))
        throw ValidationError("metrics: dims mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        if (!mask.bits[i]) continue;
        const bool p = pred.labels[i] == label;
        const bool r = ref.labels[i] == label;
        if (p && r) ++c.tp;
        else if (p && !r) ++c.fp;
        else if (!p && r) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double dice(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask) {
    ConfusionCounts c = confusion(pred, ref, label, mask);
    const size_t p = c.tp + c.fp, r = c.tp + c.fn;
    if (p == 0 && r == 0) return 1.0;
    return 2.0 * double(c.tp) / double(p + r);
}

double sensitivity(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask) {
    ConfusionCounts c = confusion(pred, ref, label, mask);
    if (c.tp + c.fn == 0) return 1.0;
    return double(c.tp) / double(c.tp + c.fn);
}

double specificity(const LabelMap& pred, const LabelMap& ref, uint8_t label, const Mask& mask) {
    ConfusionCounts c = confusion(pred, ref, label, mask);
    if (c.tn + c.fp == 0) return 1.0;
    return double(c.tn) / double(c.tn + c.fp);
}

} // namespace usseg
