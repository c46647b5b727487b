#ifndef USSEG_CYCLIC_LR_HPP
#define USSEG_CYCLIC_LR_HPP

#include <cstdint>

namespace usseg {

// Triangular cyclic learning rate: linear ramp base -> max over step_size
// iterations, then back; period 2*step_size.
struct CyclicLr {
    double base = 1e-3;
    double max = 8e-3;
    int64_t step_size = 1600;

    void validate() const;
    double lr(int64_t it) const;
};

} // namespace usseg

#endif
