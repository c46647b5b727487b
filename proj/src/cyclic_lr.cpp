#include "usseg/cyclic_lr.hpp"

#include <cmath>

#include "usseg/errors.hpp"

namespace usseg {

void CyclicLr::validate() const {
    if (!(base > 0) || !(base <= max)) throw ConfigError("cyclic lr: need 0 < base <= max");
    if (step_size < 1) throw ConfigError("cyclic lr: step_size must be >= 1");
}

double CyclicLr::lr(int64_t it) const {
    double cycle = std::floor(1.0 + static_cast<double>(it) / (2.0 * static_cast<double>(step_size)));
    double x = std::abs(static_cast<double>(it) / static_cast<double>(step_size) - 2.0 * cycle + 1.0);
    double f = 1.0 - x;
    if (f < 0.0) f = 0.0;
    return base + (max - base) * f;
}

} // namespace usseg
