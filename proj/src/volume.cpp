#include "usseg/volume.hpp"

#include <cmath>
#include <string>

#include "usseg/errors.hpp"

namespace usseg {

size_t Mask::count() const {
    size_t c = 0;
    for (uint8_t b : bits) c += (b != 0);
    return c;
}

void validate(const Volume& v) {
    if (v.dims[0] <= 0 || v.dims[1] <= 0 || v.dims[2] <= 0)
        throw ValidationError("volume dims must be positive");
    if (v.data.size() != v.voxels())
        throw ValidationError("volume data length " + std::to_string(v.data.size()) +
                              " != nx*ny*nz = " + std::to_string(v.voxels()));
    for (int a = 0; a < 3; ++a)
        if (!(v.spacing[a] > 0.0))
            throw ValidationError("volume spacing must be positive");
    for (float f : v.data)
        if (!std::isfinite(f)) throw ValidationError("volume contains non-finite values");
}

void validate(const LabelMap& lm) {
    if (lm.dims[0] <= 0 || lm.dims[1] <= 0 || lm.dims[2] <= 0)
        throw ValidationError("labelmap dims must be positive");
    if (lm.labels.size() != lm.voxels())
        throw ValidationError("labelmap data length " + std::to_string(lm.labels.size()) +
                              " != nx*ny*nz = " + std::to_string(lm.voxels()));
    for (int a = 0; a < 3; ++a)
        if (!(lm.spacing[a] > 0.0))
            throw ValidationError("labelmap spacing must be positive");
    for (uint8_t l : lm.labels)
        if (l > 2) throw ValidationError("labelmap value " + std::to_string(int(l)) + " outside {0,1,2}");
}

bool same_grid(const std::array<int, 3>& a, const std::array<int, 3>& b) {
    return a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
}

} // namespace usseg
