#ifndef USSEG_PHANTOM_HPP
#define USSEG_PHANTOM_HPP

#include <array>

#include "usseg/rng.hpp"
#include "usseg/volume.hpp"

namespace usseg {

// Procedural brain-like labelmap: background outside a randomized
// ellipsoid, a GM shell, and a WM interior whose boundary is perturbed by
// low-frequency smooth noise. Outer and inner surfaces are scaled by
// bisection until the achieved BG/GM/WM fractions land within ~0.01 of the
// targets. Output spacing is 0.4 mm isotropic.
LabelMap make_phantom(Rng& rng, std::array<int, 3> dims,
                      std::array<double, 3> target_fractions = {0.23, 0.30, 0.47});

} // namespace usseg

#endif
