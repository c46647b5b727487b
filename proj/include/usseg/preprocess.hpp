#ifndef USSEG_PREPROCESS_HPP
#define USSEG_PREPROCESS_HPP

#include <array>

#include "usseg/volume.hpp"

namespace usseg {

enum class Interp { trilinear, nearest };

// Resample to isotropic spacing target_mm. Output dims are
// ceil(in_dim * in_spacing / target) per axis; samples are taken in
// physical coordinates and edge-clamped outside the source grid. When the
// input spacing already equals the target on every axis this is an exact
// identity.
Volume resample_isotropic(const Volume& vol, double target_mm = 0.4, Interp kind = Interp::trilinear);

// Labels always resample nearest-neighbor.
LabelMap resample_isotropic(const LabelMap& lm, double target_mm = 0.4);

// True where intensity > 0 (reconstructed sweeps are zero outside the fan).
Mask compute_mask(const Volume& vol);

// Zero-mean / unit-std over masked voxels (population std); voxels outside
// the mask are set to 0. Throws ValidationError when fewer than two voxels
// are masked or the masked variance is zero.
Volume standardize(const Volume& vol, const Mask& mask);

// Fractions of BG / GM / WM over masked voxels; sums to 1.
std::array<double, 3> label_histogram(const LabelMap& lm, const Mask& mask);

} // namespace usseg

#endif
