#ifndef USSEG_USSIM_HPP
#define USSEG_USSIM_HPP

#include <utility>
#include <vector>

#include "usseg/rng.hpp"
#include "usseg/volume.hpp"

namespace usseg {

// Acoustic placeholders per label (BG, GM, WM): relative impedance,
// per-voxel multiplicative attenuation, scatterer density and amplitude.
struct TissueAcoustics {
    std::array<double, 3> impedance{1.0, 1.55, 1.65};
    std::array<double, 3> attenuation{0.999, 0.995, 0.996};
    std::array<double, 3> scatter_density{0.05, 0.5, 0.35};
    std::array<double, 3> scatter_amp{0.2, 1.0, 0.7};

    void validate() const;
};

// PSF stds in voxels: x = lateral, y = elevational, z = axial.
struct SweepPsf {
    double lateral = 2.0;
    double elevational = 2.0;
    double axial = 1.0;
};

// Intermediate fields, exposed for tests: raw (pre-PSF) reflection and
// scatter deposits, the log-compressed pre-clamp image, and the final
// volume.
struct SweepFields {
    Volume reflections;
    Volume scatter;
    Volume pre_clamp;
    Volume image;
};

// Axis-aligned rays along +z. At each label interface a->b a reflection
// A*R with R = ((Z_b-Z_a)/(Z_b+Z_a))^2 is deposited at the entered voxel
// and the transmitted amplitude A is scaled by (1-R); traversing a voxel
// scales A by that tissue's attenuation. A Bernoulli(rho) scatterer field
// with N(0, sigma^2) amplitudes is modulated by A. Both fields are blurred
// with a separable Gaussian PSF, summed, envelope-rectified,
// log-compressed with log(1+100x)/log(101) and clamped to [0,1]. Leading
// background (before a column's first interface) stays exactly 0.
// Scatterer draws come from per-column streams derived from (seed, x, y).
SweepFields simulate_sweep_fields(const LabelMap& lm, const TissueAcoustics& ac, const Rng& rng,
                                  const SweepPsf& psf = SweepPsf{});
Volume simulate_sweep(const LabelMap& lm, const TissueAcoustics& ac, const Rng& rng,
                      const SweepPsf& psf = SweepPsf{});

// per_case sweeps per labelmap with +-10 % impedance jitter and fresh
// scatterer streams, paired with the source labelmap.
std::vector<std::pair<Volume, LabelMap>> generate_pretrain_set(const std::vector<LabelMap>& labelmaps,
                                                               int per_case, const Rng& rng,
                                                               const TissueAcoustics& base = TissueAcoustics{},
                                                               const SweepPsf& psf = SweepPsf{});

} // namespace usseg
#endif
