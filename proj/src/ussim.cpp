#include "usseg/ussim.hpp"

#include <algorithm>
#include <cmath>

#include "usseg/errors.hpp"

namespace usseg {

void TissueAcoustics::validate() const {
    for (int l = 0; l < 3; ++l) {
        if (!(impedance[l] > 0)) throw ValidationError("acoustics: impedance must be positive");
        if (!(attenuation[l] > 0) || attenuation[l] > 1.0)
            throw ValidationError("acoustics: attenuation must be in (0,1]");
        if (scatter_density[l] < 0 || scatter_density[l] > 1)
            throw ValidationError("acoustics: scatter density must be in [0,1]");
        if (scatter_amp[l] < 0) throw ValidationError("acoustics: scatter amplitude must be >= 0");
    }
}

namespace {

// separable zero-padded Gaussian blur, kernel radius ceil(3*sigma),
// weights normalized to sum 1 (skipped for sigma == 0)
void gaussian_blur_axis(std::vector<float>& field, const std::array<int, 3>& dims, int axis,
                        double sigma) {
    if (sigma <= 0.0) return;
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0;
    for (int d = -r; d <= r; ++d) {
        k[d + r] = std::exp(-double(d) * d / (2.0 * sigma * sigma));
        sum += k[d + r];
    }
    for (auto& v : k) v /= sum;

    const int nx = dims[0], ny = dims[1], nz = dims[2];
    const int lim = axis == 0 ? nx : axis == 1 ? ny : nz;
    const size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<size_t>(nx)
                                                    : static_cast<size_t>(nx) * ny;
    std::vector<float> out(field.size());
    size_t i = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x, ++i) {
                int pos = axis == 0 ? x : axis == 1 ? y : z;
                int lo = std::max(-r, -pos), hi = std::min(r, lim - 1 - pos);
                double acc = 0;
                for (int d = lo; d <= hi; ++d) acc += k[d + r] * field[i + d * stride];
                out[i] = static_cast<float>(acc);
            }
    field = std::move(out);
}

} // namespace

SweepFields simulate_sweep_fields(const LabelMap& lm, const TissueAcoustics& ac, const Rng& rng,
                                  const SweepPsf& psf) {
    validate(lm);
    ac.validate();
    const int nx = lm.dims[0], ny = lm.dims[1], nz = lm.dims[2];
    const size_t nvox = lm.voxels();

    SweepFields f;
    for (Volume* v : {&f.reflections, &f.scatter, &f.pre_clamp, &f.image}) {
        v->dims = lm.dims;
        v->spacing = lm.spacing;
        v->origin = lm.origin;
        v->data.assign(nvox, 0.0f);
    }
    std::vector<uint8_t> lead_bg(nvox, 0); // leading background, zeroed at the end

    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            Rng col = rng.stream(static_cast<uint64_t>(y) * nx + x);
            double amp = 1.0;
            int first_interface = -1;
            const bool starts_bg = lm.at(x, y, 0) == 0;
            for (int z = 0; z < nz; ++z) {
                const uint8_t l = lm.at(x, y, z);
                amp *= ac.attenuation[l];
                // scatterer draw order per voxel: keep coin, then amplitude
                double keep = col.uniform();
                if (keep < ac.scatter_density[l]) {
                    double g = col.normal();
                    f.scatter.at(x, y, z) = static_cast<float>(g * ac.scatter_amp[l] * amp);
                }
                if (z + 1 < nz) {
                    const uint8_t l2 = lm.at(x, y, z + 1);
                    if (l2 != l) {
                        double za = ac.impedance[l], zb = ac.impedance[l2];
                        double refl = (zb - za) / (zb + za);
                        refl *= refl;
                        f.reflections.at(x, y, z + 1) += static_cast<float>(amp * refl);
                        amp *= 1.0 - refl;
                        if (first_interface < 0) first_interface = z + 1;
                    }
                }
            }
            if (starts_bg) {
                int until = first_interface < 0 ? nz : first_interface;
                for (int z = 0; z < until; ++z) lead_bg[lm.index(x, y, z)] = 1;
            }
        }
    }

    std::vector<float> refl_blur = f.reflections.data;
    std::vector<float> scat_blur = f.scatter.data;
    for (auto* field : {&refl_blur, &scat_blur}) {
        gaussian_blur_axis(*field, lm.dims, 0, psf.lateral);
        gaussian_blur_axis(*field, lm.dims, 1, psf.elevational);
        gaussian_blur_axis(*field, lm.dims, 2, psf.axial);
    }

    const double log_c = 100.0;
    const double log_norm = std::log(1.0 + log_c);
    for (size_t i = 0; i < nvox; ++i) {
        double env = std::abs(double(refl_blur[i]) + scat_blur[i]);
        double compressed = std::log(1.0 + log_c * env) / log_norm;
        f.pre_clamp.data[i] = static_cast<float>(compressed);
        float out = static_cast<float>(std::clamp(compressed, 0.0, 1.0));
        f.image.data[i] = lead_bg[i] ? 0.0f : out;
    }
    validate(f.image);
    return f;
}

Volume simulate_sweep(const LabelMap& lm, const TissueAcoustics& ac, const Rng& rng,
                      const SweepPsf& psf) {
    return simulate_sweep_fields(lm, ac, rng, psf).image;
}

std::vector<std::pair<Volume, LabelMap>> generate_pretrain_set(const std::vector<LabelMap>& labelmaps,
                                                               int per_case, const Rng& rng,
                                                               const TissueAcoustics& base,
                                                               const SweepPsf& psf) {
    if (per_case < 1) throw ValidationError("generate_pretrain_set: per_case must be >= 1");
    std::vector<std::pair<Volume, LabelMap>> out;
    out.reserve(labelmaps.size() * per_case);
    for (size_t i = 0; i < labelmaps.size(); ++i) {
        for (int s = 0; s < per_case; ++s) {
            Rng sweep_rng = rng.stream(i * static_cast<uint64_t>(per_case) + s);
            TissueAcoustics ac = base;
            for (int l = 0; l < 3; ++l) ac.impedance[l] *= 1.0 + 0.1 * sweep_rng.uniform(-1.0, 1.0);
            out.emplace_back(simulate_sweep(labelmaps[i], ac, sweep_rng, psf), labelmaps[i]);
        }
    }
    return out;
}

} // namespace usseg
