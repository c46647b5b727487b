#include "usseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "usseg/errors.hpp"

namespace usseg {

namespace {

std::array<int, 3> output_dims(const std::array<int, 3>& dims, const std::array<double, 3>& spacing,
                               double target) {
    std::array<int, 3> out;
    for (int a = 0; a < 3; ++a) {
        double ratio = spacing[a] / target;
        out[a] = static_cast<int>(std::ceil(static_cast<double>(dims[a]) * ratio));
        if (out[a] < 1) out[a] = 1;
    }
    return out;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

} // namespace

Volume resample_isotropic(const Volume& vol, double target_mm, Interp kind) {
    if (!(target_mm > 0.0)) throw ValidationError("resample: target spacing must be positive");
    validate(vol);

    Volume out;
    out.dims = output_dims(vol.dims, vol.spacing, target_mm);
    out.spacing = {target_mm, target_mm, target_mm};
    out.origin = vol.origin;
    out.data.resize(out.voxels());

    // continuous source index per output index; ratio computed once per
    // axis so that equal spacings give u == j exactly
    std::array<double, 3> ratio;
    for (int a = 0; a < 3; ++a) ratio[a] = target_mm / vol.spacing[a];

    const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
    for (int z = 0; z < out.dims[2]; ++z) {
        double uz = std::clamp(z * ratio[2], 0.0, double(nz - 1));
        for (int y = 0; y < out.dims[1]; ++y) {
            double uy = std::clamp(y * ratio[1], 0.0, double(ny - 1));
            for (int x = 0; x < out.dims[0]; ++x) {
                double ux = std::clamp(x * ratio[0], 0.0, double(nx - 1));
                float val;
                if (kind == Interp::nearest) {
                    int ix = clampi(int(std::lround(ux)), 0, nx - 1);
                    int iy = clampi(int(std::lround(uy)), 0, ny - 1);
                    int iz = clampi(int(std::lround(uz)), 0, nz - 1);
                    val = vol.at(ix, iy, iz);
                } else {
                    int x0 = clampi(int(std::floor(ux)), 0, nx - 1), x1 = std::min(x0 + 1, nx - 1);
                    int y0 = clampi(int(std::floor(uy)), 0, ny - 1), y1 = std::min(y0 + 1, ny - 1);
                    int z0 = clampi(int(std::floor(uz)), 0, nz - 1), z1 = std::min(z0 + 1, nz - 1);
                    double fx = ux - x0, fy = uy - y0, fz = uz - z0;
                    double c00 = vol.at(x0, y0, z0) * (1 - fx) + vol.at(x1, y0, z0) * fx;
                    double c10 = vol.at(x0, y1, z0) * (1 - fx) + vol.at(x1, y1, z0) * fx;
                    double c01 = vol.at(x0, y0, z1) * (1 - fx) + vol.at(x1, y0, z1) * fx;
                    double c11 = vol.at(x0, y1, z1) * (1 - fx) + vol.at(x1, y1, z1) * fx;
                    double c0 = c00 * (1 - fy) + c10 * fy;
                    double c1 = c01 * (1 - fy) + c11 * fy;
                    val = static_cast<float>(c0 * (1 - fz) + c1 * fz);
                }
                out.at(x, y, z) = val;
            }
        }
    }
    return out;
}

LabelMap resample_isotropic(const LabelMap& lm, double target_mm) {
    if (!(target_mm > 0.0)) throw ValidationError("resample: target spacing must be positive");
    validate(lm);

    LabelMap out;
    out.dims = output_dims(lm.dims, lm.spacing, target_mm);
    out.spacing = {target_mm, target_mm, target_mm};
    out.origin = lm.origin;
    out.labels.resize(out.voxels());

    std::array<double, 3> ratio;
    for (int a = 0; a < 3; ++a) ratio[a] = target_mm / lm.spacing[a];
    const int nx = lm.dims[0], ny = lm.dims[1], nz = lm.dims[2];
    for (int z = 0; z < out.dims[2]; ++z) {
        int iz = clampi(int(std::lround(std::clamp(z * ratio[2], 0.0, double(nz - 1)))), 0, nz - 1);
        for (int y = 0; y < out.dims[1]; ++y) {
            int iy = clampi(int(std::lround(std::clamp(y * ratio[1], 0.0, double(ny - 1)))), 0, ny - 1);
            for (int x = 0; x < out.dims[0]; ++x) {
                int ix = clampi(int(std::lround(std::clamp(x * ratio[0], 0.0, double(nx - 1)))), 0, nx - 1);
                out.at(x, y, z) = lm.at(ix, iy, iz);
            }
        }
    }
    return out;
}

Mask compute_mask(const Volume& vol) {
    Mask m;
    m.dims = vol.dims;
    m.bits.resize(vol.voxels());
    for (size_t i = 0; i < vol.data.size(); ++i) m.bits[i] = vol.data[i] > 0.0f ? 1 : 0;
    return m;
}

Volume standardize(const Volume& vol, const Mask& mask) {
    if (!same_grid(vol.dims, mask.dims)) throw ValidationError("standardize: mask dims mismatch");
    size_t n = 0;
    double sum = 0.0;
    for (size_t i = 0; i < vol.data.size(); ++i) {
        if (mask.bits[i]) {
            sum += vol.data[i];
            ++n;
        }
    }
    if (n < 2) throw ValidationError("standardize: degenerate input, fewer than 2 masked voxels");
    double mean = sum / double(n);
    double ss = 0.0;
    for (size_t i = 0; i < vol.data.size(); ++i) {
        if (mask.bits[i]) {
            double d = vol.data[i] - mean;
            ss += d * d;
        }
    }
    double var = ss / double(n);
    if (var <= 0.0) throw ValidationError("standardize: degenerate input, masked variance is zero");
    double inv_std = 1.0 / std::sqrt(var);

    Volume out = vol;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = mask.bits[i] ? static_cast<float>((vol.data[i] - mean) * inv_std) : 0.0f;
    return out;
}

std::array<double, 3> label_histogram(const LabelMap& lm, const Mask& mask) {
    if (!same_grid(lm.dims, mask.dims)) throw ValidationError("label_histogram: mask dims mismatch");
    size_t counts[3] = {0, 0, 0};
    size_t n = 0;
    for (size_t i = 0; i < lm.labels.size(); ++i) {
        if (mask.bits[i]) {
            ++counts[lm.labels[i]];
            ++n;
        }
    }
    if (n == 0) throw ValidationError("label_histogram: empty mask");
    return {double(counts[0]) / double(n), double(counts[1]) / double(n), double(counts[2]) / double(n)};
}

} // namespace usseg
