#include "usseg/phantom.hpp"

#include <cmath>
#include <string>

#include "usseg/errors.hpp"

namespace usseg {

namespace {

struct CosineMode {
    double kx, ky, kz, phase, amp;
};

} // namespace

LabelMap make_phantom(Rng& rng, std::array<int, 3> dims, std::array<double, 3> target_fractions) {
    for (int a = 0; a < 3; ++a)
        if (dims[a] < 32)
            throw ValidationError("phantom: dims must be >= 32 per axis, got " + std::to_string(dims[a]));
    double fsum = target_fractions[0] + target_fractions[1] + target_fractions[2];
    if (std::abs(fsum - 1.0) > 1e-6) throw ValidationError("phantom: target fractions must sum to 1");

    // randomized ellipsoid: jittered center and per-axis radii
    std::array<double, 3> center, radius;
    for (int a = 0; a < 3; ++a) center[a] = (dims[a] - 1) / 2.0 + rng.uniform(-0.05, 0.05) * dims[a];
    for (int a = 0; a < 3; ++a) radius[a] = (dims[a] / 2.0) * rng.uniform(0.9, 1.1);

    // low-frequency boundary perturbation for the WM surface
    std::vector<CosineMode> modes(6);
    const double dim_mean = (dims[0] + dims[1] + dims[2]) / 3.0;
    for (auto& m : modes) {
        double wavelength = rng.uniform(dim_mean / 4.0, dim_mean / 2.0);
        double k = 2.0 * 3.14159265358979323846 / wavelength;
        // random direction
        double ux = rng.normal(), uy = rng.normal(), uz = rng.normal();
        double norm = std::sqrt(ux * ux + uy * uy + uz * uz) + 1e-12;
        m.kx = k * ux / norm;
        m.ky = k * uy / norm;
        m.kz = k * uz / norm;
        m.phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        m.amp = rng.uniform(0.5, 1.0);
    }
    double amp_total = 0;
    for (auto& m : modes) amp_total += m.amp;
    for (auto& m : modes) m.amp *= 0.12 / amp_total; // radius perturbation ~12 %

    const size_t nvox = static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<float> rho(nvox);   // normalized ellipsoid radius
    std::vector<float> noise(nvox); // multiplicative boundary perturbation
    size_t i = 0;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x, ++i) {
                double fx = (x - center[0]) / radius[0];
                double fy = (y - center[1]) / radius[1];
                double fz = (z - center[2]) / radius[2];
                rho[i] = static_cast<float>(std::sqrt(fx * fx + fy * fy + fz * fz));
                double nse = 0;
                for (const auto& m : modes) nse += m.amp * std::cos(m.kx * x + m.ky * y + m.kz * z + m.phase);
                noise[i] = static_cast<float>(nse);
            }

    // outer surface: rho <= s, bisect s for the foreground fraction
    const double fg_target = target_fractions[1] + target_fractions[2];
    auto fg_fraction = [&](double s) {
        size_t c = 0;
        for (size_t j = 0; j < nvox; ++j) c += rho[j] <= s;
        return double(c) / double(nvox);
    };
    double lo = 0.05, hi = 4.0;
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        (fg_fraction(mid) < fg_target ? lo : hi) = mid;
    }
    const double s_outer = 0.5 * (lo + hi);

    // inner (WM) surface: rho <= t * (1 + noise), bisect t for WM fraction
    auto wm_fraction = [&](double t) {
        size_t c = 0;
        for (size_t j = 0; j < nvox; ++j) c += rho[j] <= t * (1.0 + noise[j]) && rho[j] <= s_outer;
        return double(c) / double(nvox);
    };
    lo = 0.01;
    hi = s_outer;
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        (wm_fraction(mid) < target_fractions[2] ? lo : hi) = mid;
    }
    const double t_inner = 0.5 * (lo + hi);

    LabelMap lm;
    lm.dims = dims;
    lm.spacing = {0.4, 0.4, 0.4};
    lm.labels.resize(nvox);
    size_t counts[3] = {0, 0, 0};
    for (size_t j = 0; j < nvox; ++j) {
        uint8_t l = 0;
        if (rho[j] <= s_outer) l = rho[j] <= t_inner * (1.0 + noise[j]) ? 2 : 1;
        lm.labels[j] = l;
        ++counts[l];
    }
    for (int l = 0; l < 3; ++l)
        if (counts[l] == 0)
            throw ValidationError("phantom: construction lost label " + std::to_string(l));
    return lm;
}

} // namespace usseg
