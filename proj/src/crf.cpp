#include "usseg/crf.hpp"

#include <algorithm>
#include <cmath>

#include "usseg/errors.hpp"
#include "usseg/threading.hpp"

namespace usseg {

void CrfParams::validate() const {
    if (!(theta_gamma > 0) || !(theta_alpha > 0) || !(theta_beta > 0))
        throw ConfigError("crf: kernel stds must be positive");
    if (w_spatial < 0 || w_bilateral < 0) throw ConfigError("crf: weights must be non-negative");
    if (iterations < 0) throw ConfigError("crf: iterations must be >= 0");
}

namespace {

struct Coord {
    int x, y, z;
};

inline Coord coord_of(size_t i, const std::array<int, 3>& dims) {
    int x = static_cast<int>(i % dims[0]);
    int y = static_cast<int>((i / dims[0]) % dims[1]);
    int z = static_cast<int>(i / (static_cast<size_t>(dims[0]) * dims[1]));
    return {x, y, z};
}

std::vector<float> spatial_exact(const std::vector<float>& q, const std::array<int, 3>& dims,
                                 float theta) {
    const size_t n = q.size();
    std::vector<float> out(n, 0.0f);
    const double inv2t2 = 1.0 / (2.0 * double(theta) * theta);
    parallel_for(n, [&](size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) {
            Coord ci = coord_of(i, dims);
            double acc = 0;
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                Coord cj = coord_of(j, dims);
                double d2 = double(ci.x - cj.x) * (ci.x - cj.x) + double(ci.y - cj.y) * (ci.y - cj.y) +
                            double(ci.z - cj.z) * (ci.z - cj.z);
                acc += std::exp(-d2 * inv2t2) * q[j];
            }
            out[i] = static_cast<float>(acc);
        }
    });
    return out;
}

// separable truncated Gaussian blur minus the self term; identical weights
// to the cube-window definition, evaluated one axis at a time
std::vector<float> spatial_truncated(const std::vector<float>& q, const std::array<int, 3>& dims,
                                     float theta) {
    const int r = static_cast<int>(std::ceil(3.0 * theta));
    std::vector<double> k1(2 * r + 1);
    const double inv2t2 = 1.0 / (2.0 * double(theta) * theta);
    for (int d = -r; d <= r; ++d) k1[d + r] = std::exp(-double(d) * d * inv2t2);

    const int nx = dims[0], ny = dims[1], nz = dims[2];
    const size_t n = q.size();
    std::vector<float> a(q.begin(), q.end()), tmp(n);

    auto pass = [&](const std::vector<float>& src, std::vector<float>& dst, int axis) {
        parallel_for(n, [&](size_t b, size_t e) {
            for (size_t i = b; i < e; ++i) {
                Coord c = coord_of(i, dims);
                int pos = axis == 0 ? c.x : axis == 1 ? c.y : c.z;
                int lim = axis == 0 ? nx : axis == 1 ? ny : nz;
                size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<size_t>(nx)
                                                          : static_cast<size_t>(nx) * ny;
                double acc = 0;
                int lo = std::max(-r, -pos), hi = std::min(r, lim - 1 - pos);
                for (int d = lo; d <= hi; ++d) acc += k1[d + r] * src[i + d * stride];
                dst[i] = static_cast<float>(acc);
            }
        });
    };
    pass(a, tmp, 0);
    pass(tmp, a, 1);
    pass(a, tmp, 2);
    for (size_t i = 0; i < n; ++i) tmp[i] -= q[i]; // exclude self (weight 1)
    return tmp;
}

std::vector<float> bilateral_exact(const std::vector<float>& q, const Volume& vol, float ta, float tb) {
    const size_t n = q.size();
    std::vector<float> out(n, 0.0f);
    const double inv2a = 1.0 / (2.0 * double(ta) * ta);
    const double inv2b = 1.0 / (2.0 * double(tb) * tb);
    parallel_for(n, [&](size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) {
            Coord ci = coord_of(i, vol.dims);
            double acc = 0;
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                Coord cj = coord_of(j, vol.dims);
                double d2 = double(ci.x - cj.x) * (ci.x - cj.x) + double(ci.y - cj.y) * (ci.y - cj.y) +
                            double(ci.z - cj.z) * (ci.z - cj.z);
                double di = double(vol.data[i]) - vol.data[j];
                acc += std::exp(-d2 * inv2a - di * di * inv2b) * q[j];
            }
            out[i] = static_cast<float>(acc);
        }
    });
    return out;
}

std::vector<float> bilateral_truncated(const std::vector<float>& q, const Volume& vol, float ta,
                                       float tb) {
    const int r = static_cast<int>(std::ceil(3.0 * ta));
    const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
    std::vector<double> k1(2 * r + 1);
    const double inv2a = 1.0 / (2.0 * double(ta) * ta);
    const double inv2b = 1.0 / (2.0 * double(tb) * tb);
    for (int d = -r; d <= r; ++d) k1[d + r] = std::exp(-double(d) * d * inv2a);

    std::vector<float> out(q.size(), 0.0f);
    parallel_for(q.size(), [&](size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) {
            Coord c = coord_of(i, vol.dims);
            const double vi = vol.data[i];
            double acc = 0;
            for (int dz = std::max(-r, -c.z); dz <= std::min(r, nz - 1 - c.z); ++dz) {
                for (int dy = std::max(-r, -c.y); dy <= std::min(r, ny - 1 - c.y); ++dy) {
                    const double kzy = k1[dz + r] * k1[dy + r];
                    size_t row = i + static_cast<size_t>(dz) * nx * ny + static_cast<size_t>(dy) * nx;
                    for (int dx = std::max(-r, -c.x); dx <= std::min(r, nx - 1 - c.x); ++dx) {
                        if (dx == 0 && dy == 0 && dz == 0) continue;
                        double di = vi - vol.data[row + dx];
                        acc += kzy * k1[dx + r] * std::exp(-di * di * inv2b) * q[row + dx];
                    }
                }
            }
            out[i] = static_cast<float>(acc);
        }
    });
    return out;
}

} // namespace

std::vector<float> spatial_message(const std::vector<float>& q, std::array<int, 3> dims, float theta,
                                   FilterPath path) {
    return path == FilterPath::exact ? spatial_exact(q, dims, theta) : spatial_truncated(q, dims, theta);
}

std::vector<float> bilateral_message(const std::vector<float>& q, const Volume& vol, float theta_alpha,
                                     float theta_beta, FilterPath path) {
    return path == FilterPath::exact ? bilateral_exact(q, vol, theta_alpha, theta_beta)
                                     : bilateral_truncated(q, vol, theta_alpha, theta_beta);
}

ProbabilityMap meanfield(const ProbabilityMap& pm, const Volume& vol, const CrfParams& params,
                         const MeanfieldObserver& observer) {
    params.validate();
    if (!same_grid(pm.dims, vol.dims)) throw ValidationError("crf: probability map / volume dims mismatch");
    validate(pm);

    const size_t n = pm.voxels();
    // exp(-U_l) = clamp(p_l); kept in probability space so that zero-weight
    // runs reproduce the input bit for bit
    std::vector<float> expu(3 * n);
    for (size_t i = 0; i < 3 * n; ++i) expu[i] = std::clamp(pm.probs[i], 1e-8f, 1.0f);

    ProbabilityMap q = pm;
    std::array<std::vector<float>, 3> msg;

    for (int it = 0; it < params.iterations; ++it) {
        for (int l = 0; l < 3; ++l) {
            std::vector<float> ql(n);
            for (size_t i = 0; i < n; ++i) ql[i] = q.at(i, l);
            msg[l].assign(n, 0.0f);
            if (params.w_spatial > 0) {
                auto s = spatial_message(ql, pm.dims, params.theta_gamma, params.path);
                for (size_t i = 0; i < n; ++i) msg[l][i] += params.w_spatial * s[i];
            }
            if (params.w_bilateral > 0) {
                auto b = bilateral_message(ql, vol, params.theta_alpha, params.theta_beta, params.path);
                for (size_t i = 0; i < n; ++i) msg[l][i] += params.w_bilateral * b[i];
            }
        }
        parallel_for(n, [&](size_t b, size_t e) {
            for (size_t i = b; i < e; ++i) {
                // Potts: pairwise energy of l collects the other labels' messages
                double pair[3];
                for (int l = 0; l < 3; ++l) {
                    double s = 0;
                    for (int l2 = 0; l2 < 3; ++l2)
                        if (l2 != l) s += msg[l2][i];
                    pair[l] = s;
                }
                double shift = std::min({pair[0], pair[1], pair[2]});
                double num[3], z = 0;
                for (int l = 0; l < 3; ++l) {
                    num[l] = double(expu[3 * i + l]) * std::exp(-(pair[l] - shift));
                    z += num[l];
                }
                for (int l = 0; l < 3; ++l) q.probs[3 * i + l] = static_cast<float>(num[l] / z);
            }
        });
        if (observer) observer(it + 1, q);
    }
    return q;
}

LabelMap argmax_labels(const ProbabilityMap& pm) {
    validate(pm);
    LabelMap lm;
    lm.dims = pm.dims;
    lm.labels.resize(pm.voxels());
    for (size_t i = 0; i < pm.voxels(); ++i) {
        int best = 0;
        for (int l = 1; l < 3; ++l)
            if (pm.at(i, l) > pm.at(i, best)) best = l;
        lm.labels[i] = static_cast<uint8_t>(best);
    }
    return lm;
}

} // namespace usseg
