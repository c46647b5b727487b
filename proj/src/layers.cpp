#include "usseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "usseg/errors.hpp"
#include "usseg/threading.hpp"

namespace usseg {

namespace {

template <typename T>
void check_conv_args(const TensorT<T>& x, const std::vector<T>& weights, const std::vector<T>& bias,
                     int c_out, int k) {
    if (k != 1 && k != 3) throw ShapeError("conv3d: kernel side must be 1 or 3");
    if (x.d < k || x.h < k || x.w < k)
        throw ShapeError("conv3d: input spatial " + std::to_string(x.d) + "x" + std::to_string(x.h) + "x" +
                         std::to_string(x.w) + " smaller than kernel " + std::to_string(k));
    size_t ksz = static_cast<size_t>(k) * k * k;
    if (weights.size() != static_cast<size_t>(c_out) * x.c * ksz)
        throw ShapeError("conv3d: weight count " + std::to_string(weights.size()) + " != c_out*c_in*k^3 = " +
                         std::to_string(static_cast<size_t>(c_out) * x.c * ksz));
    if (bias.size() != static_cast<size_t>(c_out)) throw ShapeError("conv3d: bias count mismatch");
}

} // namespace

// The hot loops below stream over the flattened (z,y,x) volume instead of
// per-output rows: each (kz,ky) kernel plane contributes one fused 3-tap
// multiply-add pass of length valid_len = (Do-1)*H*W + (Ho-1)*W + Wo. The
// accumulator holds the input's row stride, so a couple of columns per row
// are carried as garbage and skipped when rows are copied out. Long
// contiguous passes keep the vector units busy where 7..23-element rows
// would not.
template <typename T>
TensorT<T> conv3d_valid(const TensorT<T>& x, const std::vector<T>& weights, const std::vector<T>& bias,
                        int c_out, int k) {
    check_conv_args(x, weights, bias, c_out, k);
    const int ci_n = x.c;
    const int dout_ = x.d - k + 1, hout = x.h - k + 1, wout = x.w - k + 1;
    TensorT<T> out(x.n, c_out, dout_, hout, wout);

    const size_t ksz = static_cast<size_t>(k) * k * k;
    const size_t hw = static_cast<size_t>(x.h) * x.w;
    const size_t dhw = static_cast<size_t>(x.d) * hw;
    const size_t valid_len = static_cast<size_t>(dout_ - 1) * hw + static_cast<size_t>(hout - 1) * x.w + wout;
    const size_t out_plane = static_cast<size_t>(hout) * wout;
    const T* xb = x.data.data();
    const T* wb = weights.data();
    T* ob = out.data.data();

    parallel_for(static_cast<size_t>(x.n) * c_out, [&](size_t t0, size_t t1) {
        std::vector<T> accbuf(valid_len);
        for (size_t t = t0; t < t1; ++t) {
            const int n = static_cast<int>(t / c_out);
            const int co = static_cast<int>(t % c_out);
            const T* xn = xb + static_cast<size_t>(n) * ci_n * dhw;
            const T* wco = wb + static_cast<size_t>(co) * ci_n * ksz;
            T* __restrict__ acc = accbuf.data();
            std::fill(accbuf.begin(), accbuf.end(), T(0));
            for (int ci = 0; ci < ci_n; ++ci) {
                const T* xc = xn + static_cast<size_t>(ci) * dhw;
                const T* wci = wco + static_cast<size_t>(ci) * ksz;
                if (k == 3) {
                    for (int kz = 0; kz < 3; ++kz) {
                        for (int ky = 0; ky < 3; ++ky) {
                            const T* __restrict__ p = xc + static_cast<size_t>(kz) * hw + static_cast<size_t>(ky) * x.w;
                            const T* wr = wci + (kz * 3 + ky) * 3;
                            const T w0 = wr[0], w1 = wr[1], w2 = wr[2];
                            for (size_t i = 0; i < valid_len; ++i)
                                acc[i] += w0 * p[i] + w1 * p[i + 1] + w2 * p[i + 2];
                        }
                    }
                } else {
                    const T w0 = wci[0];
                    const T* __restrict__ p = xc;
                    for (size_t i = 0; i < valid_len; ++i) acc[i] += w0 * p[i];
                }
            }
            T* on = ob + (static_cast<size_t>(n) * c_out + co) * dout_ * out_plane;
            const T bias_v = bias[co];
            for (int z = 0; z < dout_; ++z) {
                for (int y = 0; y < hout; ++y) {
                    const T* __restrict__ ar = acc + static_cast<size_t>(z) * hw + static_cast<size_t>(y) * x.w;
                    T* __restrict__ orow = on + static_cast<size_t>(z) * out_plane + static_cast<size_t>(y) * wout;
                    for (int xx = 0; xx < wout; ++xx) orow[xx] = ar[xx] + bias_v;
                }
            }
        }
    });
    return out;
}

template <typename T>
void conv3d_backward(const TensorT<T>& x, const std::vector<T>& weights, int c_out, int k,
                     const TensorT<T>& dout, TensorT<T>& dx, std::vector<T>& dweights,
                     std::vector<T>& dbias) {
    const int ci_n = x.c;
    const int dout_ = x.d - k + 1, hout = x.h - k + 1, wout = x.w - k + 1;
    if (dout.n != x.n || dout.c != c_out || dout.d != dout_ || dout.h != hout || dout.w != wout)
        throw ShapeError("conv3d backward: dout shape mismatch");
    const size_t ksz = static_cast<size_t>(k) * k * k;
    if (weights.size() != static_cast<size_t>(c_out) * ci_n * ksz)
        throw ShapeError("conv3d backward: weight count mismatch");

    dx = TensorT<T>(x.n, x.c, x.d, x.h, x.w);
    dweights.assign(weights.size(), T(0));
    dbias.assign(c_out, T(0));

    const size_t hw = static_cast<size_t>(x.h) * x.w;
    const size_t dhw = static_cast<size_t>(x.d) * hw;
    const size_t out_plane = static_cast<size_t>(hout) * wout;
    const size_t valid_len = static_cast<size_t>(dout_ - 1) * hw + static_cast<size_t>(hout - 1) * x.w + wout;
    // front margin so dx passes can read dpad[i - off] without branching
    const size_t margin = k == 3 ? 2 * hw + 2 * static_cast<size_t>(x.w) + 2 : 0;
    const T* xb = x.data.data();
    const T* wb = weights.data();
    const T* db = dout.data.data();

    // upstream gradient embedded at the input's row stride, zero margins
    // and zero garbage columns; shared by the dw and dx passes
    const size_t pad_stride = margin + dhw;
    std::vector<T> dpad_all(static_cast<size_t>(x.n) * c_out * pad_stride, T(0));
    parallel_for(static_cast<size_t>(x.n) * c_out, [&](size_t t0, size_t t1) {
        for (size_t t = t0; t < t1; ++t) {
            T* dst = dpad_all.data() + t * pad_stride + margin;
            const T* dn = db + t * dout_ * out_plane;
            for (int z = 0; z < dout_; ++z)
                for (int y = 0; y < hout; ++y)
                    std::copy(dn + (static_cast<size_t>(z) * hout + y) * wout,
                              dn + (static_cast<size_t>(z) * hout + y + 1) * wout,
                              dst + static_cast<size_t>(z) * hw + static_cast<size_t>(y) * x.w);
        }
    });

    // dweights / dbias: one task per output channel, samples accumulated in
    // fixed order; lane-partial sums so the reductions vectorize
    parallel_for(static_cast<size_t>(c_out), [&](size_t c0, size_t c1) {
        constexpr int kLanes = 16;
        alignas(64) T lane0[kLanes], lane1[kLanes], lane2[kLanes];
        for (size_t co = c0; co < c1; ++co) {
            T* dwco = dweights.data() + co * ci_n * ksz;
            T bsum = 0;
            for (int n = 0; n < x.n; ++n) {
                const size_t t = static_cast<size_t>(n) * c_out + co;
                const T* __restrict__ d = dpad_all.data() + t * pad_stride + margin;
                {
                    const T* dn = db + t * dout_ * out_plane;
                    for (size_t i = 0; i < static_cast<size_t>(dout_) * out_plane; ++i) bsum += dn[i];
                }
                const T* xn = xb + static_cast<size_t>(n) * ci_n * dhw;
                for (int ci = 0; ci < ci_n; ++ci) {
                    const T* xc = xn + static_cast<size_t>(ci) * dhw;
                    T* dwci = dwco + static_cast<size_t>(ci) * ksz;
                    if (k == 3) {
                        for (int kz = 0; kz < 3; ++kz) {
                            for (int ky = 0; ky < 3; ++ky) {
                                const T* __restrict__ p = xc + static_cast<size_t>(kz) * hw +
                                                          static_cast<size_t>(ky) * x.w;
                                for (int l = 0; l < kLanes; ++l) lane0[l] = lane1[l] = lane2[l] = T(0);
                                size_t i = 0;
                                for (; i + kLanes <= valid_len; i += kLanes) {
                                    for (int l = 0; l < kLanes; ++l) {
                                        const T dv = d[i + l];
                                        lane0[l] += dv * p[i + l];
                                        lane1[l] += dv * p[i + l + 1];
                                        lane2[l] += dv * p[i + l + 2];
                                    }
                                }
                                T s0 = 0, s1 = 0, s2 = 0;
                                for (int l = 0; l < kLanes; ++l) {
                                    s0 += lane0[l];
                                    s1 += lane1[l];
                                    s2 += lane2[l];
                                }
                                for (; i < valid_len; ++i) {
                                    const T dv = d[i];
                                    s0 += dv * p[i];
                                    s1 += dv * p[i + 1];
                                    s2 += dv * p[i + 2];
                                }
                                T* dwt = dwci + (kz * 3 + ky) * 3;
                                dwt[0] += s0;
                                dwt[1] += s1;
                                dwt[2] += s2;
                            }
                        }
                    } else {
                        for (int l = 0; l < kLanes; ++l) lane0[l] = T(0);
                        size_t i = 0;
                        for (; i + kLanes <= valid_len; i += kLanes)
                            for (int l = 0; l < kLanes; ++l) lane0[l] += d[i + l] * xc[i + l];
                        T s0 = 0;
                        for (int l = 0; l < kLanes; ++l) s0 += lane0[l];
                        for (; i < valid_len; ++i) s0 += d[i] * xc[i];
                        dwci[0] += s0;
                    }
                }
            }
            dbias[co] = bsum;
        }
    });

    // dx: one task per (sample, input channel); full cross-correlation of
    // the padded upstream gradient with the flipped kernel
    T* dxb = dx.data.data();
    parallel_for(static_cast<size_t>(x.n) * ci_n, [&](size_t t0, size_t t1) {
        for (size_t t = t0; t < t1; ++t) {
            const int n = static_cast<int>(t / ci_n);
            const int ci = static_cast<int>(t % ci_n);
            T* __restrict__ dxc = dxb + (static_cast<size_t>(n) * ci_n + ci) * dhw;
            for (int co = 0; co < c_out; ++co) {
                const T* dbase = dpad_all.data() + (static_cast<size_t>(n) * c_out + co) * pad_stride + margin;
                const T* wci = wb + (static_cast<size_t>(co) * ci_n + ci) * ksz;
                if (k == 3) {
                    for (int kz = 0; kz < 3; ++kz) {
                        for (int ky = 0; ky < 3; ++ky) {
                            // dx[j] += sum_kx w[kx] * dpad[j - off(kz,ky,kx)]
                            const T* __restrict__ s2 = dbase - static_cast<size_t>(kz) * hw -
                                                       static_cast<size_t>(ky) * x.w - 2;
                            const T* wr = wci + (kz * 3 + ky) * 3;
                            const T w0 = wr[0], w1 = wr[1], w2 = wr[2];
                            for (size_t j = 0; j < dhw; ++j)
                                dxc[j] += w2 * s2[j] + w1 * s2[j + 1] + w0 * s2[j + 2];
                        }
                    }
                } else {
                    const T w0 = wci[0];
                    const T* __restrict__ s0 = dbase;
                    for (size_t j = 0; j < dhw; ++j) dxc[j] += w0 * s0[j];
                }
            }
        }
    });
}

template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, const std::vector<T>& gamma, const std::vector<T>& beta,
                             const std::vector<T>& running_mean, const std::vector<T>& running_var,
                             bool train, T eps, BnStats<T>* stats) {
    if (gamma.size() != static_cast<size_t>(x.c) || beta.size() != static_cast<size_t>(x.c))
        throw ShapeError("batchnorm: gamma/beta channel count mismatch");
    TensorT<T> out(x.n, x.c, x.d, x.h, x.w);
    const size_t vox = x.plane();

    std::vector<T> mean(x.c), var(x.c), invstd(x.c);
    if (train) {
        const double m = static_cast<double>(x.n) * vox;
        parallel_for(static_cast<size_t>(x.c), [&](size_t c0, size_t c1) {
            for (size_t c = c0; c < c1; ++c) {
                double sum = 0;
                for (int n = 0; n < x.n; ++n) {
                    const T* p = x.data.data() + (static_cast<size_t>(n) * x.c + c) * vox;
                    for (size_t i = 0; i < vox; ++i) sum += p[i];
                }
                double mu = sum / m;
                double ss = 0;
                for (int n = 0; n < x.n; ++n) {
                    const T* p = x.data.data() + (static_cast<size_t>(n) * x.c + c) * vox;
                    for (size_t i = 0; i < vox; ++i) {
                        double d = p[i] - mu;
                        ss += d * d;
                    }
                }
                mean[c] = static_cast<T>(mu);
                var[c] = static_cast<T>(ss / m);
                invstd[c] = static_cast<T>(1.0 / std::sqrt(ss / m + static_cast<double>(eps)));
            }
        });
    } else {
        if (running_mean.size() != static_cast<size_t>(x.c) || running_var.size() != static_cast<size_t>(x.c))
            throw ShapeError("batchnorm: running stats channel count mismatch");
        for (int c = 0; c < x.c; ++c) {
            mean[c] = running_mean[c];
            var[c] = running_var[c];
            invstd[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var[c]) + static_cast<double>(eps)));
        }
    }

    parallel_for(static_cast<size_t>(x.n) * x.c, [&](size_t t0, size_t t1) {
        for (size_t t = t0; t < t1; ++t) {
            const size_t c = t % x.c;
            const T* p = x.data.data() + t * vox;
            T* q = out.data.data() + t * vox;
            const T mu = mean[c], is = invstd[c], g = gamma[c], b = beta[c];
            for (size_t i = 0; i < vox; ++i) q[i] = (p[i] - mu) * is * g + b;
        }
    });

    if (stats) {
        stats->mean = std::move(mean);
        stats->var = std::move(var);
        stats->invstd = std::move(invstd);
    }
    return out;
}

template <typename T>
void batchnorm_backward(const TensorT<T>& x, const std::vector<T>& gamma, const BnStats<T>& stats,
                        const TensorT<T>& dout, TensorT<T>& dx, std::vector<T>& dgamma,
                        std::vector<T>& dbeta) {
    if (!x.same_shape(dout)) throw ShapeError("batchnorm backward: dout shape mismatch");
    dx = TensorT<T>(x.n, x.c, x.d, x.h, x.w);
    dgamma.assign(x.c, T(0));
    dbeta.assign(x.c, T(0));
    const size_t vox = x.plane();
    const double m = static_cast<double>(x.n) * vox;

    parallel_for(static_cast<size_t>(x.c), [&](size_t c0, size_t c1) {
        for (size_t c = c0; c < c1; ++c) {
            const double mu = stats.mean[c], is = stats.invstd[c];
            double sum_d = 0, sum_dx = 0, sum_xm = 0;
            for (int n = 0; n < x.n; ++n) {
                const size_t base = (static_cast<size_t>(n) * x.c + c) * vox;
                const T* px = x.data.data() + base;
                const T* pd = dout.data.data() + base;
                for (size_t i = 0; i < vox; ++i) {
                    double xm = px[i] - mu;
                    sum_d += pd[i];
                    sum_dx += pd[i] * xm;
                    sum_xm += xm;
                }
            }
            dgamma[c] = static_cast<T>(sum_dx * is);
            dbeta[c] = static_cast<T>(sum_d);

            const double g = gamma[c];
            // dvar and dmean of the batch-statistics normalization
            const double dvar = g * sum_dx * (-0.5) * is * is * is;
            const double dmu = -g * is * sum_d + dvar * (-2.0 / m) * sum_xm;
            for (int n = 0; n < x.n; ++n) {
                const size_t base = (static_cast<size_t>(n) * x.c + c) * vox;
                const T* px = x.data.data() + base;
                const T* pd = dout.data.data() + base;
                T* pq = dx.data.data() + base;
                for (size_t i = 0; i < vox; ++i) {
                    double xm = px[i] - mu;
                    pq[i] = static_cast<T>(g * is * pd[i] + dvar * 2.0 * xm / m + dmu / m);
                }
            }
        }
    });
}

template <typename T>
TensorT<T> activation_forward(const TensorT<T>& x, const std::vector<T>& slopes, bool prelu) {
    if (prelu && slopes.size() != static_cast<size_t>(x.c))
        throw ShapeError("activation: slope count mismatch");
    TensorT<T> out(x.n, x.c, x.d, x.h, x.w);
    const size_t vox = x.plane();
    parallel_for(static_cast<size_t>(x.n) * x.c, [&](size_t t0, size_t t1) {
        for (size_t t = t0; t < t1; ++t) {
            const T a = prelu ? slopes[t % x.c] : T(0);
            const T* p = x.data.data() + t * vox;
            T* q = out.data.data() + t * vox;
            for (size_t i = 0; i < vox; ++i) q[i] = p[i] >= T(0) ? p[i] : a * p[i];
        }
    });
    return out;
}

template <typename T>
void activation_backward(const TensorT<T>& x, const std::vector<T>& slopes, bool prelu,
                         const TensorT<T>& dout, TensorT<T>& dx, std::vector<T>* dslopes) {
    if (!x.same_shape(dout)) throw ShapeError("activation backward: dout shape mismatch");
    dx = TensorT<T>(x.n, x.c, x.d, x.h, x.w);
    if (dslopes) dslopes->assign(x.c, T(0));
    const size_t vox = x.plane();
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            const size_t base = (static_cast<size_t>(n) * x.c + c) * vox;
            const T a = prelu ? slopes[c] : T(0);
            const T* px = x.data.data() + base;
            const T* pd = dout.data.data() + base;
            T* pq = dx.data.data() + base;
            double da = 0;
            for (size_t i = 0; i < vox; ++i) {
                if (px[i] >= T(0)) {
                    pq[i] = pd[i];
                } else {
                    pq[i] = a * pd[i];
                    da += static_cast<double>(pd[i]) * px[i];
                }
            }
            if (dslopes && prelu) (*dslopes)[c] += static_cast<T>(da);
        }
    }
}

template <typename T>
TensorT<T> residual_add(const TensorT<T>& deep, const TensorT<T>& shallow) {
    if (deep.n != shallow.n) throw ShapeError("residual: batch mismatch");
    int off[3];
    const int ds[3] = {deep.d, deep.h, deep.w};
    const int ss[3] = {shallow.d, shallow.h, shallow.w};
    for (int a = 0; a < 3; ++a) {
        int diff = ss[a] - ds[a];
        if (diff < 0) throw ShapeError("residual: shallow spatial smaller than deep");
        if (diff % 2 != 0) throw ShapeError("residual: spatial difference must be even, got " + std::to_string(diff));
        off[a] = diff / 2;
    }
    TensorT<T> out = deep;
    const int cc = std::min(deep.c, shallow.c);
    for (int n = 0; n < deep.n; ++n)
        for (int c = 0; c < cc; ++c)
            for (int z = 0; z < deep.d; ++z)
                for (int y = 0; y < deep.h; ++y) {
                    T* orow = out.data.data() + out.idx(n, c, z, y, 0);
                    const T* srow = shallow.data.data() + shallow.idx(n, c, z + off[0], y + off[1], off[2]);
                    for (int xx = 0; xx < deep.w; ++xx) orow[xx] += srow[xx];
                }
    return out;
}

template <typename T>
TensorT<T> residual_add_backward_shallow(const TensorT<T>& dout, int shallow_c,
                                         std::array<int, 3> shallow_spatial) {
    TensorT<T> ds(dout.n, shallow_c, shallow_spatial[0], shallow_spatial[1], shallow_spatial[2]);
    int off[3] = {(shallow_spatial[0] - dout.d) / 2, (shallow_spatial[1] - dout.h) / 2,
                  (shallow_spatial[2] - dout.w) / 2};
    const int cc = std::min(dout.c, shallow_c);
    for (int n = 0; n < dout.n; ++n)
        for (int c = 0; c < cc; ++c)
            for (int z = 0; z < dout.d; ++z)
                for (int y = 0; y < dout.h; ++y) {
                    const T* drow = dout.data.data() + dout.idx(n, c, z, y, 0);
                    T* srow = ds.data.data() + ds.idx(n, c, z + off[0], y + off[1], off[2]);
                    for (int xx = 0; xx < dout.w; ++xx) srow[xx] = drow[xx];
                }
    return ds;
}

template <typename T>
TensorT<T> upsample_repeat(const TensorT<T>& x, int k) {
    if (k < 1) throw ShapeError("upsample: factor must be >= 1");
    if (k == 1) return x;
    TensorT<T> out(x.n, x.c, x.d * k, x.h * k, x.w * k);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int z = 0; z < out.d; ++z)
                for (int y = 0; y < out.h; ++y) {
                    const T* xr = x.data.data() + x.idx(n, c, z / k, y / k, 0);
                    T* orow = out.data.data() + out.idx(n, c, z, y, 0);
                    for (int xx = 0; xx < out.w; ++xx) orow[xx] = xr[xx / k];
                }
    return out;
}

template <typename T>
TensorT<T> upsample_repeat_backward(const TensorT<T>& dout, int k, std::array<int, 3> in_spatial) {
    if (k == 1) return dout;
    TensorT<T> dx(dout.n, dout.c, in_spatial[0], in_spatial[1], in_spatial[2]);
    for (int n = 0; n < dout.n; ++n)
        for (int c = 0; c < dout.c; ++c)
            for (int z = 0; z < dout.d; ++z)
                for (int y = 0; y < dout.h; ++y) {
                    const T* drow = dout.data.data() + dout.idx(n, c, z, y, 0);
                    T* xr = dx.data.data() + dx.idx(n, c, z / k, y / k, 0);
                    for (int xx = 0; xx < dout.w; ++xx) xr[xx / k] += drow[xx];
                }
    return dx;
}

template <typename T>
TensorT<T> center_crop(const TensorT<T>& x, int side) {
    if (side > x.d || side > x.h || side > x.w)
        throw ShapeError("center_crop: side " + std::to_string(side) + " exceeds input spatial dims");
    if (side == x.d && side == x.h && side == x.w) return x;
    const int oz = (x.d - side) / 2, oy = (x.h - side) / 2, ox = (x.w - side) / 2;
    TensorT<T> out(x.n, x.c, side, side, side);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int z = 0; z < side; ++z)
                for (int y = 0; y < side; ++y) {
                    const T* xr = x.data.data() + x.idx(n, c, z + oz, y + oy, ox);
                    T* orow = out.data.data() + out.idx(n, c, z, y, 0);
                    std::copy(xr, xr + side, orow);
                }
    return out;
}

template <typename T>
TensorT<T> center_crop_backward(const TensorT<T>& dout, std::array<int, 3> in_spatial) {
    TensorT<T> dx(dout.n, dout.c, in_spatial[0], in_spatial[1], in_spatial[2]);
    const int oz = (in_spatial[0] - dout.d) / 2, oy = (in_spatial[1] - dout.h) / 2,
              ox = (in_spatial[2] - dout.w) / 2;
    for (int n = 0; n < dout.n; ++n)
        for (int c = 0; c < dout.c; ++c)
            for (int z = 0; z < dout.d; ++z)
                for (int y = 0; y < dout.h; ++y) {
                    const T* drow = dout.data.data() + dout.idx(n, c, z, y, 0);
                    T* xr = dx.data.data() + dx.idx(n, c, z + oz, y + oy, ox);
                    std::copy(drow, drow + dout.w, xr);
                }
    return dx;
}

template <typename T>
T softmax_cross_entropy(const TensorT<T>& logits, const std::vector<uint8_t>& targets,
                        TensorT<T>& dlogits) {
    const size_t vox = logits.plane();
    if (targets.size() != static_cast<size_t>(logits.n) * vox)
        throw ShapeError("softmax_ce: target count mismatch");
    dlogits = TensorT<T>(logits.n, logits.c, logits.d, logits.h, logits.w);
    const double count = static_cast<double>(logits.n) * vox;
    double loss = 0;
    std::vector<double> e(logits.c);
    for (int n = 0; n < logits.n; ++n) {
        for (size_t i = 0; i < vox; ++i) {
            const uint8_t t = targets[static_cast<size_t>(n) * vox + i];
            if (t >= logits.c)
                throw ValidationError("softmax_ce: label " + std::to_string(int(t)) + " out of range");
            double mx = -1e300;
            for (int c = 0; c < logits.c; ++c)
                mx = std::max(mx, static_cast<double>(logits.data[(static_cast<size_t>(n) * logits.c + c) * vox + i]));
            double zsum = 0;
            for (int c = 0; c < logits.c; ++c) {
                e[c] = std::exp(static_cast<double>(logits.data[(static_cast<size_t>(n) * logits.c + c) * vox + i]) - mx);
                zsum += e[c];
            }
            loss += -(static_cast<double>(logits.data[(static_cast<size_t>(n) * logits.c + t) * vox + i]) - mx -
                      std::log(zsum));
            for (int c = 0; c < logits.c; ++c) {
                double p = e[c] / zsum;
                dlogits.data[(static_cast<size_t>(n) * logits.c + c) * vox + i] =
                    static_cast<T>((p - (c == t ? 1.0 : 0.0)) / count);
            }
        }
    }
    return static_cast<T>(loss / count);
}

template <typename T>
TensorT<T> softmax_channels(const TensorT<T>& logits) {
    TensorT<T> out(logits.n, logits.c, logits.d, logits.h, logits.w);
    const size_t vox = logits.plane();
    std::vector<double> e(logits.c);
    for (int n = 0; n < logits.n; ++n) {
        for (size_t i = 0; i < vox; ++i) {
            double mx = -1e300;
            for (int c = 0; c < logits.c; ++c)
                mx = std::max(mx, static_cast<double>(logits.data[(static_cast<size_t>(n) * logits.c + c) * vox + i]));
            double zsum = 0;
            for (int c = 0; c < logits.c; ++c) {
                e[c] = std::exp(static_cast<double>(logits.data[(static_cast<size_t>(n) * logits.c + c) * vox + i]) - mx);
                zsum += e[c];
            }
            for (int c = 0; c < logits.c; ++c)
                out.data[(static_cast<size_t>(n) * logits.c + c) * vox + i] = static_cast<T>(e[c] / zsum);
        }
    }
    return out;
}

#define USSEG_INSTANTIATE_LAYERS(T)                                                                        \
    template TensorT<T> conv3d_valid<T>(const TensorT<T>&, const std::vector<T>&, const std::vector<T>&,  \
                                        int, int);                                                        \
    template void conv3d_backward<T>(const TensorT<T>&, const std::vector<T>&, int, int, const TensorT<T>&, \
                                     TensorT<T>&, std::vector<T>&, std::vector<T>&);                      \
    template TensorT<T> batchnorm_forward<T>(const TensorT<T>&, const std::vector<T>&, const std::vector<T>&, \
                                             const std::vector<T>&, const std::vector<T>&, bool, T,       \
                                             BnStats<T>*);                                                \
    template void batchnorm_backward<T>(const TensorT<T>&, const std::vector<T>&, const BnStats<T>&,      \
                                        const TensorT<T>&, TensorT<T>&, std::vector<T>&, std::vector<T>&); \
    template TensorT<T> activation_forward<T>(const TensorT<T>&, const std::vector<T>&, bool);            \
    template void activation_backward<T>(const TensorT<T>&, const std::vector<T>&, bool, const TensorT<T>&, \
                                         TensorT<T>&, std::vector<T>*);                                   \
    template TensorT<T> residual_add<T>(const TensorT<T>&, const TensorT<T>&);                            \
    template TensorT<T> residual_add_backward_shallow<T>(const TensorT<T>&, int, std::array<int, 3>);     \
    template TensorT<T> upsample_repeat<T>(const TensorT<T>&, int);                                       \
    template TensorT<T> upsample_repeat_backward<T>(const TensorT<T>&, int, std::array<int, 3>);          \
    template TensorT<T> center_crop<T>(const TensorT<T>&, int);                                           \
    template TensorT<T> center_crop_backward<T>(const TensorT<T>&, std::array<int, 3>);                   \
    template T softmax_cross_entropy<T>(const TensorT<T>&, const std::vector<uint8_t>&, TensorT<T>&);     \
    template TensorT<T> softmax_channels<T>(const TensorT<T>&);

USSEG_INSTANTIATE_LAYERS(float)
USSEG_INSTANTIATE_LAYERS(double)

} // namespace usseg
