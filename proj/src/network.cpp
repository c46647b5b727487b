#include "usseg/network.hpp"

#include <algorithm>
#include <cmath>

#include "usseg/errors.hpp"

namespace usseg {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "prelu") return Activation::prelu;
    throw ConfigError("unknown activation '" + s + "' (relu or prelu)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "prelu"; }

void NetworkConfig::validate() const {
    if (pathway_widths.empty()) throw ConfigError("pathway_widths must not be empty");
    if (head_widths.size() < 2) throw ConfigError("head_widths needs at least two layers");
    for (int w : pathway_widths)
        if (w < 1) throw ConfigError("pathway widths must be positive");
    for (int w : head_widths)
        if (w < 1) throw ConfigError("head widths must be positive");
    if (factors[0] != 1) throw ConfigError("first pathway factor must be 1");
    if (!(bn_eps > 0)) throw ConfigError("bn_eps must be positive");
    if (bn_momentum < 0 || bn_momentum > 1) throw ConfigError("bn_momentum must be in [0,1]");
}

namespace {

template <typename T>
ConvBlockT<T> make_block(int c_in, int c_out, int k, bool has_bn, bool has_act, double prelu_init,
                         Rng& rng) {
    ConvBlockT<T> b;
    b.c_in = c_in;
    b.c_out = c_out;
    b.k = k;
    b.has_bn = has_bn;
    b.has_act = has_act;
    size_t wn = static_cast<size_t>(c_out) * c_in * k * k * k;
    b.weights.resize(wn);
    double std = std::sqrt(2.0 / (static_cast<double>(c_in) * k * k * k));
    for (size_t i = 0; i < wn; ++i) b.weights[i] = static_cast<T>(rng.normal() * std);
    b.bias.assign(c_out, T(0));
    if (has_bn) {
        b.bn_gamma.assign(c_out, T(1));
        b.bn_beta.assign(c_out, T(0));
        b.bn_running_mean.assign(c_out, T(0));
        b.bn_running_var.assign(c_out, T(1));
    }
    if (has_act) b.act_slope.assign(c_out, static_cast<T>(prelu_init));
    return b;
}

} // namespace

template <typename T>
NetworkT<T> make_network(const NetworkConfig& config, Rng& rng) {
    config.validate();
    NetworkT<T> net;
    net.config = config;
    for (int p = 0; p < 3; ++p) {
        int c_in = 1;
        for (int w : config.pathway_widths) {
            net.pathways[p].push_back(make_block<T>(c_in, w, 3, true, true, config.prelu_init, rng));
            c_in = w;
        }
    }
    int c_in = 3 * config.pathway_widths.back();
    for (size_t l = 0; l < config.head_widths.size(); ++l) {
        bool last = l + 1 == config.head_widths.size();
        int k = l == 0 ? 3 : 1;
        net.head.push_back(make_block<T>(c_in, config.head_widths[l], k, !last, !last, config.prelu_init, rng));
        c_in = config.head_widths[l];
    }
    return net;
}

template <typename T>
NetworkT<T> clone_zero(const NetworkT<T>& net) {
    NetworkT<T> out = net;
    auto zero_block = [](ConvBlockT<T>& b) {
        std::fill(b.weights.begin(), b.weights.end(), T(0));
        std::fill(b.bias.begin(), b.bias.end(), T(0));
        std::fill(b.bn_gamma.begin(), b.bn_gamma.end(), T(0));
        std::fill(b.bn_beta.begin(), b.bn_beta.end(), T(0));
        std::fill(b.bn_running_mean.begin(), b.bn_running_mean.end(), T(0));
        std::fill(b.bn_running_var.begin(), b.bn_running_var.end(), T(0));
        std::fill(b.act_slope.begin(), b.act_slope.end(), T(0));
    };
    for (auto& pw : out.pathways)
        for (auto& b : pw) zero_block(b);
    for (auto& b : out.head) zero_block(b);
    return out;
}

namespace {

template <typename T>
TensorT<T> apply_block(const ConvBlockT<T>& block, const TensorT<T>& x, bool prelu, T eps, Mode mode,
                       BlockCache<T>* cache, const std::string& stage) {
    try {
        TensorT<T> z = conv3d_valid(x, block.weights, block.bias, block.c_out, block.k);
        TensorT<T> t;
        if (block.has_bn) {
            t = batchnorm_forward(z, block.bn_gamma, block.bn_beta, block.bn_running_mean,
                                  block.bn_running_var, mode == Mode::train, eps,
                                  cache ? &cache->stats : nullptr);
        } else {
            t = z;
        }
        TensorT<T> y = block.has_act ? activation_forward(t, block.act_slope, prelu) : t;
        if (cache) {
            cache->conv = std::move(z);
            if (block.has_bn || block.has_act) cache->bn = std::move(t);
        }
        return y;
    } catch (const ShapeError& e) {
        throw ShapeError(stage + ": " + e.what());
    }
}

} // namespace

template <typename T>
TensorT<T> forward(const NetworkT<T>& net, const TensorT<T>& p1, const TensorT<T>& p3,
                   const TensorT<T>& p5, Mode mode, ForwardCache<T>* cache) {
    const bool prelu = net.config.activation == Activation::prelu;
    const T eps = static_cast<T>(net.config.bn_eps);
    const TensorT<T>* inputs[3] = {&p1, &p3, &p5};
    if (p1.n != p3.n || p1.n != p5.n) throw ShapeError("input: batch size mismatch across pathways");
    for (int p = 0; p < 3; ++p)
        if (inputs[p]->c != 1) throw ShapeError("input: pathway " + std::to_string(p + 1) + " must have 1 channel");
    if (p3.d != p5.d || p3.h != p5.h || p3.w != p5.w)
        throw ShapeError("input: subsampled patches must share their size");

    const bool keep = cache != nullptr && mode == Mode::train;
    const int L = static_cast<int>(net.pathways[0].size());

    std::array<TensorT<T>, 3> merged;
    int concat_side = -1;

    for (int p = 0; p < 3; ++p) {
        PathwayCache<T>* pc = keep ? &cache->pathways[p] : nullptr;
        if (pc) {
            pc->xs.clear();
            pc->blocks.resize(L);
        }
        TensorT<T> x = *inputs[p];
        std::vector<TensorT<T>> local_xs; // shallow residual sources when not caching
        if (!pc) local_xs.resize(L);
        for (int b = 0; b < L; ++b) {
            const std::string stage = "pathway " + std::to_string(p + 1) + " layer " + std::to_string(b + 1);
            const TensorT<T>* xin;
            if (pc) {
                pc->xs.push_back(std::move(x));
                xin = &pc->xs.back();
            } else {
                // x_b feeds the skip connection of block b+1
                if (b + 2 <= L && is_residual_layer(b + 2)) local_xs[b] = x;
                xin = &x;
            }
            TensorT<T> y = apply_block(net.pathways[p][b], *xin, prelu, eps, mode, pc ? &pc->blocks[b] : nullptr, stage);
            if (is_residual_layer(b + 1)) {
                const TensorT<T>& shallow = pc ? pc->xs[b - 1] : local_xs[b - 1];
                if (shallow.size() == 0) throw ShapeError(stage + " residual: missing shallow input");
                try {
                    y = residual_add(y, shallow);
                } catch (const ShapeError& e) {
                    throw ShapeError(stage + " residual: " + e.what());
                }
            }
            x = std::move(y);
        }

        int factor = net.config.factors[p];
        if (p == 0) {
            concat_side = x.d;
            if (x.d != x.h || x.d != x.w) throw ShapeError("pathway 1 output: expected cubic output");
            if (pc) {
                pc->out_spatial = x.spatial();
                pc->up_spatial = x.spatial();
                pc->xs.push_back(std::move(x));
                merged[p] = pc->xs.back();
            } else {
                merged[p] = std::move(x);
            }
        } else {
            std::array<int, 3> out_spatial = x.spatial();
            TensorT<T> up;
            try {
                up = upsample_repeat(x, factor);
            } catch (const ShapeError& e) {
                throw ShapeError("pathway " + std::to_string(p + 1) + " upsample (factor " +
                                 std::to_string(factor) + "): " + e.what());
            }
            std::array<int, 3> up_spatial = up.spatial();
            TensorT<T> cropped;
            try {
                cropped = center_crop(up, concat_side);
            } catch (const ShapeError& e) {
                throw ShapeError("pathway " + std::to_string(p + 1) + " crop to concat: " + e.what());
            }
            if (pc) {
                pc->out_spatial = out_spatial;
                pc->up_spatial = up_spatial;
                pc->xs.push_back(std::move(x));
            }
            merged[p] = std::move(cropped);
        }
    }

    // channel concatenation
    for (int p = 1; p < 3; ++p)
        if (merged[p].d != merged[0].d || merged[p].h != merged[0].h || merged[p].w != merged[0].w)
            throw ShapeError("concat: pathway " + std::to_string(p + 1) + " spatial " +
                             std::to_string(merged[p].d) + " != pathway 1 spatial " + std::to_string(merged[0].d));
    TensorT<T> concat(p1.n, merged[0].c + merged[1].c + merged[2].c, merged[0].d, merged[0].h, merged[0].w);
    {
        const size_t vox = concat.plane();
        for (int n = 0; n < concat.n; ++n) {
            size_t coff = 0;
            for (int p = 0; p < 3; ++p) {
                const size_t cn = static_cast<size_t>(merged[p].c) * vox;
                std::copy(merged[p].data.begin() + static_cast<size_t>(n) * cn,
                          merged[p].data.begin() + static_cast<size_t>(n + 1) * cn,
                          concat.data.begin() + (static_cast<size_t>(n) * concat.c) * vox + coff);
                coff += cn;
            }
        }
    }

    const int Lh = static_cast<int>(net.head.size());
    if (keep) {
        cache->head_xs.clear();
        cache->head_blocks.resize(Lh);
    }
    TensorT<T> h = std::move(concat);
    for (int l = 0; l < Lh; ++l) {
        const std::string stage = "head layer " + std::to_string(l + 1);
        if (keep) {
            cache->head_xs.push_back(std::move(h));
            h = apply_block(net.head[l], cache->head_xs.back(), prelu, eps, mode, &cache->head_blocks[l], stage);
        } else {
            h = apply_block(net.head[l], h, prelu, eps, mode, static_cast<BlockCache<T>*>(nullptr), stage);
        }
    }
    return h;
}

namespace {

template <typename T>
void accumulate(TensorT<T>& into, const TensorT<T>& g) {
    if (into.size() == 0) {
        into = g;
        return;
    }
    if (!into.same_shape(g)) throw ShapeError("gradient accumulation: shape mismatch");
    for (size_t i = 0; i < into.data.size(); ++i) into.data[i] += g.data[i];
}

// dy -> gradient w.r.t. block input; fills parameter grads
template <typename T>
TensorT<T> block_backward(const ConvBlockT<T>& block, const TensorT<T>& x, const BlockCache<T>& c,
                          const TensorT<T>& dy, bool prelu, ConvBlockT<T>& g) {
    TensorT<T> dt;
    if (block.has_act) {
        activation_backward(c.bn, block.act_slope, prelu, dy, dt, prelu ? &g.act_slope : nullptr);
    } else {
        dt = dy;
    }
    TensorT<T> dz;
    if (block.has_bn) {
        batchnorm_backward(c.conv, block.bn_gamma, c.stats, dt, dz, g.bn_gamma, g.bn_beta);
    } else {
        dz = std::move(dt);
    }
    TensorT<T> dx;
    conv3d_backward(x, block.weights, block.c_out, block.k, dz, dx, g.weights, g.bias);
    return dx;
}

} // namespace

template <typename T>
NetworkT<T> backward(const NetworkT<T>& net, const ForwardCache<T>& cache, const TensorT<T>& dlogits) {
    const bool prelu = net.config.activation == Activation::prelu;
    NetworkT<T> grads = clone_zero(net);
    const int Lh = static_cast<int>(net.head.size());
    if (cache.head_xs.size() != static_cast<size_t>(Lh)) throw ValidationError("backward: missing forward cache");

    TensorT<T> d = dlogits;
    for (int l = Lh - 1; l >= 0; --l)
        d = block_backward(net.head[l], cache.head_xs[l], cache.head_blocks[l], d, prelu, grads.head[l]);

    // split concat gradient back into pathway slices
    const size_t vox = d.plane();
    const int L = static_cast<int>(net.pathways[0].size());
    int coff = 0;
    for (int p = 0; p < 3; ++p) {
        const PathwayCache<T>& pc = cache.pathways[p];
        const TensorT<T>& pout = pc.xs[L];
        TensorT<T> dmerge(d.n, pout.c, d.d, d.h, d.w);
        for (int n = 0; n < d.n; ++n) {
            const size_t src = (static_cast<size_t>(n) * d.c + coff) * vox;
            std::copy(d.data.begin() + src, d.data.begin() + src + static_cast<size_t>(pout.c) * vox,
                      dmerge.data.begin() + static_cast<size_t>(n) * pout.c * vox);
        }
        coff += pout.c;

        TensorT<T> dpath;
        if (p == 0) {
            dpath = std::move(dmerge);
        } else {
            TensorT<T> dup = center_crop_backward(dmerge, pc.up_spatial);
            dpath = upsample_repeat_backward(dup, net.config.factors[p], pc.out_spatial);
        }

        std::vector<TensorT<T>> dxs(L + 1);
        dxs[L] = std::move(dpath);
        for (int b = L - 1; b >= 0; --b) {
            TensorT<T>& dy = dxs[b + 1];
            if (is_residual_layer(b + 1)) {
                const TensorT<T>& shallow = pc.xs[b - 1];
                accumulate(dxs[b - 1],
                           residual_add_backward_shallow(dy, shallow.c, shallow.spatial()));
            }
            accumulate(dxs[b], block_backward(net.pathways[p][b], pc.xs[b], pc.blocks[b], dy, prelu,
                                              grads.pathways[p][b]));
            dxs[b + 1] = TensorT<T>(); // release
        }
    }
    return grads;
}

template <typename T>
void update_running_stats(NetworkT<T>& net, const ForwardCache<T>& cache) {
    const T mom = static_cast<T>(net.config.bn_momentum);
    auto fold = [mom](ConvBlockT<T>& b, const BlockCache<T>& c) {
        if (!b.has_bn) return;
        for (int j = 0; j < b.c_out; ++j) {
            b.bn_running_mean[j] = mom * b.bn_running_mean[j] + (T(1) - mom) * c.stats.mean[j];
            b.bn_running_var[j] = mom * b.bn_running_var[j] + (T(1) - mom) * c.stats.var[j];
        }
    };
    for (int p = 0; p < 3; ++p)
        for (size_t b = 0; b < net.pathways[p].size(); ++b) fold(net.pathways[p][b], cache.pathways[p].blocks[b]);
    for (size_t l = 0; l < net.head.size(); ++l) fold(net.head[l], cache.head_blocks[l]);
}

#define USSEG_INSTANTIATE_NETWORK(T)                                                                     \
    template NetworkT<T> make_network<T>(const NetworkConfig&, Rng&);                                    \
    template NetworkT<T> clone_zero<T>(const NetworkT<T>&);                                              \
    template TensorT<T> forward<T>(const NetworkT<T>&, const TensorT<T>&, const TensorT<T>&,             \
                                   const TensorT<T>&, Mode, ForwardCache<T>*);                           \
    template NetworkT<T> backward<T>(const NetworkT<T>&, const ForwardCache<T>&, const TensorT<T>&);     \
    template void update_running_stats<T>(NetworkT<T>&, const ForwardCache<T>&);

USSEG_INSTANTIATE_NETWORK(float)
USSEG_INSTANTIATE_NETWORK(double)

} // namespace usseg
