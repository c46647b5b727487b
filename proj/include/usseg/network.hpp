#ifndef USSEG_NETWORK_HPP
#define USSEG_NETWORK_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "usseg/layers.hpp"
#include "usseg/rng.hpp"
#include "usseg/tensor.hpp"

namespace usseg {

enum class Activation { relu, prelu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// One conv layer with optional batchnorm + activation. The final head
// layer has neither (raw logits).
template <typename T>
struct ConvBlockT {
    int c_in = 0, c_out = 0, k = 3;
    bool has_bn = true, has_act = true;
    std::vector<T> weights; // (c_out, c_in, k, k, k)
    std::vector<T> bias;    // c_out
    std::vector<T> bn_gamma, bn_beta, bn_running_mean, bn_running_var;
    std::vector<T> act_slope; // PReLU slopes, ignored for ReLU
};

struct NetworkConfig {
    Activation activation = Activation::prelu;
    std::vector<int> pathway_widths{30, 30, 40, 40, 40, 40, 50, 50};
    std::vector<int> head_widths{150, 150, 3}; // first layer 3x3x3, rest 1x1x1, last = logits
    std::array<int, 3> factors{1, 3, 5};
    double bn_eps = 1e-5;
    double bn_momentum = 0.9;
    double prelu_init = 0.25;

    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

// Three identical-topology pathways at sampling factors (1,3,5) feeding a
// concatenation and a fully convolutional head. Residual connections sit
// at pathway layers 4, 6 and 8 (1-based) where the depth allows.
template <typename T>
struct NetworkT {
    NetworkConfig config;
    std::array<std::vector<ConvBlockT<T>>, 3> pathways;
    std::vector<ConvBlockT<T>> head;

    int classes() const { return config.head_widths.back(); }
};

using Network = NetworkT<float>;

inline bool is_residual_layer(int layer_1based) {
    return layer_1based == 4 || layer_1based == 6 || layer_1based == 8;
}

// He-scaled Gaussian weights (std = sqrt(2/fan_in)); zero bias/beta, unit
// gamma, running stats (0,1), slopes = prelu_init. Draw order is fixed:
// pathway 0..2 layer by layer, then the head.
template <typename T>
NetworkT<T> make_network(const NetworkConfig& config, Rng& rng);

template <typename T>
NetworkT<T> clone_zero(const NetworkT<T>& net);

enum class Mode { train, infer };

template <typename T>
struct BlockCache {
    TensorT<T> conv; // conv output, pre-BN
    TensorT<T> bn;   // BN output, pre-activation
    BnStats<T> stats;
};

template <typename T>
struct PathwayCache {
    std::vector<TensorT<T>> xs; // xs[b] = input of block b; xs.back() = pathway output
    std::vector<BlockCache<T>> blocks;
    std::array<int, 3> out_spatial{};
    std::array<int, 3> up_spatial{};
};

template <typename T>
struct ForwardCache {
    std::array<PathwayCache<T>, 3> pathways;
    std::vector<TensorT<T>> head_xs; // head_xs[0] = concat input
    std::vector<BlockCache<T>> head_blocks;
};

// p1 carries the native-resolution patch, p3/p5 the subsampled ones; all
// with C=1. Returns logits (N, classes, s, s, s) where s is the output
// block side implied by the input sizes. Train mode retains intermediate
// activations in `cache`. Shape errors name the failing stage.
template <typename T>
TensorT<T> forward(const NetworkT<T>& net, const TensorT<T>& p1, const TensorT<T>& p3,
                   const TensorT<T>& p5, Mode mode, ForwardCache<T>* cache = nullptr);

// Gradients for every trainable parameter, in a zeroed clone of the
// network. Requires a train-mode cache from forward().
template <typename T>
NetworkT<T> backward(const NetworkT<T>& net, const ForwardCache<T>& cache, const TensorT<T>& dlogits);

// Fold batch statistics from a train-mode forward into the running stats:
// r = momentum * r + (1 - momentum) * batch.
template <typename T>
void update_running_stats(NetworkT<T>& net, const ForwardCache<T>& cache);

// Visits trainable parameter arrays in a fixed order:
// weights, bias, [gamma, beta], [slope] per block. f(name, vec, shape).
template <typename T, typename F>
void for_each_param(NetworkT<T>& net, F&& f) {
    auto visit_block = [&](ConvBlockT<T>& b, const std::string& prefix, bool prelu) {
        f(prefix + ".w", b.weights, std::vector<int>{b.c_out, b.c_in, b.k, b.k, b.k});
        f(prefix + ".b", b.bias, std::vector<int>{b.c_out});
        if (b.has_bn) {
            f(prefix + ".gamma", b.bn_gamma, std::vector<int>{b.c_out});
            f(prefix + ".beta", b.bn_beta, std::vector<int>{b.c_out});
        }
        if (b.has_act && prelu) f(prefix + ".slope", b.act_slope, std::vector<int>{b.c_out});
    };
    bool prelu = net.config.activation == Activation::prelu;
    for (int p = 0; p < 3; ++p)
        for (size_t l = 0; l < net.pathways[p].size(); ++l)
            visit_block(net.pathways[p][l], "p" + std::to_string(p) + ".l" + std::to_string(l + 1), prelu);
    for (size_t l = 0; l < net.head.size(); ++l)
        visit_block(net.head[l], "head.l" + std::to_string(l + 1), prelu);
}

// Trainable parameters plus BN running statistics (checkpoint payload).
template <typename T, typename F>
void for_each_state(NetworkT<T>& net, F&& f) {
    for_each_param(net, f);
    auto visit_block = [&](ConvBlockT<T>& b, const std::string& prefix) {
        if (b.has_bn) {
            f(prefix + ".rmean", b.bn_running_mean, std::vector<int>{b.c_out});
            f(prefix + ".rvar", b.bn_running_var, std::vector<int>{b.c_out});
        }
    };
    for (int p = 0; p < 3; ++p)
        for (size_t l = 0; l < net.pathways[p].size(); ++l)
            visit_block(net.pathways[p][l], "p" + std::to_string(p) + ".l" + std::to_string(l + 1));
    for (size_t l = 0; l < net.head.size(); ++l)
        visit_block(net.head[l], "head.l" + std::to_string(l + 1));
}

template <typename T>
std::vector<std::vector<T>*> trainable_params(NetworkT<T>& net) {
    std::vector<std::vector<T>*> out;
    for_each_param(net, [&](const std::string&, std::vector<T>& v, const std::vector<int>&) {
        out.push_back(&v);
    });
    return out;
}

template <typename T>
size_t count_params(NetworkT<T>& net) {
    size_t n = 0;
    for_each_param(net, [&](const std::string&, std::vector<T>& v, const std::vector<int>&) { n += v.size(); });
    return n;
}

} // namespace usseg

#endif
