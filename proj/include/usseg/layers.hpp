#ifndef USSEG_LAYERS_HPP
#define USSEG_LAYERS_HPP

#include <cstdint>
#include <vector>

#include "usseg/tensor.hpp"

namespace usseg {

// Valid (no padding) cross-correlation with a cubic kernel of side k
// (1 or 3). weights layout (c_out, c_in, k, k, k), bias length c_out.
template <typename T>
TensorT<T> conv3d_valid(const TensorT<T>& x, const std::vector<T>& weights, const std::vector<T>& bias,
                        int c_out, int k);

template <typename T>
void conv3d_backward(const TensorT<T>& x, const std::vector<T>& weights, int c_out, int k,
                     const TensorT<T>& dout, TensorT<T>& dx, std::vector<T>& dweights,
                     std::vector<T>& dbias);

// Per-channel batch statistics captured during a training-mode forward.
template <typename T>
struct BnStats {
    std::vector<T> mean, var, invstd;
};

// Train mode normalizes with batch statistics over (N,D,H,W) and fills
// `stats`; infer mode uses the running statistics. Running statistics are
// never modified here; the trainer folds `stats` in explicitly.
template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, const std::vector<T>& gamma, const std::vector<T>& beta,
                             const std::vector<T>& running_mean, const std::vector<T>& running_var,
                             bool train, T eps, BnStats<T>* stats);

template <typename T>
void batchnorm_backward(const TensorT<T>& x, const std::vector<T>& gamma, const BnStats<T>& stats,
                        const TensorT<T>& dout, TensorT<T>& dx, std::vector<T>& dgamma,
                        std::vector<T>& dbeta);

// kind: prelu=false -> ReLU, prelu=true -> per-channel slopes for x<0.
template <typename T>
TensorT<T> activation_forward(const TensorT<T>& x, const std::vector<T>& slopes, bool prelu);

template <typename T>
void activation_backward(const TensorT<T>& x, const std::vector<T>& slopes, bool prelu,
                         const TensorT<T>& dout, TensorT<T>& dx, std::vector<T>* dslopes);

// out = deep + center-cropped shallow; shallow channels beyond deep's are
// dropped, missing ones act as zero. Spatial difference must be even.
template <typename T>
TensorT<T> residual_add(const TensorT<T>& deep, const TensorT<T>& shallow);

// Gradient of residual_add w.r.t. the shallow input (the deep gradient is
// dout itself).
template <typename T>
TensorT<T> residual_add_backward_shallow(const TensorT<T>& dout, int shallow_c,
                                         std::array<int, 3> shallow_spatial);

template <typename T>
TensorT<T> upsample_repeat(const TensorT<T>& x, int k);

template <typename T>
TensorT<T> upsample_repeat_backward(const TensorT<T>& dout, int k, std::array<int, 3> in_spatial);

// Centered cube of the given side; crop offset is floor((dim-side)/2).
template <typename T>
TensorT<T> center_crop(const TensorT<T>& x, int side);

template <typename T>
TensorT<T> center_crop_backward(const TensorT<T>& dout, std::array<int, 3> in_spatial);

// Mean voxel-wise cross entropy; targets length N*D*H*W, W-fastest per
// sample. dlogits = (softmax - onehot) / (N*D*H*W).
template <typename T>
T softmax_cross_entropy(const TensorT<T>& logits, const std::vector<uint8_t>& targets,
                        TensorT<T>& dlogits);

// Channel softmax per voxel (inference).
template <typename T>
TensorT<T> softmax_channels(const TensorT<T>& logits);

} // namespace usseg

#endif
