#include "usseg/predict.hpp"

#include <algorithm>

#include "usseg/errors.hpp"

namespace usseg {

ProbabilityMap predict_volume(const Network& net, const Volume& vol, const Mask& mask,
                              const PatchGeometry& geo, const PredictOptions& opt) {
    if (!same_grid(vol.dims, mask.dims)) throw ValidationError("predict: mask dims mismatch");
    geo.validate();
    const int ob = geo.out_block;
    const size_t ob3 = static_cast<size_t>(ob) * ob * ob;
    auto centers = dense_tiling(vol.dims, ob);

    ProbabilityMap pm;
    pm.dims = vol.dims;
    pm.probs.assign(3 * pm.voxels(), 0.0f);

    // per-block class probabilities, indexed by canonical center order
    std::vector<float> block_probs(centers.size() * 3 * ob3);

    const int bb = std::max(1, opt.block_batch);
    const size_t nbatches = (centers.size() + bb - 1) / bb;
    for (size_t bi = 0; bi < nbatches; ++bi) {
        size_t batch_idx = opt.reverse_compute ? nbatches - 1 - bi : bi;
        size_t c0 = batch_idx * bb;
        size_t c1 = std::min(c0 + bb, centers.size());
        int n = static_cast<int>(c1 - c0);

        Tensor p1(n, 1, geo.normal_size, geo.normal_size, geo.normal_size);
        Tensor p3(n, 1, geo.sub_size, geo.sub_size, geo.sub_size);
        Tensor p5(n, 1, geo.sub_size, geo.sub_size, geo.sub_size);
        const size_t s1 = p1.plane(), s3 = p3.plane();
        for (int j = 0; j < n; ++j)
            extract_patches(vol, centers[c0 + j], geo, p1.data.data() + j * s1,
                            p3.data.data() + j * s3, p5.data.data() + j * s3);

        Tensor logits = forward(net, p1, p3, p5, Mode::infer);
        if (logits.c != 3 || logits.d != ob || logits.h != ob || logits.w != ob)
            throw ShapeError("predict: network emits " + std::to_string(logits.c) + "x" +
                             std::to_string(logits.d) + "^3 blocks, tiling expects 3x" + std::to_string(ob) + "^3");
        Tensor probs = softmax_channels(logits);
        for (int j = 0; j < n; ++j)
            std::copy(probs.data.begin() + static_cast<size_t>(j) * 3 * ob3,
                      probs.data.begin() + static_cast<size_t>(j + 1) * 3 * ob3,
                      block_probs.begin() + (c0 + j) * 3 * ob3);
    }

    // canonical-order commit: voxels covered twice take the later block
    const int half = (ob - 1) / 2;
    for (size_t c = 0; c < centers.size(); ++c) {
        const float* bp = block_probs.data() + c * 3 * ob3;
        const auto& ctr = centers[c];
        for (int dz = -half; dz <= half; ++dz)
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    size_t bidx = (static_cast<size_t>(dz + half) * ob + (dy + half)) * ob + (dx + half);
                    size_t vidx = vol.index(ctr[0] + dx, ctr[1] + dy, ctr[2] + dz);
                    for (int l = 0; l < 3; ++l) pm.probs[3 * vidx + l] = bp[l * ob3 + bidx];
                }
    }

    for (size_t i = 0; i < pm.voxels(); ++i) {
        if (!mask.bits[i]) {
            pm.probs[3 * i] = 1.0f;
            pm.probs[3 * i + 1] = 0.0f;
            pm.probs[3 * i + 2] = 0.0f;
        }
    }
    return pm;
}

} // namespace usseg
