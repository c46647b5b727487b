#ifndef USSEG_PREDICT_HPP
#define USSEG_PREDICT_HPP

#include "usseg/network.hpp"
#include "usseg/prob_map.hpp"
#include "usseg/sampler.hpp"
#include "usseg/volume.hpp"

namespace usseg {

struct PredictOptions {
    int block_batch = 24;        // tiling centers per forward pass
    bool reverse_compute = false; // compute blocks in reverse order (result is identical)
};

// Dense tiled inference. vol must be standardized; patches read outside the
// volume are zero-filled. Voxels outside the mask are forced to BG
// probability 1. Block results are committed in canonical tiling order, so
// the output does not depend on the compute/traversal order.
ProbabilityMap predict_volume(const Network& net, const Volume& vol, const Mask& mask,
                              const PatchGeometry& geo = PatchGeometry{},
                              const PredictOptions& opt = PredictOptions{});

} // namespace usseg
#endif
