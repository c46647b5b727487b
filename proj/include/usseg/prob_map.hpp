#ifndef USSEG_PROB_MAP_HPP
#define USSEG_PROB_MAP_HPP

#include <array>
#include <string>
#include <vector>

#include "usseg/volume.hpp"

namespace usseg {

// Per-voxel class distribution over (BG, GM, WM). Storage is
// channel-fastest: probs[3*i + l] for linear voxel i (x-fastest).
struct ProbabilityMap {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<float> probs;

    size_t voxels() const { return static_cast<size_t>(dims[0]) * dims[1] * dims[2]; }
    float& at(size_t voxel, int label) { return probs[3 * voxel + label]; }
    float at(size_t voxel, int label) const { return probs[3 * voxel + label]; }
};

// Throws ValidationError unless every 3-vector is non-negative and sums to
// 1 within 1e-5.
void validate(const ProbabilityMap& pm);

// File form: <stem>.json sidecar {dims, channels: 3, dtype: "f32",
// layout: "channel-fastest"} plus <stem>.raw with the packed floats.
ProbabilityMap read_prob_map(const std::string& path);
void write_prob_map(const ProbabilityMap& pm, const std::string& path);

} // namespace usseg

#endif
