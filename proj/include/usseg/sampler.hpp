#ifndef USSEG_SAMPLER_HPP
#define USSEG_SAMPLER_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "usseg/rng.hpp"
#include "usseg/volume.hpp"

namespace usseg {

// Patch shape bookkeeping for a stack of valid 3x3x3 convolutions plus one
// 3x3x3 head layer:
//   normal_size - conv_shrink - head_shrink == out_block
//   sub_size    - conv_shrink == 3           (pathway output side)
//   3*k >= normal_size - conv_shrink         (upsampled pathway covers the
//                                             concatenated block)
struct PatchGeometry {
    int normal_size = 25;
    int sub_size = 19;
    std::array<int, 2> factors{3, 5};
    int conv_shrink = 16; // 8 layers, each removes 2
    int head_shrink = 2;  // one 3x3x3 head layer
    int out_block = 7;

    void validate() const;
    // geometry for a pathway depth other than 8 (used by reduced test nets)
    static PatchGeometry for_depth(int n_layers, int out_block);
};

// Concentric multi-resolution patches around `center` plus the central
// target label block. All arrays are x-fastest cubes.
struct TrainingSample {
    std::vector<float> p1;       // normal_size^3, native resolution
    std::vector<float> p3;       // sub_size^3, voxels at stride factors[0]
    std::vector<float> p5;       // sub_size^3, voxels at stride factors[1]
    std::vector<uint8_t> target; // out_block^3 labels
    std::array<int, 3> center{0, 0, 0};
};

// Class-balanced center drawing. Precomputes the masked BG and masked
// foreground (GM or WM) voxel lists once; draw() picks BG with probability
// 0.5, otherwise a voxel uniform over the GM/WM union.
class CenterSampler {
public:
    CenterSampler(const LabelMap& lm, const Mask& mask);
    std::array<int, 3> draw(Rng& rng) const;
    size_t background_count() const { return bg_.size(); }
    size_t foreground_count() const { return fg_.size(); }

private:
    std::array<int, 3> dims_;
    std::vector<uint32_t> bg_;
    std::vector<uint32_t> fg_;
};

std::array<int, 3> sample_center(const LabelMap& lm, const Mask& mask, Rng& rng);

// Reads outside the volume yield 0 (intensity and label).
TrainingSample extract_sample(const Volume& vol, const LabelMap& lm, std::array<int, 3> center,
                              const PatchGeometry& geo = PatchGeometry{});

// Intensity patches only (inference path).
void extract_patches(const Volume& vol, std::array<int, 3> center, const PatchGeometry& geo,
                     float* p1, float* p3, float* p5);

// With probability p_flip, flips all four arrays along one uniformly chosen
// axis; independently with probability p_rot rotates them +90 degrees about
// one uniformly chosen axis. Draw order: flip coin, flip axis, rotation
// coin, rotation axis.
TrainingSample augment(const TrainingSample& s, Rng& rng, double p_flip = 0.5, double p_rot = 0.5,
                       const PatchGeometry& geo = PatchGeometry{});

// Deterministic transforms, exposed for tests.
void flip_cube_f32(std::vector<float>& a, int side, int axis);
void flip_cube_u8(std::vector<uint8_t>& a, int side, int axis);
void rotate_cube_f32(std::vector<float>& a, int side, int axis);
void rotate_cube_u8(std::vector<uint8_t>& a, int side, int axis);

// Centers of out_block^3 output blocks covering every voxel; edge blocks
// are clamped so the block stays in-volume, and a voxel covered twice
// belongs to the later block in the returned order.
std::vector<std::array<int, 3>> dense_tiling(std::array<int, 3> dims, int out_block = 7);

} // namespace usseg

#endif
