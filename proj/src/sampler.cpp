#include "usseg/sampler.hpp"

#include <string>

#include "usseg/errors.hpp"

namespace usseg {

void PatchGeometry::validate() const {
    if (normal_size % 2 == 0 || sub_size % 2 == 0 || out_block % 2 == 0)
        throw ValidationError("patch geometry: sizes must be odd");
    if (normal_size - conv_shrink - head_shrink != out_block)
        throw ValidationError("patch geometry: normal_size - conv_shrink - head_shrink != out_block");
    if (sub_size - conv_shrink != 3)
        throw ValidationError("patch geometry: sub_size - conv_shrink != 3");
    for (int k : factors)
        if (3 * k < normal_size - conv_shrink)
            throw ValidationError("patch geometry: upsampled pathway (factor " + std::to_string(k) +
                                  ") does not cover the concatenated block");
}

PatchGeometry PatchGeometry::for_depth(int n_layers, int out_block) {
    PatchGeometry g;
    g.conv_shrink = 2 * n_layers;
    g.head_shrink = 2;
    g.out_block = out_block;
    g.sub_size = g.conv_shrink + 3;
    g.normal_size = out_block + g.conv_shrink + g.head_shrink;
    g.validate();
    return g;
}

CenterSampler::CenterSampler(const LabelMap& lm, const Mask& mask) : dims_(lm.dims) {
    if (!same_grid(lm.dims, mask.dims)) throw ValidationError("center sampler: mask dims mismatch");
    for (size_t i = 0; i < lm.labels.size(); ++i) {
        if (!mask.bits[i]) continue;
        if (lm.labels[i] == 0)
            bg_.push_back(static_cast<uint32_t>(i));
        else
            fg_.push_back(static_cast<uint32_t>(i));
    }
    if (bg_.empty()) throw SamplingError("no masked background (label 0) voxels");
    if (fg_.empty()) throw SamplingError("no masked foreground (label 1 or 2) voxels");
}

std::array<int, 3> CenterSampler::draw(Rng& rng) const {
    bool take_bg = rng.uniform() < 0.5;
    const auto& pool = take_bg ? bg_ : fg_;
    uint32_t lin = pool[rng.index(pool.size())];
    int x = static_cast<int>(lin % dims_[0]);
    int y = static_cast<int>((lin / dims_[0]) % dims_[1]);
    int z = static_cast<int>(lin / (static_cast<size_t>(dims_[0]) * dims_[1]));
    return {x, y, z};
}

std::array<int, 3> sample_center(const LabelMap& lm, const Mask& mask, Rng& rng) {
    return CenterSampler(lm, mask).draw(rng);
}

namespace {

inline float read_or_zero(const Volume& v, int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= v.dims[0] || y >= v.dims[1] || z >= v.dims[2]) return 0.0f;
    return v.at(x, y, z);
}

inline uint8_t read_or_zero(const LabelMap& lm, int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= lm.dims[0] || y >= lm.dims[1] || z >= lm.dims[2]) return 0;
    return lm.at(x, y, z);
}

void fill_patch(const Volume& vol, std::array<int, 3> c, int side, int stride, float* out) {
    int half = (side - 1) / 2;
    size_t i = 0;
    for (int dz = -half; dz <= half; ++dz)
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx)
                out[i++] = read_or_zero(vol, c[0] + dx * stride, c[1] + dy * stride, c[2] + dz * stride);
}

} // namespace

TrainingSample extract_sample(const Volume& vol, const LabelMap& lm, std::array<int, 3> center,
                              const PatchGeometry& geo) {
    if (!same_grid(vol.dims, lm.dims)) throw ValidationError("extract_sample: volume/labelmap dims mismatch");
    TrainingSample s;
    s.center = center;
    s.p1.resize(static_cast<size_t>(geo.normal_size) * geo.normal_size * geo.normal_size);
    s.p3.resize(static_cast<size_t>(geo.sub_size) * geo.sub_size * geo.sub_size);
    s.p5.resize(s.p3.size());
    fill_patch(vol, center, geo.normal_size, 1, s.p1.data());
    fill_patch(vol, center, geo.sub_size, geo.factors[0], s.p3.data());
    fill_patch(vol, center, geo.sub_size, geo.factors[1], s.p5.data());

    int half = (geo.out_block - 1) / 2;
    s.target.reserve(static_cast<size_t>(geo.out_block) * geo.out_block * geo.out_block);
    for (int dz = -half; dz <= half; ++dz)
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx)
                s.target.push_back(read_or_zero(lm, center[0] + dx, center[1] + dy, center[2] + dz));
    return s;
}

void extract_patches(const Volume& vol, std::array<int, 3> center, const PatchGeometry& geo,
                     float* p1, float* p3, float* p5) {
    fill_patch(vol, center, geo.normal_size, 1, p1);
    fill_patch(vol, center, geo.sub_size, geo.factors[0], p3);
    fill_patch(vol, center, geo.sub_size, geo.factors[1], p5);
}

namespace {

template <typename T>
void flip_cube(std::vector<T>& a, int side, int axis) {
    auto idx = [side](int x, int y, int z) {
        return static_cast<size_t>(x) + static_cast<size_t>(side) * (static_cast<size_t>(y) + static_cast<size_t>(side) * z);
    };
    std::vector<T> out(a.size());
    for (int z = 0; z < side; ++z)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                int sx = axis == 0 ? side - 1 - x : x;
                int sy = axis == 1 ? side - 1 - y : y;
                int sz = axis == 2 ? side - 1 - z : z;
                out[idx(x, y, z)] = a[idx(sx, sy, sz)];
            }
    a = std::move(out);
}

// +90 degrees about the given axis; applying it four times is the identity
template <typename T>
void rotate_cube(std::vector<T>& a, int side, int axis) {
    auto idx = [side](int x, int y, int z) {
        return static_cast<size_t>(x) + static_cast<size_t>(side) * (static_cast<size_t>(y) + static_cast<size_t>(side) * z);
    };
    std::vector<T> out(a.size());
    const int m = side - 1;
    for (int z = 0; z < side; ++z)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                size_t src;
                if (axis == 0) src = idx(x, z, m - y);
                else if (axis == 1) src = idx(m - z, y, x);
                else src = idx(y, m - x, z);
                out[idx(x, y, z)] = a[src];
            }
    a = std::move(out);
}

} // namespace

void flip_cube_f32(std::vector<float>& a, int side, int axis) { flip_cube(a, side, axis); }
void flip_cube_u8(std::vector<uint8_t>& a, int side, int axis) { flip_cube(a, side, axis); }
void rotate_cube_f32(std::vector<float>& a, int side, int axis) { rotate_cube(a, side, axis); }
void rotate_cube_u8(std::vector<uint8_t>& a, int side, int axis) { rotate_cube(a, side, axis); }

TrainingSample augment(const TrainingSample& s, Rng& rng, double p_flip, double p_rot,
                       const PatchGeometry& geo) {
    TrainingSample out = s;
    if (rng.uniform() < p_flip) {
        int axis = static_cast<int>(rng.index(3));
        flip_cube(out.p1, geo.normal_size, axis);
        flip_cube(out.p3, geo.sub_size, axis);
        flip_cube(out.p5, geo.sub_size, axis);
        flip_cube(out.target, geo.out_block, axis);
    }
    if (rng.uniform() < p_rot) {
        int axis = static_cast<int>(rng.index(3));
        rotate_cube(out.p1, geo.normal_size, axis);
        rotate_cube(out.p3, geo.sub_size, axis);
        rotate_cube(out.p5, geo.sub_size, axis);
        rotate_cube(out.target, geo.out_block, axis);
    }
    return out;
}

std::vector<std::array<int, 3>> dense_tiling(std::array<int, 3> dims, int out_block) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] <= 0) throw ValidationError("dense_tiling: dims must be positive");
        if (dims[a] < out_block)
            throw ValidationError("dense_tiling: dim " + std::to_string(dims[a]) + " smaller than output block " +
                                  std::to_string(out_block));
    }
    std::array<std::vector<int>, 3> starts;
    for (int a = 0; a < 3; ++a) {
        int s = 0;
        for (; s + out_block <= dims[a]; s += out_block) starts[a].push_back(s);
        if (starts[a].back() + out_block < dims[a]) starts[a].push_back(dims[a] - out_block);
    }
    int half = (out_block - 1) / 2;
    std::vector<std::array<int, 3>> centers;
    centers.reserve(starts[0].size() * starts[1].size() * starts[2].size());
    for (int sz : starts[2])
        for (int sy : starts[1])
            for (int sx : starts[0])
                centers.push_back({sx + half, sy + half, sz + half});
    return centers;
}

} // namespace usseg
