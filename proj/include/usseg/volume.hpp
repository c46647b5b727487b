#ifndef USSEG_VOLUME_HPP
#define USSEG_VOLUME_HPP

#include <array>
#include <cstdint>
#include <vector>

namespace usseg {

// 3D scalar grid. Linear order is x-fastest (x, then y, then z) everywhere
// in this project.
struct Volume {
    std::array<int, 3> dims{0, 0, 0};          // nx, ny, nz
    std::array<double, 3> spacing{1.0, 1.0, 1.0}; // mm per voxel
    std::array<double, 3> origin{0.0, 0.0, 0.0};  // mm
    std::vector<float> data;

    size_t voxels() const { return static_cast<size_t>(dims[0]) * dims[1] * dims[2]; }
    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(x) + static_cast<size_t>(dims[0]) * (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * z);
    }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }
};

// Per-voxel labels: 0 = background, 1 = grey matter, 2 = white matter.
struct LabelMap {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    std::vector<uint8_t> labels;

    size_t voxels() const { return static_cast<size_t>(dims[0]) * dims[1] * dims[2]; }
    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(x) + static_cast<size_t>(dims[0]) * (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * z);
    }
    uint8_t& at(int x, int y, int z) { return labels[index(x, y, z)]; }
    uint8_t at(int x, int y, int z) const { return labels[index(x, y, z)]; }
};

struct Mask {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<uint8_t> bits;

    size_t voxels() const { return static_cast<size_t>(dims[0]) * dims[1] * dims[2]; }
    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(x) + static_cast<size_t>(dims[0]) * (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * z);
    }
    bool at(int x, int y, int z) const { return bits[index(x, y, z)] != 0; }
    size_t count() const;
};

// Throw ValidationError on broken invariants (size mismatch, non-positive
// spacing, non-finite values / labels outside {0,1,2}).
void validate(const Volume& v);
void validate(const LabelMap& lm);

bool same_grid(const std::array<int, 3>& a, const std::array<int, 3>& b);

} // namespace usseg

#endif
