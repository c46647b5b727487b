#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "usseg/errors.hpp"
#include "usseg/rng.hpp"
#include "usseg/sampler.hpp"

using namespace usseg;

namespace {

// labelmap with a BG/GM/WM mix and a full mask
std::pair<LabelMap, Mask> mixed_case(std::array<int, 3> dims, uint64_t seed) {
    LabelMap lm;
    lm.dims = dims;
    lm.labels.resize(lm.voxels());
    Rng rng(seed);
    for (auto& l : lm.labels) {
        double u = rng.uniform();
        l = u < 0.3 ? 0 : (u < 0.6 ? 1 : 2);
    }
    Mask m;
    m.dims = dims;
    m.bits.assign(lm.voxels(), 1);
    return {lm, m};
}

Volume ramp_volume(std::array<int, 3> dims) {
    Volume v;
    v.dims = dims;
    v.data.resize(v.voxels());
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x)
                v.at(x, y, z) = static_cast<float>(x);
    return v;
}

} // namespace

TEST_CASE("patch geometry invariants hold for the shipped constants") {
    PatchGeometry g;
    CHECK_NOTHROW(g.validate());
    CHECK(g.normal_size - g.conv_shrink - g.head_shrink == g.out_block);
    CHECK(g.sub_size - g.conv_shrink == 3);
    for (int k : g.factors) CHECK(3 * k >= g.normal_size - g.conv_shrink);
}

TEST_CASE("sample_center: balance over 10000 draws") {
    auto [lm, m] = mixed_case({40, 40, 40}, 11);
    CenterSampler cs(lm, m);
    Rng rng(2024);
    int bg = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        auto c = cs.draw(rng);
        if (lm.at(c[0], c[1], c[2]) == 0) ++bg;
    }
    double frac = double(bg) / n;
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
}

TEST_CASE("sample_center: missing class errors name the class") {
    LabelMap lm;
    lm.dims = {4, 4, 4};
    lm.labels.assign(64, 0);
    Mask m;
    m.dims = lm.dims;
    m.bits.assign(64, 1);
    Rng rng(1);
    CHECK_THROWS_WITH_AS(sample_center(lm, m, rng), doctest::Contains("foreground"), SamplingError);
    lm.labels.assign(64, 2);
    CHECK_THROWS_WITH_AS(sample_center(lm, m, rng), doctest::Contains("background"), SamplingError);
}

TEST_CASE("sample_center: fixed seed reproduces the coordinate sequence") {
    auto [lm, m] = mixed_case({20, 20, 20}, 3);
    CenterSampler cs(lm, m);
    Rng a(77), b(77);
    for (int i = 0; i < 50; ++i) CHECK(cs.draw(a) == cs.draw(b));
}

TEST_CASE("extract_sample: interior center has no zero-filled reads") {
    std::array<int, 3> dims{97, 97, 97};
    Volume v;
    v.dims = dims;
    v.data.assign(v.voxels(), 1.5f);
    LabelMap lm;
    lm.dims = dims;
    lm.labels.assign(v.voxels(), 1);
    auto s = extract_sample(v, lm, {48, 48, 48});
    for (float f : s.p1) CHECK(f == 1.5f);
    for (float f : s.p3) CHECK(f == 1.5f);
    for (float f : s.p5) CHECK(f == 1.5f);
    for (uint8_t t : s.target) CHECK(t == 1);
}

TEST_CASE("extract_sample: stride-3 patch equals index-arithmetic oracle on a ramp") {
    std::array<int, 3> dims{97, 31, 31};
    Volume v = ramp_volume(dims);
    LabelMap lm;
    lm.dims = dims;
    lm.labels.assign(v.voxels(), 0);
    std::array<int, 3> c{48, 15, 15};
    auto s = extract_sample(v, lm, c);
    PatchGeometry g;
    // p3 voxel i along x sits at physical offset 3*(i-9) from the center;
    // the ramp makes the expected intensity c.x + 3*(i-9)
    for (int i = 0; i < g.sub_size; ++i) {
        int half = (g.sub_size - 1) / 2;
        size_t mid = static_cast<size_t>(half) * g.sub_size * g.sub_size + static_cast<size_t>(half) * g.sub_size + i;
        CHECK(s.p3[mid] == static_cast<float>(c[0] + 3 * (i - half)));
    }
    // and p3 equals p1 subsampled every 3rd voxel where both exist
    int half1 = (g.normal_size - 1) / 2, half3 = (g.sub_size - 1) / 2;
    for (int d3 = -4; d3 <= 4; ++d3) { // offsets within p1's reach: |3*d3| <= 12
        size_t i1 = static_cast<size_t>(half1) * g.normal_size * g.normal_size +
                    static_cast<size_t>(half1) * g.normal_size + (half1 + 3 * d3);
        size_t i3 = static_cast<size_t>(half3) * g.sub_size * g.sub_size +
                    static_cast<size_t>(half3) * g.sub_size + (half3 + d3);
        CHECK(s.p1[i1] == s.p3[i3]);
    }
}

TEST_CASE("extract_sample: out-of-volume reads are zero") {
    std::array<int, 3> dims{10, 10, 10};
    Volume v;
    v.dims = dims;
    v.data.assign(v.voxels(), 2.0f);
    LabelMap lm;
    lm.dims = dims;
    lm.labels.assign(v.voxels(), 2);
    auto s = extract_sample(v, lm, {0, 0, 0});
    CHECK(s.p1.front() == 0.0f); // (-12,-12,-12), far outside
    CHECK(s.p1.back() == 0.0f);  // (+12,+12,+12), outside a 10^3 grid
    size_t center_idx = (12 * 25 + 12) * 25 + 12;
    CHECK(s.p1[center_idx] == 2.0f);
    size_t in_idx = (12 * 25 + 12) * 25 + 12 + 9; // (+9,0,0) is inside
    CHECK(s.p1[in_idx] == 2.0f);
}

TEST_CASE("augment: flip involution and rotation order 4") {
    auto [lm, m] = mixed_case({60, 60, 60}, 5);
    Volume v = ramp_volume({60, 60, 60});
    for (int z = 0; z < 60; ++z) // vary along every axis so flips are visible
        for (int y = 0; y < 60; ++y)
            for (int x = 0; x < 60; ++x) v.at(x, y, z) += 10.0f * y + 100.0f * z;
    auto s = extract_sample(v, lm, {30, 30, 30});
    PatchGeometry g;

    for (int axis = 0; axis < 3; ++axis) {
        auto t = s;
        flip_cube_f32(t.p1, g.normal_size, axis);
        flip_cube_u8(t.target, g.out_block, axis);
        CHECK(t.p1 != s.p1);
        flip_cube_f32(t.p1, g.normal_size, axis);
        flip_cube_u8(t.target, g.out_block, axis);
        CHECK(t.p1 == s.p1);
        CHECK(t.target == s.target);
    }
    for (int axis = 0; axis < 3; ++axis) {
        auto t = s;
        for (int i = 0; i < 4; ++i) {
            rotate_cube_f32(t.p5, g.sub_size, axis);
            rotate_cube_u8(t.target, g.out_block, axis);
        }
        CHECK(t.p5 == s.p5);
        CHECK(t.target == s.target);
    }
}

TEST_CASE("augment: zero probabilities give the identity") {
    auto [lm, m] = mixed_case({60, 60, 60}, 6);
    Volume v = ramp_volume({60, 60, 60});
    auto s = extract_sample(v, lm, {30, 30, 30});
    Rng rng(9);
    auto t = augment(s, rng, 0.0, 0.0);
    CHECK(t.p1 == s.p1);
    CHECK(t.p3 == s.p3);
    CHECK(t.p5 == s.p5);
    CHECK(t.target == s.target);
}

TEST_CASE("augment: preserves shapes and label set") {
    auto [lm, m] = mixed_case({60, 60, 60}, 8);
    Volume v = ramp_volume({60, 60, 60});
    auto s = extract_sample(v, lm, {30, 30, 30});
    Rng rng(123);
    for (int i = 0; i < 20; ++i) {
        auto t = augment(s, rng);
        CHECK(t.p1.size() == s.p1.size());
        CHECK(t.target.size() == s.target.size());
        std::multiset<uint8_t> a(s.target.begin(), s.target.end()), b(t.target.begin(), t.target.end());
        CHECK(a == b); // flips/rotations permute voxels
    }
}

TEST_CASE("dense_tiling: counts and coverage") {
    CHECK(dense_tiling({7, 7, 7}).size() == 1);
    CHECK(dense_tiling({14, 7, 7}).size() == 2);

    for (auto dims : {std::array<int, 3>{13, 9, 20}, {7, 8, 9}, {21, 21, 21}}) {
        auto centers = dense_tiling(dims);
        std::vector<uint8_t> hit(static_cast<size_t>(dims[0]) * dims[1] * dims[2], 0);
        for (auto c : centers)
            for (int dz = -3; dz <= 3; ++dz)
                for (int dy = -3; dy <= 3; ++dy)
                    for (int dx = -3; dx <= 3; ++dx) {
                        int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                        REQUIRE(x >= 0);
                        REQUIRE(y >= 0);
                        REQUIRE(z >= 0);
                        REQUIRE(x < dims[0]);
                        REQUIRE(y < dims[1]);
                        REQUIRE(z < dims[2]);
                        hit[(static_cast<size_t>(z) * dims[1] + y) * dims[0] + x] = 1;
                    }
        for (uint8_t h : hit) CHECK(h == 1);
    }
}
