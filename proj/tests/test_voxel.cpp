#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "usseg/errors.hpp"
#include "usseg/preprocess.hpp"
#include "usseg/rng.hpp"
#include "usseg/volume.hpp"
#include "usseg/volume_io.hpp"

using namespace usseg;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    fs::path p = fs::temp_directory_path() / "usseg_test_voxel";
    fs::create_directories(p);
    return p;
}

Volume random_volume(std::array<int, 3> dims, std::array<double, 3> spacing, uint64_t seed) {
    Volume v;
    v.dims = dims;
    v.spacing = spacing;
    v.origin = {1.5, -2.0, 0.25};
    v.data.resize(v.voxels());
    Rng rng(seed);
    for (auto& f : v.data) f = static_cast<float>(rng.uniform(-2.0, 3.0));
    return v;
}

// independent scalar trilinear oracle: physical-coordinate sampling with
// edge clamp, 8-corner lerp in double
float trilinear_oracle(const Volume& v, int jx, int jy, int jz, double t) {
    auto cont = [&](int j, int axis) {
        double u = (j * t) / v.spacing[axis];
        if (u < 0) u = 0;
        if (u > v.dims[axis] - 1) u = v.dims[axis] - 1;
        return u;
    };
    double ux = cont(jx, 0), uy = cont(jy, 1), uz = cont(jz, 2);
    int x0 = (int)std::floor(ux), y0 = (int)std::floor(uy), z0 = (int)std::floor(uz);
    int x1 = std::min(x0 + 1, v.dims[0] - 1), y1 = std::min(y0 + 1, v.dims[1] - 1),
        z1 = std::min(z0 + 1, v.dims[2] - 1);
    double fx = ux - x0, fy = uy - y0, fz = uz - z0;
    double acc = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                acc += wgt * v.at(dx ? x1 : x0, dy ? y1 : y0, dz ? z1 : z0);
            }
    return static_cast<float>(acc);
}

} // namespace

TEST_CASE("raw-json read: identity payload") {
    auto dir = test_dir();
    Volume v;
    v.dims = {2, 2, 2};
    v.spacing = {1, 1, 1};
    v.data.assign(8, 0.0f);
    write_volume(v, (dir / "zeros.json").string());
    Volume r = read_volume((dir / "zeros.json").string());
    CHECK(r.dims == std::array<int, 3>{2, 2, 2});
    REQUIRE(r.data.size() == 8);
    for (float f : r.data) CHECK(f == 0.0f);
}

TEST_CASE("raw-json read: payload size mismatch is an integrity error") {
    auto dir = test_dir();
    std::ofstream js(dir / "bad.json");
    js << R"({"dims":[3,3,3],"spacing":[1,1,1],"origin":[0,0,0],"dtype":"f32"})";
    js.close();
    std::ofstream rf(dir / "bad.raw", std::ios::binary);
    std::vector<float> pay(26, 1.0f);
    rf.write(reinterpret_cast<const char*>(pay.data()), 26 * 4);
    rf.close();
    CHECK_THROWS_AS(read_volume((dir / "bad.json").string()), IntegrityError);
}

TEST_CASE("nrrd uchar values are promoted to float") {
    auto dir = test_dir();
    std::ofstream f(dir / "u8.nrrd", std::ios::binary);
    f << "NRRD0004\ntype: uchar\ndimension: 3\nsizes: 3 1 1\nencoding: raw\n\n";
    uint8_t pay[3] = {0, 1, 2};
    f.write(reinterpret_cast<const char*>(pay), 3);
    f.close();
    Volume v = read_volume((dir / "u8.nrrd").string());
    CHECK(v.data == std::vector<float>{0.0f, 1.0f, 2.0f});
}

TEST_CASE("nrrd unsupported encoding / type name the field") {
    auto dir = test_dir();
    {
        std::ofstream f(dir / "enc.nrrd", std::ios::binary);
        f << "NRRD0004\ntype: float\ndimension: 3\nsizes: 1 1 1\nencoding: gzip\n\nxxxx";
    }
    CHECK_THROWS_WITH_AS(read_volume((dir / "enc.nrrd").string()),
                         doctest::Contains("encoding"), FormatError);
    {
        std::ofstream f(dir / "typ.nrrd", std::ios::binary);
        f << "NRRD0004\ntype: short\ndimension: 3\nsizes: 1 1 1\nencoding: raw\n\nxx";
    }
    CHECK_THROWS_WITH_AS(read_volume((dir / "typ.nrrd").string()),
                         doctest::Contains("type"), FormatError);
}

TEST_CASE("round-trip is bit-exact for f32, both formats") {
    auto dir = test_dir();
    Volume v = random_volume({4, 5, 3}, {0.7, 0.4, 1.1}, 99);
    for (const char* name : {"rt.nrrd", "rt.json"}) {
        write_volume(v, (dir / name).string());
        Volume r = read_volume((dir / name).string());
        CHECK(r.dims == v.dims);
        CHECK(r.spacing == v.spacing);
        CHECK(r.origin == v.origin);
        CHECK(r.data == v.data);
    }
}

TEST_CASE("labelmap round-trip via u8") {
    auto dir = test_dir();
    LabelMap lm;
    lm.dims = {3, 2, 2};
    lm.spacing = {0.4, 0.4, 0.4};
    lm.labels = {0, 1, 2, 2, 1, 0, 0, 0, 1, 2, 2, 2};
    for (const char* name : {"lm.nrrd", "lm.json"}) {
        write_labelmap(lm, (dir / name).string());
        LabelMap r = read_labelmap((dir / name).string());
        CHECK(r.labels == lm.labels);
        CHECK(r.spacing == lm.spacing);
    }
}

TEST_CASE("writing NaN data is a validation error") {
    auto dir = test_dir();
    Volume v;
    v.dims = {2, 1, 1};
    v.data = {1.0f, std::nanf("")};
    CHECK_THROWS_AS(write_volume(v, (dir / "nan.nrrd").string()), ValidationError);
}

TEST_CASE("resample: identity at own spacing") {
    Volume v = random_volume({5, 6, 4}, {0.4, 0.4, 0.4}, 7);
    Volume r = resample_isotropic(v, 0.4, Interp::trilinear);
    CHECK(r.dims == v.dims);
    CHECK(r.data == v.data); // exact
}

TEST_CASE("resample: ramp midpoint") {
    Volume v;
    v.dims = {2, 1, 1};
    v.spacing = {1, 1, 1};
    v.data = {0.0f, 1.0f};
    Volume r = resample_isotropic(v, 0.5, Interp::trilinear);
    REQUIRE(r.dims[0] == 4);
    CHECK(r.data[0] == doctest::Approx(0.0));
    CHECK(r.data[1] == doctest::Approx(0.5));
    CHECK(r.data[2] == doctest::Approx(1.0));
    CHECK(r.data[3] == doctest::Approx(1.0)); // edge clamp
}

TEST_CASE("resample: random volume matches scalar trilinear oracle") {
    Volume v = random_volume({5, 5, 5}, {0.6, 0.6, 0.6}, 1234);
    Volume r = resample_isotropic(v, 0.4, Interp::trilinear);
    for (int z = 0; z < r.dims[2]; ++z)
        for (int y = 0; y < r.dims[1]; ++y)
            for (int x = 0; x < r.dims[0]; ++x)
                CHECK(std::abs(r.at(x, y, z) - trilinear_oracle(v, x, y, z, 0.4)) < 1e-6);
}

TEST_CASE("resample: nearest for labels keeps the value set") {
    LabelMap lm;
    lm.dims = {6, 6, 6};
    lm.spacing = {0.6, 0.6, 0.6};
    lm.labels.resize(lm.voxels());
    Rng rng(5);
    for (auto& l : lm.labels) l = static_cast<uint8_t>(rng.index(3));
    LabelMap r = resample_isotropic(lm, 0.4);
    CHECK(r.dims == std::array<int, 3>{9, 9, 9});
    for (uint8_t l : r.labels) CHECK(l <= 2);
}

TEST_CASE("compute_mask: strictly positive rule") {
    Volume v;
    v.dims = {4, 1, 1};
    v.data = {0.0f, 1.0f, -0.5f, 2.0f};
    Mask m = compute_mask(v);
    CHECK(m.bits == std::vector<uint8_t>{0, 1, 0, 1});

    v.data.assign(4, 0.0f);
    CHECK(compute_mask(v).count() == 0);
    v.data.assign(4, 3.0f);
    CHECK(compute_mask(v).count() == 4);
}

TEST_CASE("standardize: hand oracle for {1,2,3}") {
    Volume v;
    v.dims = {3, 1, 1};
    v.data = {1.0f, 2.0f, 3.0f};
    Mask m;
    m.dims = v.dims;
    m.bits = {1, 1, 1};
    Volume s = standardize(v, m);
    // population std = sqrt(2/3)
    double expected = 1.0 / std::sqrt(2.0 / 3.0);
    CHECK(s.data[0] == doctest::Approx(-expected).epsilon(1e-6));
    CHECK(s.data[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(s.data[2] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("standardize: constant region is degenerate") {
    Volume v;
    v.dims = {4, 1, 1};
    v.data.assign(4, 2.5f);
    Mask m;
    m.dims = v.dims;
    m.bits.assign(4, 1);
    CHECK_THROWS_AS(standardize(v, m), ValidationError);
}

TEST_CASE("standardize: masked mean/std contract and idempotence") {
    Volume v = random_volume({8, 7, 6}, {1, 1, 1}, 42);
    for (size_t i = 0; i < v.data.size(); ++i)
        if (i % 3 == 0) v.data[i] = 0.0f; // punch holes so the mask is partial
    Mask m = compute_mask(v);
    REQUIRE(m.count() > 2);
    Volume s = standardize(v, m);

    double sum = 0, ss = 0;
    size_t n = 0;
    for (size_t i = 0; i < s.data.size(); ++i) {
        if (m.bits[i]) {
            sum += s.data[i];
            ++n;
        } else {
            CHECK(s.data[i] == 0.0f);
        }
    }
    double mean = sum / n;
    for (size_t i = 0; i < s.data.size(); ++i)
        if (m.bits[i]) ss += (s.data[i] - mean) * (s.data[i] - mean);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(std::sqrt(ss / n) - 1.0) < 1e-5);

    Volume s2 = standardize(s, m);
    for (size_t i = 0; i < s.data.size(); ++i) CHECK(std::abs(s2.data[i] - s.data[i]) < 1e-5);
}

TEST_CASE("label_histogram: forced splits") {
    LabelMap lm;
    lm.dims = {100, 1, 1};
    lm.labels.assign(100, 2);
    Mask m;
    m.dims = lm.dims;
    m.bits.assign(100, 1);
    auto h = label_histogram(lm, m);
    CHECK(h == std::array<double, 3>{0.0, 0.0, 1.0});

    for (int i = 0; i < 23; ++i) lm.labels[i] = 0;
    for (int i = 23; i < 53; ++i) lm.labels[i] = 1;
    for (int i = 53; i < 100; ++i) lm.labels[i] = 2;
    h = label_histogram(lm, m);
    CHECK(h[0] == doctest::Approx(0.23));
    CHECK(h[1] == doctest::Approx(0.30));
    CHECK(h[2] == doctest::Approx(0.47));
    CHECK(h[0] + h[1] + h[2] == doctest::Approx(1.0).epsilon(1e-9));

    m.bits.assign(100, 0);
    CHECK_THROWS_AS(label_histogram(lm, m), ValidationError);
}
