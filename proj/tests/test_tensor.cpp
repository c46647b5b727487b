#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "usseg/errors.hpp"
#include "usseg/layers.hpp"
#include "usseg/rng.hpp"

using namespace usseg;

namespace {

using DTensor = TensorT<double>;

DTensor random_tensor(int n, int c, int d, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    DTensor t(n, c, d, h, w);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// naive direct valid cross-correlation, seven nested loops
DTensor conv_oracle(const DTensor& x, const std::vector<double>& w, const std::vector<double>& b,
                    int c_out, int k) {
    DTensor out(x.n, c_out, x.d - k + 1, x.h - k + 1, x.w - k + 1);
    for (int n = 0; n < out.n; ++n)
        for (int co = 0; co < c_out; ++co)
            for (int z = 0; z < out.d; ++z)
                for (int y = 0; y < out.h; ++y)
                    for (int xx = 0; xx < out.w; ++xx) {
                        double s = b[co];
                        for (int ci = 0; ci < x.c; ++ci)
                            for (int kz = 0; kz < k; ++kz)
                                for (int ky = 0; ky < k; ++ky)
                                    for (int kx = 0; kx < k; ++kx)
                                        s += w[(((static_cast<size_t>(co) * x.c + ci) * k + kz) * k + ky) * k + kx] *
                                             x.at(n, ci, z + kz, y + ky, xx + kx);
                        out.at(n, co, z, y, xx) = s;
                    }
    return out;
}

// central finite differences of loss() w.r.t. each entry of param
std::vector<double> fd_grad(std::vector<double>& param, const std::function<double()>& loss,
                            double hstep = 1e-4) {
    std::vector<double> g(param.size());
    for (size_t i = 0; i < param.size(); ++i) {
        double keep = param[i];
        param[i] = keep + hstep;
        double lp = loss();
        param[i] = keep - hstep;
        double lm = loss();
        param[i] = keep;
        g[i] = (lp - lm) / (2 * hstep);
    }
    return g;
}

double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    REQUIRE(got.size() == want.size());
    double worst = 0;
    for (size_t i = 0; i < got.size(); ++i) {
        double denom = std::max({std::abs(got[i]), std::abs(want[i]), 1e-6});
        worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
    }
    return worst;
}

// scalar probe loss: sum of R .* out for fixed random R
struct Probe {
    DTensor r;
    explicit Probe(const DTensor& shape_like, Rng& rng) {
        r = shape_like;
        for (auto& v : r.data) v = rng.uniform(-1.0, 1.0);
    }
    double operator()(const DTensor& out) const {
        double s = 0;
        for (size_t i = 0; i < out.data.size(); ++i) s += r.data[i] * out.data[i];
        return s;
    }
};

} // namespace

TEST_CASE("conv3d: 1x1x1 identity kernel") {
    Rng rng(1);
    DTensor x = random_tensor(2, 1, 3, 4, 5, rng);
    DTensor out = conv3d_valid(x, std::vector<double>{1.0}, std::vector<double>{0.0}, 1, 1);
    CHECK(out.data == x.data);
}

TEST_CASE("conv3d: delta kernel picks the central window") {
    Rng rng(2);
    DTensor x = random_tensor(1, 1, 5, 5, 5, rng);
    std::vector<double> w(27, 0.0);
    w[13] = 1.0; // center tap (1,1,1)
    DTensor out = conv3d_valid(x, w, std::vector<double>{0.0}, 1, 3);
    for (int z = 0; z < 3; ++z)
        for (int y = 0; y < 3; ++y)
            for (int xx = 0; xx < 3; ++xx)
                CHECK(out.at(0, 0, z, y, xx) == x.at(0, 0, z + 1, y + 1, xx + 1));
}

TEST_CASE("conv3d: random instances match the brute-force oracle") {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        int n = 1 + int(rng.index(2)), ci = 1 + int(rng.index(3)), co = 1 + int(rng.index(4));
        int k = rng.uniform() < 0.5 ? 1 : 3;
        int d = k + int(rng.index(6)), h = k + int(rng.index(6)), w = k + int(rng.index(6));
        DTensor x = random_tensor(n, ci, d, h, w, rng);
        std::vector<double> wt(static_cast<size_t>(co) * ci * k * k * k), b(co);
        for (auto& v : wt) v = rng.uniform(-1.0, 1.0);
        for (auto& v : b) v = rng.uniform(-1.0, 1.0);
        DTensor got = conv3d_valid(x, wt, b, co, k);
        DTensor want = conv_oracle(x, wt, b, co, k);
        REQUIRE(got.data.size() == want.data.size());
        for (size_t i = 0; i < got.data.size(); ++i) CHECK(std::abs(got.data[i] - want.data[i]) < 1e-6);
    }
}

TEST_CASE("conv3d: backward matches finite differences") {
    Rng rng(4);
    const int co = 3, k = 3;
    DTensor x = random_tensor(2, 2, 4, 4, 5, rng);
    std::vector<double> w(static_cast<size_t>(co) * x.c * 27), b(co);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);
    Probe probe(conv3d_valid(x, w, b, co, k), rng);

    DTensor dx;
    std::vector<double> dw, db;
    conv3d_backward(x, w, co, k, probe.r, dx, dw, db);

    auto loss = [&] { return probe(conv3d_valid(x, w, b, co, k)); };
    CHECK(max_rel_err(dw, fd_grad(w, loss)) < 1e-5);
    CHECK(max_rel_err(db, fd_grad(b, loss)) < 1e-5);
    CHECK(max_rel_err(dx.data, fd_grad(x.data, loss)) < 1e-5);
}

TEST_CASE("batchnorm: constant channel maps to beta in train mode") {
    DTensor x(2, 2, 2, 2, 2);
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = (i / x.plane()) % 2 == 0 ? 3.0 : -1.0;
    std::vector<double> gamma{2.0, 0.5}, beta{0.7, -0.3}, rm(2, 0.0), rv(2, 1.0);
    BnStats<double> stats;
    DTensor out = batchnorm_forward(x, gamma, beta, rm, rv, true, 1e-5, &stats);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < x.plane(); ++i)
                CHECK(out.data[(static_cast<size_t>(n) * 2 + c) * x.plane() + i] ==
                      doctest::Approx(beta[c]).epsilon(1e-9));
}

TEST_CASE("batchnorm: unit statistics with gamma=1 beta=0") {
    Rng rng(5);
    DTensor x = random_tensor(3, 2, 3, 3, 3, rng, -4.0, 4.0);
    std::vector<double> gamma(2, 1.0), beta(2, 0.0), rm(2, 0.0), rv(2, 1.0);
    DTensor out = batchnorm_forward(x, gamma, beta, rm, rv, true, 1e-5, static_cast<BnStats<double>*>(nullptr));
    size_t m = static_cast<size_t>(x.n) * x.plane();
    for (int c = 0; c < 2; ++c) {
        double sum = 0, ss = 0;
        for (int n = 0; n < x.n; ++n)
            for (size_t i = 0; i < x.plane(); ++i) sum += out.data[(static_cast<size_t>(n) * x.c + c) * x.plane() + i];
        double mean = sum / double(m);
        for (int n = 0; n < x.n; ++n)
            for (size_t i = 0; i < x.plane(); ++i) {
                double d = out.data[(static_cast<size_t>(n) * x.c + c) * x.plane() + i] - mean;
                ss += d * d;
            }
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(ss / double(m) - 1.0) < 1e-3);
    }
}

TEST_CASE("batchnorm: infer mode with running == batch stats matches train mode") {
    Rng rng(6);
    DTensor x = random_tensor(2, 3, 3, 3, 3, rng);
    std::vector<double> gamma{1.1, 0.9, 1.3}, beta{0.1, -0.2, 0.0}, rm(3, 0.0), rv(3, 1.0);
    BnStats<double> stats;
    DTensor train_out = batchnorm_forward(x, gamma, beta, rm, rv, true, 1e-5, &stats);
    DTensor infer_out = batchnorm_forward(x, gamma, beta, stats.mean, stats.var, false, 1e-5, static_cast<BnStats<double>*>(nullptr));
    for (size_t i = 0; i < train_out.data.size(); ++i)
        CHECK(train_out.data[i] == doctest::Approx(infer_out.data[i]).epsilon(1e-5));
}

TEST_CASE("batchnorm: backward matches finite differences") {
    Rng rng(7);
    DTensor x = random_tensor(2, 2, 3, 3, 3, rng);
    std::vector<double> gamma{1.2, 0.8}, beta{0.3, -0.1}, rm(2, 0.0), rv(2, 1.0);
    Probe probe(x, rng);

    BnStats<double> stats;
    batchnorm_forward(x, gamma, beta, rm, rv, true, 1e-5, &stats);
    DTensor dx;
    std::vector<double> dgamma, dbeta;
    batchnorm_backward(x, gamma, stats, probe.r, dx, dgamma, dbeta);

    auto loss = [&] { return probe(batchnorm_forward(x, gamma, beta, rm, rv, true, 1e-5, static_cast<BnStats<double>*>(nullptr))); };
    CHECK(max_rel_err(dgamma, fd_grad(gamma, loss)) < 1e-5);
    CHECK(max_rel_err(dbeta, fd_grad(beta, loss)) < 1e-5);
    CHECK(max_rel_err(dx.data, fd_grad(x.data, loss)) < 1e-5);
}

TEST_CASE("activation: relu and prelu forward examples") {
    DTensor x(1, 1, 1, 1, 4);
    x.data = {2.0, -4.0, 0.0, -1.0};
    std::vector<double> a{0.25};
    DTensor relu_out = activation_forward(x, {}, false);
    CHECK(relu_out.data == std::vector<double>{2.0, 0.0, 0.0, 0.0});
    DTensor prelu_out = activation_forward(x, a, true);
    CHECK(prelu_out.data == std::vector<double>{2.0, -1.0, 0.0, -0.25});

    // relu equals prelu with zero slopes
    std::vector<double> zero{0.0};
    DTensor z = activation_forward(x, zero, true);
    CHECK(z.data == relu_out.data);
}

TEST_CASE("activation: prelu backward including slope gradient") {
    Rng rng(8);
    DTensor x = random_tensor(2, 3, 2, 2, 2, rng);
    std::vector<double> slopes{0.25, 0.1, 0.4};
    Probe probe(x, rng);
    DTensor dx;
    std::vector<double> da;
    activation_backward(x, slopes, true, probe.r, dx, &da);
    auto loss = [&] { return probe(activation_forward(x, slopes, true)); };
    CHECK(max_rel_err(da, fd_grad(slopes, loss)) < 1e-5);
    CHECK(max_rel_err(dx.data, fd_grad(x.data, loss)) < 1e-5);
}

TEST_CASE("residual_add: identical shapes, zero extension, crop offset") {
    Rng rng(9);
    DTensor deep = random_tensor(1, 4, 5, 5, 5, rng);
    DTensor shallow_same = random_tensor(1, 4, 5, 5, 5, rng);
    DTensor sum = residual_add(deep, shallow_same);
    for (size_t i = 0; i < sum.data.size(); ++i)
        CHECK(sum.data[i] == doctest::Approx(deep.data[i] + shallow_same.data[i]));

    // shallow has 2 channels -> channels 3,4 of output equal deep
    DTensor shallow2 = random_tensor(1, 2, 5, 5, 5, rng);
    DTensor ext = residual_add(deep, shallow2);
    for (int c = 2; c < 4; ++c)
        for (size_t i = 0; i < deep.plane(); ++i)
            CHECK(ext.data[static_cast<size_t>(c) * deep.plane() + i] ==
                  deep.data[static_cast<size_t>(c) * deep.plane() + i]);

    // shallow 9^3 onto deep 5^3 uses offset 2
    DTensor big = random_tensor(1, 4, 9, 9, 9, rng);
    DTensor crop_sum = residual_add(deep, big);
    CHECK(crop_sum.at(0, 0, 0, 0, 0) == doctest::Approx(deep.at(0, 0, 0, 0, 0) + big.at(0, 0, 2, 2, 2)));

    // odd spatial difference rejected
    DTensor odd = random_tensor(1, 4, 7, 5, 5, rng);
    CHECK_THROWS_AS(residual_add(odd, deep), ShapeError);
}

TEST_CASE("residual_add: backward matches finite differences") {
    Rng rng(10);
    DTensor deep = random_tensor(1, 3, 3, 3, 3, rng);
    DTensor shallow = random_tensor(1, 2, 7, 7, 7, rng);
    Probe probe(deep, rng);
    DTensor ds = residual_add_backward_shallow(probe.r, shallow.c, shallow.spatial());
    auto loss = [&] { return probe(residual_add(deep, shallow)); };
    CHECK(max_rel_err(ds.data, fd_grad(shallow.data, loss)) < 1e-5);
    // deep gradient is the probe itself
    CHECK(max_rel_err(probe.r.data, fd_grad(deep.data, loss)) < 1e-5);
}

TEST_CASE("upsample_repeat and center_crop: examples and adjoints") {
    Rng rng(11);
    DTensor x = random_tensor(1, 2, 3, 3, 3, rng);
    CHECK(upsample_repeat(x, 1).data == x.data);

    DTensor up = upsample_repeat(x, 3);
    CHECK(up.spatial() == std::array<int, 3>{9, 9, 9});
    for (int z = 0; z < 9; ++z)
        for (int y = 0; y < 9; ++y)
            for (int xx = 0; xx < 9; ++xx)
                CHECK(up.at(0, 1, z, y, xx) == x.at(0, 1, z / 3, y / 3, xx / 3));

    DTensor big = random_tensor(1, 1, 15, 15, 15, rng);
    DTensor crop = center_crop(big, 9);
    CHECK(crop.at(0, 0, 0, 0, 0) == big.at(0, 0, 3, 3, 3));
    CHECK_THROWS_AS(center_crop(big, 16), ShapeError);

    // adjoint checks through the probe
    {
        Probe probe(up, rng);
        DTensor dx = upsample_repeat_backward(probe.r, 3, x.spatial());
        auto loss = [&] { return probe(upsample_repeat(x, 3)); };
        CHECK(max_rel_err(dx.data, fd_grad(x.data, loss)) < 1e-5);
    }
    {
        Probe probe(crop, rng);
        DTensor dbig = center_crop_backward(probe.r, big.spatial());
        auto loss = [&] { return probe(center_crop(big, 9)); };
        CHECK(max_rel_err(dbig.data, fd_grad(big.data, loss)) < 1e-5);
    }
}

TEST_CASE("softmax_ce: analytic values") {
    DTensor logits(1, 3, 1, 1, 1);
    logits.data = {0.4, 0.4, 0.4};
    std::vector<uint8_t> targets{1};
    DTensor d;
    double loss = softmax_cross_entropy(logits, targets, d);
    CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-9));

    logits.data = {0.0, 50.0, 0.0};
    loss = softmax_cross_entropy(logits, targets, d);
    CHECK(loss < 1e-8);

    targets[0] = 7;
    CHECK_THROWS_AS(softmax_cross_entropy(logits, targets, d), ValidationError);
}

TEST_CASE("softmax_ce: gradient matches finite differences") {
    Rng rng(12);
    DTensor logits = random_tensor(2, 3, 2, 2, 2, rng, -2.0, 2.0);
    std::vector<uint8_t> targets(2 * 8);
    for (auto& t : targets) t = static_cast<uint8_t>(rng.index(3));
    DTensor d;
    softmax_cross_entropy(logits, targets, d);
    auto loss = [&] {
        DTensor scratch;
        return softmax_cross_entropy(logits, targets, scratch);
    };
    CHECK(max_rel_err(d.data, fd_grad(logits.data, loss)) < 1e-5);
}

TEST_CASE("softmax_channels: rows sum to one") {
    Rng rng(13);
    DTensor logits = random_tensor(2, 3, 2, 2, 2, rng, -5.0, 5.0);
    DTensor p = softmax_channels(logits);
    for (int n = 0; n < 2; ++n)
        for (size_t i = 0; i < p.plane(); ++i) {
            double s = 0;
            for (int c = 0; c < 3; ++c) s += p.data[(static_cast<size_t>(n) * 3 + c) * p.plane() + i];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
}
