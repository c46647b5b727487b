#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "usseg/checkpoint.hpp"
#include "usseg/errors.hpp"
#include "usseg/network.hpp"
#include "usseg/rng.hpp"
#include "usseg/sampler.hpp"

using namespace usseg;
namespace fs = std::filesystem;

namespace {

template <typename T>
TensorT<T> random_patch(int n, int side, Rng& rng) {
    TensorT<T> t(n, 1, side, side, side);
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-1.5, 1.5));
    return t;
}

NetworkConfig tiny_config(Activation act) {
    NetworkConfig c;
    c.activation = act;
    c.pathway_widths = {2, 2};
    c.head_widths = {4, 4, 3};
    return c;
}

// full-network double-precision finite-difference check
template <typename MakeLoss>
double fd_check_network(NetworkT<double>& net, MakeLoss&& loss_and_grads, double hstep = 1e-4) {
    auto [grads_holder, loss0] = loss_and_grads();
    (void)loss0;
    NetworkT<double>& grads = grads_holder;

    double worst = 0;
    auto params = trainable_params(net);
    auto gs = trainable_params(grads);
    REQUIRE(params.size() == gs.size());
    for (size_t a = 0; a < params.size(); ++a) {
        auto& p = *params[a];
        auto& g = *gs[a];
        REQUIRE(p.size() == g.size());
        for (size_t i = 0; i < p.size(); ++i) {
            double keep = p[i];
            p[i] = keep + hstep;
            double lp = loss_and_grads().second;
            p[i] = keep - hstep;
            double lm = loss_and_grads().second;
            p[i] = keep;
            double fd = (lp - lm) / (2 * hstep);
            // bias-under-BN gradients are exactly zero; the floor keeps FD
            // roundoff (~1e-11) from registering as relative error
            double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-5});
            worst = std::max(worst, std::abs(fd - g[i]) / denom);
        }
    }
    return worst;
}

} // namespace

TEST_CASE("forward: default geometry yields (N,3,7,7,7) logits") {
    NetworkConfig c;
    c.pathway_widths = {4, 4, 4, 4, 4, 4, 4, 4}; // 8 layers, slim for speed
    c.head_widths = {6, 6, 3};
    Rng rng(1);
    Network net = make_network<float>(c, rng);
    PatchGeometry g;
    Tensor p1 = random_patch<float>(2, g.normal_size, rng);
    Tensor p3 = random_patch<float>(2, g.sub_size, rng);
    Tensor p5 = random_patch<float>(2, g.sub_size, rng);
    ForwardCache<float> cache;
    Tensor logits = forward(net, p1, p3, p5, Mode::train, &cache);
    CHECK(logits.n == 2);
    CHECK(logits.c == 3);
    CHECK(logits.spatial() == std::array<int, 3>{7, 7, 7});
    // factor-5 pathway: 3^3 -> 15^3 -> crop 9^3
    CHECK(cache.pathways[2].out_spatial == std::array<int, 3>{3, 3, 3});
    CHECK(cache.pathways[2].up_spatial == std::array<int, 3>{15, 15, 15});
    CHECK(cache.pathways[1].up_spatial == std::array<int, 3>{9, 9, 9});
}

TEST_CASE("forward: shape failures name the stage") {
    Rng rng(2);
    Network net = make_network<float>(tiny_config(Activation::prelu), rng);
    PatchGeometry g = PatchGeometry::for_depth(2, 3);
    Tensor p1 = random_patch<float>(1, g.normal_size, rng);
    Tensor p3 = random_patch<float>(1, g.sub_size, rng);
    Tensor p5 = random_patch<float>(1, g.sub_size, rng);

    Tensor bad = random_patch<float>(1, 3, rng); // too small for 2 conv layers
    CHECK_THROWS_WITH_AS(forward(net, p1, bad, bad, Mode::infer),
                         doctest::Contains("pathway 2 layer"), ShapeError);

    Tensor mismatch = random_patch<float>(2, g.normal_size, rng);
    CHECK_THROWS_WITH_AS(forward(net, mismatch, p3, p5, Mode::infer),
                         doctest::Contains("batch"), ShapeError);
}

TEST_CASE("forward: zero network and zero input tie all logits") {
    NetworkConfig c = tiny_config(Activation::relu);
    Rng rng(3);
    Network net = make_network<float>(c, rng);
    for (auto* p : trainable_params(net)) std::fill(p->begin(), p->end(), 0.0f);
    PatchGeometry g = PatchGeometry::for_depth(2, 3);
    Tensor p1(1, 1, g.normal_size, g.normal_size, g.normal_size);
    Tensor p3(1, 1, g.sub_size, g.sub_size, g.sub_size);
    Tensor p5 = p3;
    Tensor logits = forward(net, p1, p3, p5, Mode::infer);
    for (float v : logits.data) CHECK(v == logits.data[0]);
}

TEST_CASE("forward: fixed seed is bit-deterministic") {
    NetworkConfig c = tiny_config(Activation::prelu);
    auto run = [&] {
        Rng rng(42);
        Network net = make_network<float>(c, rng);
        PatchGeometry g = PatchGeometry::for_depth(2, 3);
        Tensor p1 = random_patch<float>(2, g.normal_size, rng);
        Tensor p3 = random_patch<float>(2, g.sub_size, rng);
        Tensor p5 = random_patch<float>(2, g.sub_size, rng);
        return forward(net, p1, p3, p5, Mode::infer).data;
    };
    CHECK(run() == run());
}

TEST_CASE("backward: tiny full network matches finite differences (prelu and relu)") {
    for (Activation act : {Activation::prelu, Activation::relu}) {
        CAPTURE(to_string(act));
        NetworkConfig c = tiny_config(act);
        Rng rng(7);
        NetworkT<double> net = make_network<double>(c, rng);
        PatchGeometry g = PatchGeometry::for_depth(2, 3);
        TensorT<double> p1 = random_patch<double>(2, g.normal_size, rng);
        TensorT<double> p3 = random_patch<double>(2, g.sub_size, rng);
        TensorT<double> p5 = random_patch<double>(2, g.sub_size, rng);
        std::vector<uint8_t> targets(2 * 27);
        for (auto& t : targets) t = static_cast<uint8_t>(rng.index(3));

        auto loss_and_grads = [&] {
            ForwardCache<double> cache;
            TensorT<double> logits = forward(net, p1, p3, p5, Mode::train, &cache);
            TensorT<double> dlogits;
            double loss = softmax_cross_entropy(logits, targets, dlogits);
            NetworkT<double> grads = backward(net, cache, dlogits);
            return std::make_pair(std::move(grads), loss);
        };
        double worst = fd_check_network(net, loss_and_grads);
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("backward: 4-layer pathways exercise the residual junction") {
    NetworkConfig c;
    c.activation = Activation::prelu;
    c.pathway_widths = {2, 2, 3, 3}; // residual at layer 4 with channel extension
    c.head_widths = {4, 3};
    Rng rng(11);
    NetworkT<double> net = make_network<double>(c, rng);
    PatchGeometry g = PatchGeometry::for_depth(4, 3);
    TensorT<double> p1 = random_patch<double>(2, g.normal_size, rng);
    TensorT<double> p3 = random_patch<double>(2, g.sub_size, rng);
    TensorT<double> p5 = random_patch<double>(2, g.sub_size, rng);
    std::vector<uint8_t> targets(2 * 27);
    for (auto& t : targets) t = static_cast<uint8_t>(rng.index(3));

    auto loss_and_grads = [&] {
        ForwardCache<double> cache;
        TensorT<double> logits = forward(net, p1, p3, p5, Mode::train, &cache);
        TensorT<double> dlogits;
        double loss = softmax_cross_entropy(logits, targets, dlogits);
        NetworkT<double> grads = backward(net, cache, dlogits);
        return std::make_pair(std::move(grads), loss);
    };
    // h=1e-5: this config puts some pre-activations within 1e-4 of the
    // PReLU kink, where a wider stencil picks up pure truncation error
    CHECK(fd_check_network(net, loss_and_grads, 1e-5) < 1e-5);
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
    NetworkConfig c = tiny_config(Activation::prelu);
    Rng rng(13);
    Network net = make_network<float>(c, rng);
    PatchGeometry g = PatchGeometry::for_depth(2, 3);
    Tensor p1 = random_patch<float>(1, g.normal_size, rng);
    Tensor p3 = random_patch<float>(1, g.sub_size, rng);
    Tensor p5 = random_patch<float>(1, g.sub_size, rng);
    ForwardCache<float> cache;
    Tensor logits = forward(net, p1, p3, p5, Mode::train, &cache);
    Tensor dlogits(logits.n, logits.c, logits.d, logits.h, logits.w);
    Network grads = backward(net, cache, dlogits);
    for (auto* gvec : trainable_params(grads))
        for (float v : *gvec) CHECK(v == 0.0f);
}

TEST_CASE("argmax of logits is invariant to scaling the final layer") {
    NetworkConfig c = tiny_config(Activation::relu);
    Rng rng(17);
    Network net = make_network<float>(c, rng);
    PatchGeometry g = PatchGeometry::for_depth(2, 3);
    Tensor p1 = random_patch<float>(1, g.normal_size, rng);
    Tensor p3 = random_patch<float>(1, g.sub_size, rng);
    Tensor p5 = random_patch<float>(1, g.sub_size, rng);
    Tensor base = forward(net, p1, p3, p5, Mode::infer);

    const float scale = 3.5f;
    for (float& w : net.head.back().weights) w *= scale;
    for (float& b : net.head.back().bias) b *= scale;
    Tensor scaled = forward(net, p1, p3, p5, Mode::infer);

    const size_t vox = base.plane();
    for (size_t i = 0; i < vox; ++i) {
        int arg0 = 0, arg1 = 0;
        for (int cc = 1; cc < 3; ++cc) {
            if (base.data[cc * vox + i] > base.data[arg0 * vox + i]) arg0 = cc;
            if (scaled.data[cc * vox + i] > scaled.data[arg1 * vox + i]) arg1 = cc;
        }
        CHECK(arg0 == arg1);
    }
}

TEST_CASE("update_running_stats folds batch statistics with momentum") {
    NetworkConfig c = tiny_config(Activation::prelu);
    c.bn_momentum = 0.75;
    Rng rng(19);
    Network net = make_network<float>(c, rng);
    PatchGeometry g = PatchGeometry::for_depth(2, 3);
    Tensor p1 = random_patch<float>(2, g.normal_size, rng);
    Tensor p3 = random_patch<float>(2, g.sub_size, rng);
    Tensor p5 = random_patch<float>(2, g.sub_size, rng);
    ForwardCache<float> cache;
    forward(net, p1, p3, p5, Mode::train, &cache);

    std::vector<float> before = net.pathways[0][0].bn_running_mean;
    std::vector<float> batch = cache.pathways[0].blocks[0].stats.mean;
    update_running_stats(net, cache);
    for (size_t i = 0; i < before.size(); ++i)
        CHECK(net.pathways[0][0].bn_running_mean[i] ==
              doctest::Approx(0.75f * before[i] + 0.25f * batch[i]));
}

TEST_CASE("checkpoint: round trip is bit-identical, optimizer included") {
    fs::path dir = fs::temp_directory_path() / "usseg_test_ckpt";
    fs::create_directories(dir);
    NetworkConfig c = tiny_config(Activation::prelu);
    Rng rng(23);
    Network net = make_network<float>(c, rng);
    AdamState st = make_adam_state(net);
    st.t = 5;
    for (auto& m : st.m)
        for (auto& v : m) v = 0.125f;

    std::string stem = (dir / "ck").string();
    save_checkpoint(net, &st, 321, stem);
    Checkpoint ck = load_checkpoint(stem);
    CHECK(ck.iteration == 321);
    CHECK(ck.net.config == net.config);
    REQUIRE(ck.opt.has_value());
    CHECK(ck.opt->t == 5);

    auto a = trainable_params(net);
    auto b = trainable_params(ck.net);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
    for (size_t i = 0; i < st.m.size(); ++i) CHECK(st.m[i] == ck.opt->m[i]);
}

TEST_CASE("checkpoint: truncated blob is an integrity error") {
    fs::path dir = fs::temp_directory_path() / "usseg_test_ckpt";
    fs::create_directories(dir);
    NetworkConfig c = tiny_config(Activation::relu);
    Rng rng(29);
    Network net = make_network<float>(c, rng);
    std::string stem = (dir / "trunc").string();
    save_checkpoint(net, nullptr, 0, stem);
    // chop the blob
    fs::resize_file(stem + ".bin", fs::file_size(stem + ".bin") / 2);
    CHECK_THROWS_AS(load_checkpoint(stem), IntegrityError);
}

TEST_CASE("checkpoint: activation mismatch is a configuration error") {
    fs::path dir = fs::temp_directory_path() / "usseg_test_ckpt";
    fs::create_directories(dir);
    NetworkConfig c = tiny_config(Activation::prelu);
    Rng rng(31);
    Network net = make_network<float>(c, rng);
    std::string stem = (dir / "act").string();
    save_checkpoint(net, nullptr, 0, stem);
    Checkpoint ck = load_checkpoint(stem);
    CHECK_THROWS_AS(require_activation(ck, Activation::relu), ConfigError);
    CHECK_NOTHROW(require_activation(ck, Activation::prelu));
}

TEST_CASE("alternate consistent patch geometry forwards without error") {
    // (23, 19) satisfies the geometry equations with out block 5
    PatchGeometry g;
    g.normal_size = 23;
    g.out_block = 5;
    CHECK_NOTHROW(g.validate());

    NetworkConfig c;
    c.pathway_widths = {2, 2, 2, 2, 2, 2, 2, 2};
    c.head_widths = {4, 4, 3};
    Rng rng(37);
    Network net = make_network<float>(c, rng);
    Tensor p1 = random_patch<float>(1, g.normal_size, rng);
    Tensor p3 = random_patch<float>(1, g.sub_size, rng);
    Tensor p5 = random_patch<float>(1, g.sub_size, rng);
    Tensor logits = forward(net, p1, p3, p5, Mode::infer);
    CHECK(logits.spatial() == std::array<int, 3>{5, 5, 5});
}
