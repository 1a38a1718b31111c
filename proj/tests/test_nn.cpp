#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gradid/checkpoint.hpp"
#include "gradid/digits.hpp"
#include "gradid/errors.hpp"
#include "gradid/network.hpp"
#include "oracles.hpp"

using namespace gradid;

namespace {

Network single_layer(std::vector<double> weights, std::vector<double> biases, std::size_t in_dim,
                     std::size_t out_dim) {
    DenseLayer layer{in_dim, out_dim, std::move(weights), std::move(biases), Activation::identity};
    return Network({layer});
}

// Small trained classifier shared by the empirical checks.
const Network& tiny_trained_net() {
    static const Network net = [] {
        DigitsSpec spec;
        spec.count = 400;
        spec.seed = 5;
        Dataset ds = gen_digits(spec);
        TrainConfig tc{4, 16, 0.15, 3};
        return train(Network({784, 32, 10}, 2), ds.samples(), tc);
    }();
    return net;
}

}  // namespace

TEST_CASE("forward: zero single layer maps anything to zero logits") {
    Network net = single_layer(std::vector<double>(4, 0.0), {0.0, 0.0}, 2, 2);
    const auto logits = forward(net, Tensor({2}, {0.3, 0.7}));
    CHECK(logits == std::vector<double>{0.0, 0.0});
}

TEST_CASE("forward: one-layer matrix-vector identity") {
    Network net = single_layer({2.0, 0.0, 0.0, 3.0}, {0.0, 0.0}, 2, 2);
    const auto logits = forward(net, Tensor({2}, {1.0, 1.0}));
    CHECK(logits[0] == doctest::Approx(2.0));
    CHECK(logits[1] == doctest::Approx(3.0));
}

TEST_CASE("forward: shape mismatch raises a dimension error") {
    Network net = single_layer({1.0, 0.0, 0.0, 1.0}, {0.0, 0.0}, 2, 2);
    CHECK_THROWS_AS(forward(net, Tensor({3}, {0.1, 0.2, 0.3})), DimensionError);
}

TEST_CASE("forward: trained net agrees with an independent reference pass") {
    const Network& net = tiny_trained_net();
    DigitsSpec spec;
    spec.count = 30;
    spec.seed = 77;  // held out from training
    const Dataset ds = gen_digits(spec);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto ours = forward(net, ds.inputs[i]);
        const auto theirs = oracle::reference_forward(net, ds.inputs[i]);
        const auto am = std::max_element(ours.begin(), ours.end()) - ours.begin();
        const auto ref = std::max_element(theirs.begin(), theirs.end()) - theirs.begin();
        CHECK(am == ref);
        for (std::size_t c = 0; c < ours.size(); ++c) {
            CHECK(ours[c] == doctest::Approx(theirs[c]).epsilon(1e-10));
        }
    }
    // Per-sample outputs are a pure function of the input; interleaving other
    // samples changes nothing.
    const auto first = forward(net, ds.inputs[0]);
    forward(net, ds.inputs[1]);
    CHECK(forward(net, ds.inputs[0]) == first);
}

TEST_CASE("cross_entropy: uniform softmax gives log 2") {
    CHECK(cross_entropy(std::vector<double>{0.0, 0.0}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy: extreme logits do not overflow") {
    const double loss = cross_entropy(std::vector<double>{1000.0, 0.0}, 0);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-12);
}

TEST_CASE("cross_entropy: direct evaluation of (1,2,3) label 2") {
    const double expected = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0;
    const double loss = cross_entropy(std::vector<double>{1.0, 2.0, 3.0}, 2);
    CHECK(loss == doctest::Approx(expected).epsilon(1e-13));
    CHECK(loss == doctest::Approx(0.40760596444438079).epsilon(1e-12));
}

TEST_CASE("cross_entropy: non-negative, label and finiteness guards") {
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.0, 0.0}, 2), LabelError);
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.0, 0.0}, -1), LabelError);
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> logits{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        CHECK(cross_entropy(logits, static_cast<int>(rng.index(3))) >= 0.0);
    }
}

TEST_CASE("param_gradient: matches central finite differences") {
    Rng rng(31);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Network net = oracle::random_net({6, 5, 4}, seed);
        net.set_gradient_scope(net.layers().size());
        const LabeledSample s = oracle::random_sample(6, 4, rng);
        const auto analytic = param_gradient(net, s);
        const auto fd = oracle::fd_param_gradient(net, s);
        REQUIRE(analytic.size() == fd.size());
        CHECK(oracle::max_relative_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("param_gradient: saturated softmax yields a vanishing gradient") {
    Network net = single_layer({50.0, 0.0}, {0.0, 0.0}, 1, 2);
    const LabeledSample s(Tensor({1}, {1.0}), 0);  // logits (50, 0), correct with huge margin
    const auto g = param_gradient(net, s);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("param_gradient: scope-1 vector is the suffix of the full vector") {
    Network net = oracle::random_net({5, 4, 3, 2}, 11);
    Rng rng(12);
    const LabeledSample s = oracle::random_sample(5, 2, rng);

    net.set_gradient_scope(net.layers().size());
    const auto full = param_gradient(net, s);
    for (std::size_t scope = 1; scope < net.layers().size(); ++scope) {
        Network scoped = net;
        scoped.set_gradient_scope(scope);
        const auto part = param_gradient(scoped, s);
        REQUIRE(part.size() < full.size());
        const std::vector<double> suffix(full.end() - static_cast<std::ptrdiff_t>(part.size()),
                                         full.end());
        CHECK(part == suffix);
    }
}

TEST_CASE("param_gradient: golden flattening order") {
    // Zero 2->2 net, label 0: softmax is uniform, so dL/dW = (p - e0) outer x
    // and dL/db = p - e0 with p = (1/2, 1/2). Order: W00 W01 W10 W11 b0 b1.
    Network net = single_layer({0.0, 0.0, 0.0, 0.0}, {0.0, 0.0}, 2, 2);
    const auto g = param_gradient(net, LabeledSample(Tensor({2}, {1.0, 1.0}), 0));
    const std::vector<double> golden{-0.5, -0.5, 0.5, 0.5, -0.5, 0.5};
    CHECK(g == golden);

    const auto g2 = param_gradient(net, LabeledSample(Tensor({2}, {1.0, 0.5}), 0));
    const std::vector<double> golden2{-0.5, -0.25, 0.5, 0.25, -0.5, 0.5};
    CHECK(g2 == golden2);
}

TEST_CASE("input_gradient: zero-weight network has constant loss") {
    Network net = single_layer(std::vector<double>(6, 0.0), {0.0, 0.0}, 3, 2);
    const auto g = input_gradient(net, LabeledSample(Tensor({3}, {0.2, 0.4, 0.9}), 1));
    for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("input_gradient: one-layer closed form W^T (p - e_y)") {
    const std::vector<double> w{0.4, -0.3, 0.8, 0.1, -0.5, 0.2};  // 2x3
    Network net = single_layer(w, {0.05, -0.1}, 3, 2);
    const LabeledSample s(Tensor({3}, {0.3, 0.6, 0.1}), 1);

    const auto logits = forward(net, s.input);
    const auto p = softmax(logits);
    const std::vector<double> u{p[0], p[1] - 1.0};
    std::vector<double> expected(3, 0.0);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 3; ++c) expected[c] += w[r * 3 + c] * u[r];
    }
    const auto g = input_gradient(net, s);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(g[c] == doctest::Approx(expected[c]).epsilon(1e-12));
    }
}

TEST_CASE("input_gradient: matches central finite differences") {
    Rng rng(41);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Network net = oracle::random_net({7, 6, 3}, seed + 100);
        const LabeledSample s = oracle::random_sample(7, 3, rng);
        const auto analytic = input_gradient(net, s);
        const auto fd = oracle::fd_input_gradient(net, s);
        CHECK(oracle::max_relative_error(analytic.data(), fd) < 1e-4);
    }
}

TEST_CASE("logit_jacobian: linear network equals its weight matrix") {
    const std::vector<double> w{1.0, 2.0, 3.0, -1.0, 0.5, 0.0};
    Network net = single_layer(w, {0.1, 0.2}, 3, 2);
    const auto jac = logit_jacobian(net, Tensor({3}, {0.5, 0.5, 0.5}));
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(jac[r][c] == w[r * 3 + c]);
        }
    }
}

TEST_CASE("logit_jacobian: rows match finite differences") {
    Rng rng(55);
    const Network net = oracle::random_net({6, 8, 4}, 7);
    const LabeledSample s = oracle::random_sample(6, 4, rng);
    const auto jac = logit_jacobian(net, s.input);
    for (std::size_t row = 0; row < 4; ++row) {
        const auto fd = oracle::fd_logit_row(net, s.input, row);
        CHECK(oracle::max_relative_error(jac[row], fd) < 1e-4);
    }
}

TEST_CASE("logit_jacobian: locally constant for ReLU nets away from kinks") {
    const Network net = oracle::random_net({5, 6, 3}, 21);
    Rng rng(22);
    for (int attempt = 0; attempt < 20; ++attempt) {
        const LabeledSample s = oracle::random_sample(5, 3, rng);
        const ForwardTrace trace = forward_trace(net, s.input.data());
        double min_pre = 1e9;
        for (std::size_t l = 0; l + 1 < net.layers().size(); ++l) {
            for (double z : trace.preacts[l]) min_pre = std::min(min_pre, std::fabs(z));
        }
        if (min_pre < 1e-3) continue;  // too close to an activation boundary
        std::vector<double> nudged(s.input.data().begin(), s.input.data().end());
        for (double& v : nudged) v += 1e-9;
        const auto j0 = logit_jacobian(net, s.input);
        const auto j1 = logit_jacobian(net, Tensor({5}, nudged));
        CHECK(j0 == j1);  // same ReLU mask, bitwise-equal product
        return;
    }
    FAIL("no sample away from activation boundaries found");
}

TEST_CASE("train: zero epochs returns the initialization unchanged") {
    const Network init = oracle::random_net({4, 3, 2}, 9);
    Rng rng(10);
    std::vector<LabeledSample> data;
    for (int i = 0; i < 8; ++i) data.push_back(oracle::random_sample(4, 2, rng));
    const Network out = train(init, data, TrainConfig{0, 4, 0.1, 1});
    for (std::size_t l = 0; l < init.layers().size(); ++l) {
        CHECK(out.layers()[l].weights == init.layers()[l].weights);
        CHECK(out.layers()[l].biases == init.layers()[l].biases);
    }
}

TEST_CASE("train: linearly separable toy set reaches 100% within 200 epochs") {
    std::vector<LabeledSample> data;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        const bool cls = i % 2 == 1;
        const double base = cls ? 0.75 : 0.15;
        data.emplace_back(Tensor({2}, {base + 0.1 * rng.uniform(), base + 0.1 * rng.uniform()}),
                          cls ? 1 : 0);
    }
    const Network net = train(Network({2, 2}, 1), data, TrainConfig{200, 8, 0.5, 4});
    CHECK(accuracy(net, data) == 1.0);
}

TEST_CASE("train: fixed seed gives bitwise-identical parameters") {
    DigitsSpec spec;
    spec.count = 60;
    spec.seed = 8;
    const Dataset ds = gen_digits(spec);
    const TrainConfig tc{2, 16, 0.1, 42};
    const Network a = train(Network({784, 16, 10}, 7), ds.samples(), tc);
    const Network b = train(Network({784, 16, 10}, 7), ds.samples(), tc);
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        CHECK(a.layers()[l].weights == b.layers()[l].weights);
        CHECK(a.layers()[l].biases == b.layers()[l].biases);
    }
}

TEST_CASE("train: diverging loss raises a training error") {
    // Two layers of 1e200 weights overflow the logits on the first forward
    // pass; training must refuse to continue with non-finite activations.
    DenseLayer h{3, 4, std::vector<double>(12, 1e200), std::vector<double>(4, 0.0), Activation::relu};
    DenseLayer o{4, 2, std::vector<double>(8, 1e200), std::vector<double>(2, 0.0), Activation::identity};
    std::vector<LabeledSample> data;
    Rng rng(14);
    for (int i = 0; i < 16; ++i) data.push_back(oracle::random_sample(3, 2, rng));
    CHECK_THROWS_AS(train(Network({h, o}), data, TrainConfig{5, 4, 0.1, 2}), TrainingError);
}

TEST_CASE("network: construction guards") {
    CHECK_THROWS_AS(Network(std::vector<std::size_t>{5}, 1), DimensionError);
    CHECK_THROWS_AS(Network({4, 3, 2}, 1, 0), ParameterError);
    CHECK_THROWS_AS(Network({4, 3, 2}, 1, 3), ParameterError);
    DenseLayer bad{2, 2, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0}, Activation::relu};
    CHECK_THROWS_AS(Network({bad}), DimensionError);  // final layer must be identity
    DenseLayer a{2, 3, std::vector<double>(6, 0.0), std::vector<double>(3, 0.0), Activation::relu};
    DenseLayer b{4, 2, std::vector<double>(8, 0.0), std::vector<double>(2, 0.0), Activation::identity};
    CHECK_THROWS_AS(Network({a, b}), DimensionError);  // widths do not chain
}

TEST_CASE("tensor and sample invariants") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), ValueError);
    CHECK_THROWS_AS(LabeledSample(Tensor({2}, {0.5, 1.5}), 0), ValueError);
    CHECK_THROWS_AS(LabeledSample(Tensor({2}, {0.5, 0.5}), -3), LabelError);
}

TEST_CASE("checkpoint: bitwise round trip, malformed files rejected") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "gradid_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.idsn").string();

    const Network net = oracle::random_net({6, 5, 3}, 77);
    save_checkpoint(path, net);
    const Network loaded = load_checkpoint(path);
    REQUIRE(loaded.layers().size() == net.layers().size());
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        CHECK(loaded.layers()[l].weights == net.layers()[l].weights);
        CHECK(loaded.layers()[l].biases == net.layers()[l].biases);
        CHECK(loaded.layers()[l].activation == net.layers()[l].activation);
    }

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    save_checkpoint(path, net);
    fs::resize_file(path, 40);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}
