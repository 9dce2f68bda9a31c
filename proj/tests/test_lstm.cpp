#include <doctest.h>

#include <cmath>
#include <random>

#include "ghostrnn/errors.hpp"
#include "ghostrnn/lstm.hpp"
#include "oracles.hpp"

using namespace ghostrnn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LstmLayerParams random_layer(std::mt19937_64& rng, Eigen::Index in, Eigen::Index hidden, double scale) {
    return {oracle::random_matrix(rng, 4 * hidden, in, scale),
            oracle::random_matrix(rng, 4 * hidden, hidden, scale),
            oracle::random_matrix(rng, 4 * hidden, 1, scale)};
}

LstmNetwork random_network(std::mt19937_64& rng, std::size_t in, std::size_t hidden,
                           std::size_t layers, std::size_t out, double scale = 0.5) {
    LstmNetwork net;
    const auto h = static_cast<Eigen::Index>(hidden);
    for (std::size_t l = 0; l < layers; ++l) {
        net.layers.push_back(random_layer(rng, l == 0 ? static_cast<Eigen::Index>(in) : h, h, scale));
    }
    net.predictor = {oracle::random_matrix(rng, static_cast<Eigen::Index>(out), h, scale),
                     oracle::random_matrix(rng, static_cast<Eigen::Index>(out), 1, scale)};
    return net;
}

std::vector<StepInput> random_sequence(std::mt19937_64& rng, std::size_t in, std::size_t steps) {
    std::vector<StepInput> seq;
    for (std::size_t t = 0; t < steps; ++t) seq.push_back(oracle::random_matrix(rng, static_cast<Eigen::Index>(in), 1));
    return seq;
}

}  // namespace

TEST_CASE("encode_step") {
    const auto speckles = generate_speckles(1, 1, 28, 28);
    const auto x = encode_step(speckles.pattern(0), 392.0, 784);
    REQUIRE(x.size() == 785);
    CHECK(x(784) == 0.5);
    for (std::size_t k = 0; k < 784; ++k) CHECK(x(static_cast<Eigen::Index>(k)) == speckles.pattern(0).flat()[k]);

    const SpecklePattern zero(28, 28, std::vector<double>(784, 0.0));
    CHECK(encode_step(zero, 0.0, 784).isZero(0.0));
    CHECK_THROWS_AS(encode_step(zero, 1.0, 100), InvalidArgument);
}

TEST_CASE("lstm_cell_forward with zero parameters stays at zero") {
    const LstmLayerParams zero{MatrixXd::Zero(8, 3), MatrixXd::Zero(8, 2), VectorXd::Zero(8)};
    VectorXd x(3);
    x << 5, -2, 1;
    const auto s = lstm_cell_forward(zero, x, VectorXd::Zero(2), VectorXd::Zero(2));
    CHECK(s.h.isZero(0.0));
    CHECK(s.c.isZero(0.0));
}

TEST_CASE("saturated forget gate carries the cell state") {
    LstmLayerParams p{MatrixXd::Zero(8, 3), MatrixXd::Zero(8, 2), VectorXd::Zero(8)};
    p.bias.segment(2, 2).setConstant(50.0);
    VectorXd c_prev(2);
    c_prev << 0.7, -1.3;
    const auto s = lstm_cell_forward(p, VectorXd::Ones(3), VectorXd::Zero(2), c_prev);
    CHECK((s.c - c_prev).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("lstm_cell_forward matches the scalar-loop oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_layer(rng, 5, 4, 1.0);
        const VectorXd x = oracle::random_matrix(rng, 5, 1);
        const VectorXd h = oracle::random_matrix(rng, 4, 1, 0.9);
        const VectorXd c = oracle::random_matrix(rng, 4, 1, 2.0);
        const auto got = lstm_cell_forward(p, x, h, c);
        const auto want = oracle::lstm_cell(p.input_weights, p.hidden_weights, p.bias, oracle::to_std(x),
                                            oracle::to_std(h), oracle::to_std(c));
        for (int j = 0; j < 4; ++j) {
            CHECK(std::abs(got.h(j) - want.h[static_cast<std::size_t>(j)]) < 1e-12);
            CHECK(std::abs(got.c(j) - want.c[static_cast<std::size_t>(j)]) < 1e-12);
            CHECK(std::abs(got.h(j)) < 1.0);
        }
    }
    const auto p = random_layer(rng, 5, 4, 1.0);
    CHECK_THROWS_AS(lstm_cell_forward(p, VectorXd::Zero(4), VectorXd::Zero(4), VectorXd::Zero(4)),
                    InvalidArgument);
    CHECK_THROWS_AS(lstm_cell_forward(p, VectorXd::Zero(5), VectorXd::Zero(3), VectorXd::Zero(4)),
                    InvalidArgument);
}

TEST_CASE("forward equals a hand-unrolled oracle") {
    std::mt19937_64 rng(9);
    for (std::size_t layers : {1u, 2u, 3u}) {
        const auto net = random_network(rng, 4, 3, layers, 5);
        const auto seq = random_sequence(rng, 4, layers == 1 ? 2 : 4);
        const auto got = forward(net, seq).prediction;

        std::vector<std::vector<double>> h(layers, std::vector<double>(3, 0.0)), c = h;
        for (const auto& step : seq) {
            auto x = oracle::to_std(step);
            for (std::size_t l = 0; l < layers; ++l) {
                const auto& p = net.layers[l];
                const auto s = oracle::lstm_cell(p.input_weights, p.hidden_weights, p.bias, x, h[l], c[l]);
                h[l] = s.h;
                c[l] = s.c;
                x = s.h;
            }
        }
        for (Eigen::Index r = 0; r < 5; ++r) {
            double want = net.predictor.bias(r);
            for (Eigen::Index k = 0; k < 3; ++k) want += net.predictor.weights(r, k) * h.back()[static_cast<std::size_t>(k)];
            CHECK(std::abs(got(r) - want) < 1e-12);
        }
    }
}

TEST_CASE("forward basics") {
    std::mt19937_64 rng(4);
    auto zero = zero_network({6, 3, 2, 4});
    zero.predictor.bias << 0.1, 0.2, 0.3, 0.4;
    const auto seq = random_sequence(rng, 6, 3);
    CHECK(forward(zero, seq).prediction == zero.predictor.bias);

    const auto net = random_network(rng, 6, 3, 2, 4);
    const std::vector<StepInput> once{seq[0]};
    const std::vector<StepInput> twice{seq[0], seq[0]};
    CHECK_FALSE(forward(net, once).prediction.isApprox(forward(net, twice).prediction, 1e-9));

    CHECK_THROWS_AS(forward(net, std::vector<StepInput>{}), InvalidArgument);
    CHECK_THROWS_AS(forward(net, random_sequence(rng, 5, 2)), InvalidArgument);
}

TEST_CASE("batched forward agrees with per-sample forward") {
    std::mt19937_64 rng(12);
    const auto net = random_network(rng, 7, 4, 2, 3);
    const MatrixXd frames = oracle::random_matrix(rng, 6, 5);
    const MatrixXd buckets = oracle::random_matrix(rng, 5, 3);
    const auto cache = forward_batch(net, {frames, buckets});
    for (Eigen::Index b = 0; b < 3; ++b) {
        std::vector<StepInput> seq;
        for (Eigen::Index t = 0; t < 5; ++t) {
            StepInput x(7);
            x << frames.col(t), buckets(t, b);
            seq.push_back(x);
        }
        CHECK((forward(net, seq).prediction - cache.prediction.col(b)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("mse_loss") {
    VectorXd a(3), b(3);
    a << 0.2, 0.4, 0.6;
    CHECK(mse_loss(a, a) == 0.0);
    b = a.array() + 0.1;
    CHECK(mse_loss(b, a) == doctest::Approx(0.01).epsilon(1e-12));
    VectorXd p(2), q(2);
    p << 0, 1;
    q << 1, 0;
    CHECK(mse_loss(p, q) == 1.0);
    CHECK_THROWS_AS(mse_loss(p, a), InvalidArgument);
}

TEST_CASE("backward: zero residual and linearity in the residual") {
    std::mt19937_64 rng(6);
    auto net = zero_network({5, 3, 2, 4});
    net.predictor.bias << 0.3, 0.1, 0.9, 0.5;
    const auto seq = random_sequence(rng, 5, 3);
    const auto fwd = forward(net, seq);
    const auto g0 = backward(net, fwd.cache, fwd.prediction);
    CHECK(g0.predictor.weights.isZero(0.0));

    const auto random = random_network(rng, 5, 3, 2, 4);
    const auto out = forward(random, seq);
    const VectorXd shift = VectorXd::Constant(4, 0.25);
    const auto g1 = backward(random, out.cache, out.prediction - shift);
    const auto g2 = backward(random, out.cache, out.prediction - 2.0 * shift);
    CHECK((g2.predictor.bias - 2.0 * g1.predictor.bias).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(backward(random, out.cache, VectorXd::Zero(3)), InvalidArgument);
    const auto other = random_network(rng, 5, 4, 2, 4);
    CHECK_THROWS_AS(backward(other, out.cache, out.prediction), InvalidArgument);
}

TEST_CASE("gradient check on random tiny networks") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> pick(1, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto in = static_cast<std::size_t>(pick(rng) + 1);
        const auto hidden = static_cast<std::size_t>(pick(rng) + 1);
        const auto layers = static_cast<std::size_t>(pick(rng));
        const auto out = static_cast<std::size_t>(pick(rng) + 1);
        const auto steps = static_cast<std::size_t>(pick(rng) + 1);
        const auto net = random_network(rng, in, hidden, layers, out);
        const auto seq = random_sequence(rng, in, steps);
        const VectorXd truth = oracle::random_matrix(rng, static_cast<Eigen::Index>(out), 1);
        const double err = gradient_check(net, seq, truth, 1e-5);
        CAPTURE(trial);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("gradient check is stable when epsilon is halved") {
    std::mt19937_64 rng(77);
    const auto net = random_network(rng, 3, 3, 2, 2);
    const auto seq = random_sequence(rng, 3, 3);
    const VectorXd truth = oracle::random_matrix(rng, 2, 1);
    const double full = gradient_check(net, seq, truth, 1e-5);
    const double half = gradient_check(net, seq, truth, 5e-6);
    CHECK(full < 1e-4);
    CHECK(half < 1e-4);
    CHECK(std::max(full, half) < 10.0 * std::max(std::min(full, half), 1e-15));

    const auto zero = zero_network({3, 2, 1, 2});
    CHECK(gradient_check(zero, seq, truth, 1e-5) < 1e-8);
}

TEST_CASE("batched gradients equal the sum of per-sample gradients") {
    std::mt19937_64 rng(8);
    const auto net = random_network(rng, 5, 3, 2, 2);
    const MatrixXd frames = oracle::random_matrix(rng, 4, 3);
    const MatrixXd buckets = oracle::random_matrix(rng, 3, 2);
    const MatrixXd truth = oracle::random_matrix(rng, 2, 2);
    const auto joint = backward(net, forward_batch(net, {frames, buckets}), truth);
    auto summed = zeros_like(net);
    for (Eigen::Index b = 0; b < 2; ++b) {
        const auto cache = forward_batch(net, {frames, buckets.col(b)});
        const auto g = backward(net, cache, truth.col(b));
        // Batch loss is the mean over samples.
        zip_parameters([](auto& acc, const auto& part) { acc += 0.5 * part; }, summed, g);
    }
    zip_parameters([](const auto& a, const auto& b) { CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12); },
                   joint, summed);
}

TEST_CASE("init_network") {
    const auto a = init_network({785, 16, 2, 784}, 3);
    const auto b = init_network({785, 16, 2, 784}, 3);
    CHECK(a == b);
    CHECK_FALSE(a == init_network({785, 16, 2, 784}, 4));

    const double k = 1.0 / 4.0;
    for (const auto& layer : a.layers) {
        CHECK(layer.input_weights.cwiseAbs().maxCoeff() <= k);
        CHECK(layer.hidden_weights.cwiseAbs().maxCoeff() <= k);
    }
    CHECK(a.predictor.weights.cwiseAbs().maxCoeff() <= k);
    for (const auto& layer : a.layers) {
        CHECK(layer.bias.segment(16, 16) == VectorXd::Ones(16));
        CHECK(layer.bias.head(16).isZero(0.0));
        CHECK(layer.bias.tail(32).isZero(0.0));
    }
    CHECK(a.predictor.bias.isZero(0.0));

    const auto full = zero_network({785, 1024, 5, 784});
    CHECK(full.layers[0].input_weights.rows() == 4096);
    CHECK(full.layers[0].input_weights.cols() == 785);
    for (std::size_t l = 1; l < 5; ++l) {
        CHECK(full.layers[l].input_weights.rows() == 4096);
        CHECK(full.layers[l].input_weights.cols() == 1024);
    }

    CHECK_THROWS_AS(init_network({0, 4, 1, 4}, 1), InvalidArgument);
    CHECK_THROWS_AS(init_network({5, 0, 1, 4}, 1), InvalidArgument);
    CHECK_THROWS_AS(init_network({5, 4, 0, 4}, 1), InvalidArgument);
}

TEST_CASE("hidden states stay strictly inside (-1, 1)") {
    std::mt19937_64 rng(55);
    const auto net = random_network(rng, 6, 5, 2, 3, 3.0);
    const auto seq = random_sequence(rng, 6, 8);
    const auto out = forward(net, seq);
    for (const auto& layer : out.cache.layers) {
        for (const auto& h : layer.hidden) CHECK(h.cwiseAbs().maxCoeff() < 1.0);
    }
}
