#include <doctest.h>

#include <algorithm>
#include <random>

#include "ghostrnn/errors.hpp"
#include "ghostrnn/mnist.hpp"
#include "ghostrnn/trainer.hpp"

using namespace ghostrnn;

namespace {

ImageTensor blob(std::mt19937_64& rng, std::size_t side) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(side * side);
    for (auto& x : v) x = u(rng) < 0.3 ? u(rng) : 0.0;
    return {side, side, std::move(v)};
}

std::vector<TrainingSample> synthetic(std::size_t n, const SpeckleSequence& speckles, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<TrainingSample> out;
    for (std::size_t k = 0; k < n; ++k) {
        const auto img = blob(rng, speckles.height());
        out.push_back({measure_sequence(speckles, img), flatten(img)});
    }
    return out;
}

TrainConfig quiet(std::size_t epochs, double lr, std::size_t batch = 4) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.adam.learning_rate = lr;
    c.shuffle_seed = 11;
    return c;
}

}  // namespace

TEST_CASE("history has one record per epoch and is reproducible") {
    const auto speckles = generate_speckles(2, 6, 5, 5);
    const auto data = synthetic(10, speckles, 1);
    const auto a = train(data, init_network({26, 6, 2, 25}, 3), quiet(4, 1e-3));
    const auto b = train(data, init_network({26, 6, 2, 25}, 3), quiet(4, 1e-3));
    REQUIRE(a.history.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(a.history[k].epoch == k + 1);
    CHECK(a.history == b.history);
    CHECK(a.model.network == b.model.network);
    CHECK(a.model.sequence_length == 6);
    CHECK(a.model.speckles.seed == 2);
    CHECK(a.model.preprocessing == b.model.preprocessing);
    CHECK(a.model.preprocessing.encoding == InputEncoding::modulated);
}

TEST_CASE("early training loss mostly decreases on a small config") {
    const auto speckles = generate_speckles(3, 20, 8, 8);
    const auto data = synthetic(64, speckles, 2);
    const auto r = train(data, init_network({65, 16, 2, 64}, 1), quiet(4, 1e-3, 8));
    int down = 0;
    for (std::size_t k = 1; k < 4; ++k) down += r.history[k].mean_loss <= r.history[k - 1].mean_loss ? 1 : 0;
    CHECK(down >= 2);
}

TEST_CASE("a tiny network memorizes one MNIST sample") {
    const auto set = load_mnist_idx(GHOSTRNN_DATA_DIR "/train-images-idx3-ubyte",
                                    GHOSTRNN_DATA_DIR "/train-labels-idx1-ubyte");
    const auto one = select_training_subset(set, 1, 4);
    const auto speckles = generate_speckles(1, 784, 28, 28);
    const auto data = build_sequences(one, speckles, 0.25);
    const auto net = init_network({785, 16, 1, 784}, 2);
    const auto r = train(data, net, quiet(200, 1e-2, 1));
    CHECK(r.history.back().mean_loss < 0.1 * r.history.front().mean_loss);
}

TEST_CASE("training rejects bad datasets") {
    const auto speckles = generate_speckles(2, 6, 5, 5);
    auto data = synthetic(4, speckles, 1);
    const auto net = init_network({26, 4, 1, 25}, 3);
    CHECK_THROWS_AS(train(std::vector<TrainingSample>{}, net, quiet(1, 1e-3)), InvalidArgument);

    auto mixed = data;
    const auto other = generate_speckles(9, 6, 5, 5);
    mixed.push_back(synthetic(1, other, 5).front());
    CHECK_THROWS_AS(train(mixed, net, quiet(1, 1e-3)), InvalidArgument);

    CHECK_THROWS_AS(train(data, init_network({30, 4, 1, 25}, 3), quiet(1, 1e-3)), InvalidArgument);
    CHECK_THROWS_AS(train(data, init_network({26, 4, 1, 20}, 3), quiet(1, 1e-3)), InvalidArgument);
    CHECK_THROWS_AS(train(data, net, quiet(1, 1e-3, 0)), InvalidArgument);
}

TEST_CASE("preprocessing statistics") {
    const auto speckles = generate_speckles(2, 6, 5, 5);
    const auto data = synthetic(7, speckles, 3);
    const auto norm = fit_preprocessing(data, InputEncoding::normalized);
    double sum = 0.0, n = 0.0;
    for (const auto& s : data) {
        for (double b : s.measurements.buckets) {
            sum += b / 25.0;
            n += 1.0;
        }
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& s : data) {
        for (double b : s.measurements.buckets) sq += (b / 25.0 - mean) * (b / 25.0 - mean);
    }
    CHECK(norm.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(norm.stddev == doctest::Approx(std::sqrt(sq / n)).epsilon(1e-9));

    // A constant signal keeps unit spread.
    std::vector<TrainingSample> flat{{measure_sequence(speckles, ImageTensor::zeros(5, 5)), Eigen::VectorXd::Zero(25)}};
    CHECK(fit_preprocessing(flat, InputEncoding::modulated).stddev == 1.0);
    CHECK(fit_preprocessing(data, InputEncoding::raw) == InputPreprocessing{});
    CHECK(fit_preprocessing(data, InputEncoding::modulated).mean == norm.mean);

    for (auto e : {InputEncoding::raw, InputEncoding::normalized, InputEncoding::modulated}) {
        CHECK(parse_input_encoding(to_string(e)) == e);
    }
    CHECK_THROWS_AS(parse_input_encoding("centered"), InvalidArgument);
}

TEST_CASE("make_batch packs shared frames and scaled buckets") {
    const auto speckles = generate_speckles(2, 3, 2, 2);
    const auto data = synthetic(2, speckles, 4);
    const MeasurementSequence* members[] = {&data[0].measurements, &data[1].measurements};
    const auto batch = make_batch(members);
    CHECK(batch.shared == speckles.matrix());
    for (Eigen::Index t = 0; t < 3; ++t) {
        CHECK(batch.scaled_buckets(t, 1) == data[1].measurements.buckets[static_cast<std::size_t>(t)] / 4.0);
    }
    CHECK_FALSE(batch.modulated);
    const auto shifted = make_batch(members, {InputEncoding::normalized, 0.5, 2.0});
    CHECK(shifted.scaled_buckets(0, 0) == (data[0].measurements.buckets[0] / 4.0 - 0.5) / 2.0);
    CHECK(shifted.shared == speckles.matrix());
    const auto mod = make_batch(members, {InputEncoding::modulated, 0.5, 2.0});
    CHECK(mod.modulated);
    CHECK(mod.scaled_buckets == shifted.scaled_buckets);
    CHECK(mod.shared == (2.0 * speckles.matrix().array() - 1.0).matrix());
    CHECK_THROWS_AS(make_batch(members, {InputEncoding::normalized, 0.0, 0.0}), InvalidArgument);

    const auto other = synthetic(1, generate_speckles(3, 3, 2, 2), 4);
    const MeasurementSequence* mixed[] = {&data[0].measurements, &other[0].measurements};
    CHECK_THROWS_AS(make_batch(mixed), InvalidArgument);
}

TEST_CASE("predict_image clips, checks provenance and depends on step order") {
    const auto speckles = generate_speckles(6, 8, 4, 4);
    const auto data = synthetic(6, speckles, 8);
    auto r = train(data, init_network({17, 8, 2, 16}, 5), quiet(3, 1e-2, 2));
    r.model.network.predictor.bias.head(2) << 5.0, -5.0;

    const auto img = predict_image(r.model, data[0].measurements);
    CHECK(img.height() == 4);
    CHECK(img.width() == 4);
    for (double v : img.flat()) CHECK((v >= 0.0 && v <= 1.0));

    std::vector<MeasurementSequence> all;
    for (const auto& s : data) all.push_back(s.measurements);
    const auto batch = predict_images(r.model, all);
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto single = predict_image(r.model, all[k]);
        for (std::size_t p = 0; p < 16; ++p) CHECK(batch[k].flat()[p] == doctest::Approx(single.flat()[p]).epsilon(1e-12));
    }

    const auto foreign = measure_sequence(generate_speckles(7, 8, 4, 4), unflatten(data[0].truth, 4, 4));
    CHECK_THROWS_WITH_AS(predict_image(r.model, foreign), doctest::Contains("speckle mismatch"), InvalidArgument);

    // Reversing the (speckle, bucket) steps changes the raw network output.
    const auto& m = data[0].measurements;
    std::vector<StepInput> forward_steps, reversed;
    for (std::size_t t = 0; t < m.size(); ++t) {
        forward_steps.push_back(encode_step(m.speckles.pattern(t), m.buckets[t], 16));
    }
    reversed.assign(forward_steps.rbegin(), forward_steps.rend());
    CHECK_FALSE(forward(r.model.network, forward_steps).prediction.isApprox(
        forward(r.model.network, reversed).prediction, 1e-9));
}

TEST_CASE("explicit preprocessed steps reproduce the batched forward and gradients") {
    const auto speckles = generate_speckles(12, 7, 3, 3, SpeckleDistribution::uniform);
    const auto data = synthetic(3, speckles, 21);
    const auto net = init_network({10, 5, 2, 9}, 4);
    const MeasurementSequence* members[] = {&data[0].measurements, &data[1].measurements,
                                            &data[2].measurements};
    Eigen::MatrixXd truth(9, 3);
    for (Eigen::Index b = 0; b < 3; ++b) truth.col(b) = data[static_cast<std::size_t>(b)].truth;

    for (auto encoding : {InputEncoding::raw, InputEncoding::normalized, InputEncoding::modulated}) {
        CAPTURE(to_string(encoding));
        const auto prep = fit_preprocessing(data, encoding);
        const auto cache = forward_batch(net, make_batch(members, prep));
        const auto grads = backward(net, cache, truth);

        // The same batch assembled from per-step vectors through the plain input path.
        auto expected = zeros_like(net);
        for (Eigen::Index b = 0; b < 3; ++b) {
            const auto steps = preprocess(*members[b], prep);
            REQUIRE(steps.size() == 7);
            for (const auto& x : steps) REQUIRE(x.size() == 10);
            if (encoding == InputEncoding::raw) {
                const auto& m = *members[b];
                for (std::size_t t = 0; t < 7; ++t) {
                    CHECK(steps[t] == encode_step(m.speckles.pattern(t), m.buckets[t], 9));
                }
            }
            const auto one = forward(net, steps);
            CHECK((one.prediction - cache.prediction.col(b)).cwiseAbs().maxCoeff() < 1e-12);
            // Per-sample gradient of the batch mean is a third of the single-sample one.
            const auto g = backward(net, one.cache, truth.col(b));
            zip_parameters([](auto& acc, const auto& part) { acc += part / 3.0; }, expected, g);
        }
        double worst = 0.0;
        zip_parameters(
            [&worst](const auto& a, const auto& e) { worst = std::max(worst, (a - e).cwiseAbs().maxCoeff()); },
            grads, expected);
        CHECK(worst < 1e-12);
    }
}
