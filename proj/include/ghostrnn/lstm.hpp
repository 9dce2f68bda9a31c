#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ghostrnn/imaging.hpp"

namespace ghostrnn {

/// One time-step input: the flattened speckle followed by bucket / pixel_count.
using StepInput = Eigen::VectorXd;

StepInput encode_step(const SpecklePattern& speckle, double bucket, std::size_t pixel_count);

/// Gate blocks are stacked [input, forget, candidate, output], each
/// hidden_size rows.
struct LstmLayerParams {
    Eigen::MatrixXd input_weights;   ///< 4H x in_dim
    Eigen::MatrixXd hidden_weights;  ///< 4H x H
    Eigen::VectorXd bias;            ///< 4H

    Eigen::Index hidden_size() const { return hidden_weights.cols(); }
    Eigen::Index input_size() const { return input_weights.cols(); }
};

struct Predictor {
    Eigen::MatrixXd weights;  ///< output_dim x H
    Eigen::VectorXd bias;     ///< output_dim
};

struct NetworkShape {
    std::size_t input_size = 785;
    std::size_t hidden_size = 1024;
    std::size_t layers = 5;
    std::size_t output_size = 784;
};

/// Stacked LSTM plus a linear read-out of the top layer's final hidden state.
/// Gradients and optimizer moments reuse this type.
struct LstmNetwork {
    std::vector<LstmLayerParams> layers;
    Predictor predictor;

    Eigen::Index hidden_size() const { return layers.empty() ? 0 : layers.front().hidden_size(); }
    Eigen::Index input_size() const { return layers.empty() ? 0 : layers.front().input_size(); }
    Eigen::Index output_size() const { return predictor.weights.rows(); }
    NetworkShape shape() const;
    std::size_t parameter_count() const;

    /// Throws InvalidArgument if the blocks do not chain together.
    void validate() const;
    bool all_finite() const;

    bool operator==(const LstmNetwork& other) const;
};

using NetworkGradients = LstmNetwork;

/// Same shape as `net`, every entry zero.
LstmNetwork zeros_like(const LstmNetwork& net);
LstmNetwork zero_network(const NetworkShape& shape);

/// Calls f(a, b, ...) on corresponding parameter blocks of every network in
/// declaration order: per layer input_weights, hidden_weights, bias; then
/// predictor weights, predictor bias.
template <class F, class First, class... Rest>
void zip_parameters(F&& f, First& first, Rest&... rest) {
    for (std::size_t l = 0; l < first.layers.size(); ++l) {
        f(first.layers[l].input_weights, rest.layers[l].input_weights...);
        f(first.layers[l].hidden_weights, rest.layers[l].hidden_weights...);
        f(first.layers[l].bias, rest.layers[l].bias...);
    }
    f(first.predictor.weights, rest.predictor.weights...);
    f(first.predictor.bias, rest.predictor.bias...);
}

/// Weights uniform in [-1/sqrt(H), 1/sqrt(H)] drawn row-major per block in
/// declaration order from one mt19937_64 stream; forget-gate biases 1, all
/// other biases 0.
LstmNetwork init_network(const NetworkShape& shape, std::uint64_t seed);

struct CellState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

/// One step of a single layer for a single sample.
CellState lstm_cell_forward(const LstmLayerParams& params, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev);

/// A batch of sequences sharing their speckle frames. Column t of `shared`
/// holds the first input_size-1 entries of step t for every sample; row t of
/// `scaled_buckets` holds the final entry for each sample.
///
/// With `modulated` set, step t of sample b is instead
/// scaled_buckets(t, b) * [shared.col(t); 1].
struct SequenceBatch {
    Eigen::MatrixXd shared;          ///< (input_size-1) x T
    Eigen::MatrixXd scaled_buckets;  ///< T x B
    bool modulated = false;

    Eigen::Index steps() const { return shared.cols(); }
    Eigen::Index batch() const { return scaled_buckets.cols(); }

    static SequenceBatch from_steps(std::span<const StepInput> steps);
};

/// Per-layer activations of every step, kept for backpropagation.
struct ForwardCache {
    struct Layer {
        std::vector<Eigen::MatrixXd> gates;   ///< per step, 4H x B, post-activation
        std::vector<Eigen::MatrixXd> cells;   ///< per step, H x B
        std::vector<Eigen::MatrixXd> hidden;  ///< per step, H x B
    };
    std::vector<Layer> layers;
    SequenceBatch inputs;
    Eigen::MatrixXd prediction;  ///< output_dim x B
    NetworkShape shape;
};

/// Zero initial state, layers stacked bottom-to-top at each step, linear
/// predictor on the top layer's last hidden state.
ForwardCache forward_batch(const LstmNetwork& net, const SequenceBatch& batch);

struct ForwardResult {
    Eigen::VectorXd prediction;
    ForwardCache cache;
};

ForwardResult forward(const LstmNetwork& net, std::span<const StepInput> sequence);

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Mean over columns of the per-column MSE.
double batch_mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// Exact gradient of batch_mse_loss(cache.prediction, truth) by
/// backpropagation through time. `truth` is output_dim x B.
NetworkGradients backward(const LstmNetwork& net, const ForwardCache& cache,
                          const Eigen::MatrixXd& truth);

/// Largest |analytic - numeric| / max(|analytic| + |numeric|, 1e-12) over
/// every parameter, numeric by central differences of an extended-precision
/// (long double) forward pass.
double gradient_check(const LstmNetwork& net, std::span<const StepInput> sequence,
                      const Eigen::VectorXd& truth, double epsilon = 1e-5);

}  // namespace ghostrnn
