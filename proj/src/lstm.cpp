#include "ghostrnn/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "ghostrnn/errors.hpp"
#include "ghostrnn/random.hpp"

namespace ghostrnn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Turns stacked pre-activations (4H x B) into gate values in place and
/// returns the new cell state.
MatrixXd activate(MatrixXd& z, const MatrixXd& c_prev, Index hidden) {
    z.topRows(2 * hidden) = z.topRows(2 * hidden).unaryExpr(&sigmoid);
    z.middleRows(2 * hidden, hidden) = z.middleRows(2 * hidden, hidden).array().tanh();
    z.bottomRows(hidden) = z.bottomRows(hidden).unaryExpr(&sigmoid);
    const auto i = z.topRows(hidden).array();
    const auto f = z.middleRows(hidden, hidden).array();
    const auto g = z.middleRows(2 * hidden, hidden).array();
    return (f * c_prev.array() + i * g).matrix();
}

MatrixXd hidden_from(const MatrixXd& gates, const MatrixXd& cells, Index hidden) {
    return (gates.bottomRows(hidden).array() * cells.array().tanh()).matrix();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

}  // namespace

StepInput encode_step(const SpecklePattern& speckle, double bucket, std::size_t pixel_count) {
    require(pixel_count > 0, "encode_step: pixel_count must be positive");
    require(speckle.size() == pixel_count,
            "encode_step: speckle has " + std::to_string(speckle.size()) + " pixels, expected " +
                std::to_string(pixel_count));
    StepInput x(static_cast<Index>(pixel_count + 1));
    const auto flat = speckle.flat();
    std::copy(flat.begin(), flat.end(), x.data());
    x(static_cast<Index>(pixel_count)) = bucket / static_cast<double>(pixel_count);
    return x;
}

NetworkShape LstmNetwork::shape() const {
    return {static_cast<std::size_t>(input_size()), static_cast<std::size_t>(hidden_size()),
            layers.size(), static_cast<std::size_t>(output_size())};
}

std::size_t LstmNetwork::parameter_count() const {
    std::size_t n = 0;
    zip_parameters([&n](const auto& block) { n += static_cast<std::size_t>(block.size()); }, *this);
    return n;
}

void LstmNetwork::validate() const {
    require(!layers.empty(), "LstmNetwork: no layers");
    const Index h = hidden_size();
    require(h > 0, "LstmNetwork: zero hidden size");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const Index in = l == 0 ? input_size() : h;
        require(in > 0, "LstmNetwork: zero input size");
        require(layer.input_weights.rows() == 4 * h && layer.input_weights.cols() == in &&
                    layer.hidden_weights.rows() == 4 * h && layer.hidden_weights.cols() == h &&
                    layer.bias.size() == 4 * h,
                "LstmNetwork: layer " + std::to_string(l) + " has inconsistent shapes");
    }
    require(predictor.weights.cols() == h && predictor.weights.rows() > 0 &&
                predictor.bias.size() == predictor.weights.rows(),
            "LstmNetwork: predictor does not match hidden size");
}

bool LstmNetwork::all_finite() const {
    bool finite = true;
    zip_parameters([&finite](const auto& block) { finite = finite && block.allFinite(); }, *this);
    return finite;
}

bool LstmNetwork::operator==(const LstmNetwork& other) const {
    if (layers.size() != other.layers.size()) return false;
    bool equal = true;
    zip_parameters(
        [&equal](const auto& a, const auto& b) {
            equal = equal && a.rows() == b.rows() && a.cols() == b.cols() && a == b;
        },
        *this, other);
    return equal;
}

LstmNetwork zeros_like(const LstmNetwork& net) {
    LstmNetwork out = net;
    zip_parameters([](auto& block) { block.setZero(); }, out);
    return out;
}

LstmNetwork zero_network(const NetworkShape& shape) {
    require(shape.input_size > 0 && shape.hidden_size > 0 && shape.layers > 0 &&
                shape.output_size > 0,
            "zero_network: all dimensions must be positive");
    const auto h = static_cast<Index>(shape.hidden_size);
    LstmNetwork net;
    for (std::size_t l = 0; l < shape.layers; ++l) {
        const Index in = l == 0 ? static_cast<Index>(shape.input_size) : h;
        net.layers.push_back({MatrixXd::Zero(4 * h, in), MatrixXd::Zero(4 * h, h), VectorXd::Zero(4 * h)});
    }
    net.predictor = {MatrixXd::Zero(static_cast<Index>(shape.output_size), h),
                     VectorXd::Zero(static_cast<Index>(shape.output_size))};
    return net;
}

LstmNetwork init_network(const NetworkShape& shape, std::uint64_t seed) {
    LstmNetwork net = zero_network(shape);
    const double k = 1.0 / std::sqrt(static_cast<double>(shape.hidden_size));
    Engine engine(seed);
    auto fill = [&](MatrixXd& m) {
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * unit_uniform(engine) - 1.0) * k;
        }
    };
    const auto h = static_cast<Index>(shape.hidden_size);
    for (auto& layer : net.layers) {
        fill(layer.input_weights);
        fill(layer.hidden_weights);
        layer.bias.segment(h, h).setOnes();
    }
    fill(net.predictor.weights);
    return net;
}

CellState lstm_cell_forward(const LstmLayerParams& params, const VectorXd& x,
                            const VectorXd& h_prev, const VectorXd& c_prev) {
    const Index h = params.hidden_size();
    require(params.input_weights.rows() == 4 * h && params.bias.size() == 4 * h &&
                params.hidden_weights.rows() == 4 * h,
            "lstm_cell_forward: inconsistent layer parameters");
    require(x.size() == params.input_size(), "lstm_cell_forward: input size mismatch");
    require(h_prev.size() == h && c_prev.size() == h, "lstm_cell_forward: state size mismatch");

    MatrixXd z = params.input_weights * x + params.hidden_weights * h_prev + params.bias;
    MatrixXd c = activate(z, c_prev, h);
    MatrixXd hidden = hidden_from(z, c, h);
    if (!c.allFinite() || !hidden.allFinite()) {
        throw NumericalError("lstm_cell_forward: non-finite state", 0);
    }
    return {hidden.col(0), c.col(0)};
}

SequenceBatch SequenceBatch::from_steps(std::span<const StepInput> steps) {
    require(!steps.empty(), "forward: empty sequence");
    const Index in = steps.front().size();
    require(in >= 1, "forward: zero-length step input");
    SequenceBatch batch{MatrixXd(in - 1, static_cast<Index>(steps.size())),
                        MatrixXd(static_cast<Index>(steps.size()), 1), false};
    for (std::size_t t = 0; t < steps.size(); ++t) {
        require(steps[t].size() == in, "forward: step inputs differ in length");
        const auto col = static_cast<Index>(t);
        batch.shared.col(col) = steps[t].head(in - 1);
        batch.scaled_buckets(col, 0) = steps[t](in - 1);
    }
    return batch;
}

ForwardCache forward_batch(const LstmNetwork& net, const SequenceBatch& batch) {
    net.validate();
    const Index h = net.hidden_size();
    const Index steps = batch.steps();
    const Index width = batch.batch();
    require(steps > 0 && width > 0, "forward: empty sequence");
    require(batch.shared.rows() + 1 == net.input_size(),
            "forward: step input length " + std::to_string(batch.shared.rows() + 1) +
                " does not match network input size " + std::to_string(net.input_size()));
    require(batch.scaled_buckets.rows() == steps, "forward: bucket rows do not match steps");

    ForwardCache cache;
    cache.shape = net.shape();
    cache.inputs = batch;
    cache.layers.resize(net.layers.size());
    for (auto& layer : cache.layers) {
        layer.gates.reserve(static_cast<std::size_t>(steps));
        layer.cells.reserve(static_cast<std::size_t>(steps));
        layer.hidden.reserve(static_cast<std::size_t>(steps));
    }

    const auto& bottom = net.layers.front();
    const Index shared_rows = batch.shared.rows();
    // The frames are common to the whole batch, so their projection is done once.
    const MatrixXd shared_projection =
        bottom.input_weights.leftCols(shared_rows) * batch.shared;
    const VectorXd bucket_weights = bottom.input_weights.col(shared_rows);
    const MatrixXd zero_state = MatrixXd::Zero(h, width);

    for (Index t = 0; t < steps; ++t) {
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            const auto& params = net.layers[l];
            auto& layer = cache.layers[l];
            const bool first = t == 0;
            const MatrixXd& h_prev = first ? zero_state : layer.hidden.back();
            const MatrixXd& c_prev = first ? zero_state : layer.cells.back();

            MatrixXd z(4 * h, width);
            if (l == 0 && batch.modulated) {
                z.noalias() = (shared_projection.col(t) + bucket_weights) * batch.scaled_buckets.row(t);
                z.colwise() += params.bias;
            } else if (l == 0) {
                z.noalias() = bucket_weights * batch.scaled_buckets.row(t);
                z.colwise() += shared_projection.col(t) + params.bias;
            } else {
                z.noalias() = params.input_weights * cache.layers[l - 1].hidden.back();
                z.colwise() += params.bias;
            }
            if (!first) z.noalias() += params.hidden_weights * h_prev;

            MatrixXd c = activate(z, c_prev, h);
            if (!c.allFinite()) {
                throw NumericalError("forward: non-finite cell state in layer " + std::to_string(l),
                                     static_cast<long>(t));
            }
            layer.hidden.push_back(hidden_from(z, c, h));
            layer.gates.push_back(std::move(z));
            layer.cells.push_back(std::move(c));
        }
    }

    cache.prediction = net.predictor.weights * cache.layers.back().hidden.back();
    cache.prediction.colwise() += net.predictor.bias;
    if (!cache.prediction.allFinite()) {
        throw NumericalError("forward: non-finite prediction", static_cast<long>(steps - 1));
    }
    return cache;
}

ForwardResult forward(const LstmNetwork& net, std::span<const StepInput> sequence) {
    ForwardCache cache = forward_batch(net, SequenceBatch::from_steps(sequence));
    VectorXd prediction = cache.prediction.col(0);
    return {std::move(prediction), std::move(cache)};
}

double mse_loss(const VectorXd& pred, const VectorXd& truth) {
    require(pred.size() == truth.size(), "mse_loss: length mismatch");
    require(pred.size() > 0, "mse_loss: empty vectors");
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double batch_mse_loss(const MatrixXd& pred, const MatrixXd& truth) {
    require(pred.rows() == truth.rows() && pred.cols() == truth.cols(),
            "batch_mse_loss: shape mismatch");
    require(pred.size() > 0, "batch_mse_loss: empty batch");
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

NetworkGradients backward(const LstmNetwork& net, const ForwardCache& cache, const MatrixXd& truth) {
    const NetworkShape shape = net.shape();
    require(cache.layers.size() == shape.layers &&
                cache.shape.hidden_size == shape.hidden_size &&
                cache.shape.input_size == shape.input_size &&
                cache.shape.output_size == shape.output_size && !cache.layers.empty() &&
                !cache.layers.front().hidden.empty(),
            "backward: cache was not produced by this network");
    require(truth.rows() == cache.prediction.rows() && truth.cols() == cache.prediction.cols(),
            "backward: truth shape does not match prediction");

    const Index h = net.hidden_size();
    const Index steps = cache.inputs.steps();
    const Index width = cache.inputs.batch();
    const std::size_t top = net.layers.size() - 1;

    NetworkGradients grads = zeros_like(net);
    const MatrixXd d_pred =
        (2.0 / static_cast<double>(truth.size())) * (cache.prediction - truth);
    const MatrixXd& h_last = cache.layers[top].hidden.back();
    grads.predictor.weights.noalias() = d_pred * h_last.transpose();
    grads.predictor.bias = d_pred.rowwise().sum();

    std::vector<MatrixXd> dh_next(net.layers.size(), MatrixXd::Zero(h, width));
    std::vector<MatrixXd> dc_next(net.layers.size(), MatrixXd::Zero(h, width));
    MatrixXd d_from_above(h, width);
    MatrixXd bottom_shared_grad(4 * h, steps);
    MatrixXd dz(4 * h, width);

    for (Index t = steps - 1; t >= 0; --t) {
        const auto st = static_cast<std::size_t>(t);
        for (std::size_t l = top + 1; l-- > 0;) {
            const auto& params = net.layers[l];
            const auto& layer = cache.layers[l];
            auto& g = grads.layers[l];

            MatrixXd dh = dh_next[l];
            if (l == top) {
                if (t == steps - 1) dh.noalias() += net.predictor.weights.transpose() * d_pred;
            } else {
                dh += d_from_above;
            }

            const auto gates = layer.gates[st].array();
            const auto i = gates.topRows(h);
            const auto f = gates.middleRows(h, h);
            const auto cand = gates.middleRows(2 * h, h);
            const auto o = gates.bottomRows(h);
            const auto tanh_c = layer.cells[st].array().tanh().eval();

            const auto dc = (dh.array() * o * (1.0 - tanh_c.square()) + dc_next[l].array()).eval();
            dz.topRows(h) = (dc * cand * i * (1.0 - i)).matrix();
            if (t > 0) {
                dz.middleRows(h, h) =
                    (dc * layer.cells[st - 1].array() * f * (1.0 - f)).matrix();
            } else {
                dz.middleRows(h, h).setZero();
            }
            dz.middleRows(2 * h, h) = (dc * i * (1.0 - cand.square())).matrix();
            dz.bottomRows(h) = (dh.array() * tanh_c * o * (1.0 - o)).matrix();
            dc_next[l] = (dc * f).matrix();

            g.bias += dz.rowwise().sum();
            if (t > 0) {
                g.hidden_weights.noalias() += dz * layer.hidden[st - 1].transpose();
                dh_next[l].noalias() = params.hidden_weights.transpose() * dz;
            }
            if (l > 0) {
                g.input_weights.noalias() += dz * cache.layers[l - 1].hidden[st].transpose();
                d_from_above.noalias() = params.input_weights.transpose() * dz;
            } else {
                const Index bucket_col = params.input_size() - 1;
                const VectorXd weighted = dz * cache.inputs.scaled_buckets.row(t).transpose();
                g.input_weights.col(bucket_col) += weighted;
                if (cache.inputs.modulated) {
                    bottom_shared_grad.col(t) = weighted;
                } else {
                    bottom_shared_grad.col(t) = dz.rowwise().sum();
                }
            }
        }
    }

    const Index shared_rows = cache.inputs.shared.rows();
    grads.layers.front().input_weights.leftCols(shared_rows).noalias() =
        bottom_shared_grad * cache.inputs.shared.transpose();
    return grads;
}

namespace {

using WideMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using WideVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

struct WideLayer {
    WideMatrix w, u;
    WideVector b;
};

struct WideNetwork {
    std::vector<WideLayer> layers;
    WideMatrix pw;
    WideVector pb;
};

long double wide_sigmoid(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

/// Single-sample loss in extended precision; the finite-difference side of
/// gradient_check, whose step differences are otherwise lost to roundoff for
/// gradients near 1e-9.
long double wide_loss(const WideNetwork& net, std::span<const StepInput> sequence, const WideVector& truth) {
    const Index h = net.pw.cols();
    std::vector<WideVector> hs(net.layers.size(), WideVector::Zero(h)), cs = hs;
    for (const auto& step : sequence) {
        WideVector x = step.cast<long double>();
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            const auto& p = net.layers[l];
            const WideVector z = p.w * x + p.u * hs[l] + p.b;
            for (Index j = 0; j < h; ++j) {
                const long double i = wide_sigmoid(z(j));
                const long double f = wide_sigmoid(z(h + j));
                const long double g = std::tanh(z(2 * h + j));
                const long double o = wide_sigmoid(z(3 * h + j));
                cs[l](j) = f * cs[l](j) + i * g;
                hs[l](j) = o * std::tanh(cs[l](j));
            }
            x = hs[l];
        }
    }
    const WideVector pred = net.pw * hs.back() + net.pb;
    return (pred - truth).squaredNorm() / static_cast<long double>(truth.size());
}

}  // namespace

double gradient_check(const LstmNetwork& net, std::span<const StepInput> sequence,
                      const VectorXd& truth, double epsilon) {
    require(epsilon > 0.0, "gradient_check: epsilon must be positive");
    const SequenceBatch batch = SequenceBatch::from_steps(sequence);
    const ForwardCache cache = forward_batch(net, batch);
    const NetworkGradients analytic = backward(net, cache, truth);

    WideNetwork probe;
    for (const auto& layer : net.layers) {
        probe.layers.push_back({layer.input_weights.cast<long double>(),
                                layer.hidden_weights.cast<long double>(), layer.bias.cast<long double>()});
    }
    probe.pw = net.predictor.weights.cast<long double>();
    probe.pb = net.predictor.bias.cast<long double>();
    const WideVector wide_truth = truth.cast<long double>();
    const long double eps = epsilon;

    double worst = 0.0;
    auto check_block = [&](auto& param, const auto& grad) {
        for (Index k = 0; k < param.size(); ++k) {
            const long double saved = param.data()[k];
            param.data()[k] = saved + eps;
            const long double up = wide_loss(probe, sequence, wide_truth);
            param.data()[k] = saved - eps;
            const long double down = wide_loss(probe, sequence, wide_truth);
            param.data()[k] = saved;
            const double numeric = static_cast<double>((up - down) / (2.0L * eps));
            const double exact = grad.data()[k];
            const double rel =
                std::abs(exact - numeric) / std::max(std::abs(exact) + std::abs(numeric), 1e-12);
            worst = std::max(worst, rel);
        }
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        check_block(probe.layers[l].w, analytic.layers[l].input_weights);
        check_block(probe.layers[l].u, analytic.layers[l].hidden_weights);
        check_block(probe.layers[l].b, analytic.layers[l].bias);
    }
    check_block(probe.pw, analytic.predictor.weights);
    check_block(probe.pb, analytic.predictor.bias);
    return worst;
}

}  // namespace ghostrnn
