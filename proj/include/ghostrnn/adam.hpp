#pragma once

#include <cmath>
#include <cstdint>

#include "ghostrnn/errors.hpp"
#include "ghostrnn/lstm.hpp"

namespace ghostrnn {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  ///< L2 term added to the gradient

    bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
    AdamConfig config;
    NetworkGradients first_moment;
    NetworkGradients second_moment;
    std::int64_t step = 0;

    static AdamState fresh(const LstmNetwork& like, const AdamConfig& config = {}) {
        return {config, zeros_like(like), zeros_like(like), 0};
    }

    bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam update of one parameter block. `step` is the
/// already-incremented step counter (1 on the first update).
template <class Param, class Grad, class Moment>
void adam_update(Param& param, const Grad& grad, Moment& m, Moment& v, std::int64_t step,
                 const AdamConfig& config) {
    auto p = param.array();
    const auto g = (grad.array() + config.weight_decay * p).eval();
    m.array() = config.beta1 * m.array() + (1.0 - config.beta1) * g;
    v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * g.square();
    const double m_corr = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double v_corr = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    p -= config.learning_rate * (m.array() / m_corr) /
         ((v.array() / v_corr).sqrt() + config.epsilon);
}

/// One optimizer step over every parameter block of `params`.
inline void adam_step(LstmNetwork& params, const NetworkGradients& grads, AdamState& state) {
    if (params.layers.size() != grads.layers.size() ||
        params.layers.size() != state.first_moment.layers.size()) {
        throw InvalidArgument("adam_step: layer counts differ");
    }
    zip_parameters(
        [](const auto& p, const auto& g, const auto& m, const auto& v) {
            if (p.rows() != g.rows() || p.cols() != g.cols() || p.rows() != m.rows() ||
                p.cols() != m.cols() || p.rows() != v.rows() || p.cols() != v.cols()) {
                throw InvalidArgument("adam_step: parameter and gradient shapes differ");
            }
        },
        params, grads, state.first_moment, state.second_moment);
    ++state.step;
    zip_parameters(
        [&state](auto& p, const auto& g, auto& m, auto& v) {
            adam_update(p, g, m, v, state.step, state.config);
        },
        params, grads, state.first_moment, state.second_moment);
}

}  // namespace ghostrnn
