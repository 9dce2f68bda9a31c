#pragma once
// Independent reference computations used only by the tests. Nothing here
// calls into the code paths it checks.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Grid = std::vector<std::vector<double>>;

/// out[x][y] = sum_i P_i[x][y] * B_i with explicit (i, x, y) loops.
inline Grid correlation(const std::vector<Grid>& patterns, const std::vector<double>& buckets) {
    const std::size_t rows = patterns.front().size();
    const std::size_t cols = patterns.front().front().size();
    Grid out(rows, std::vector<double>(cols, 0.0));
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        for (std::size_t x = 0; x < rows; ++x) {
            for (std::size_t y = 0; y < cols; ++y) out[x][y] += patterns[i][x][y] * buckets[i];
        }
    }
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ScalarCell {
    std::vector<double> h, c;
};

/// Plain scalar-loop LSTM cell; W is 4H x in, U is 4H x H, gates [i f g o].
inline ScalarCell lstm_cell(const Eigen::MatrixXd& W, const Eigen::MatrixXd& U,
                            const Eigen::VectorXd& b, const std::vector<double>& x,
                            const std::vector<double>& h_prev, const std::vector<double>& c_prev) {
    const std::size_t hidden = h_prev.size();
    std::vector<double> pre(4 * hidden);
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
        double s = b(static_cast<Eigen::Index>(r));
        for (std::size_t k = 0; k < x.size(); ++k) {
            s += W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) * x[k];
        }
        for (std::size_t k = 0; k < hidden; ++k) {
            s += U(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) * h_prev[k];
        }
        pre[r] = s;
    }
    ScalarCell out{std::vector<double>(hidden), std::vector<double>(hidden)};
    for (std::size_t j = 0; j < hidden; ++j) {
        const double i = sigmoid(pre[j]);
        const double f = sigmoid(pre[hidden + j]);
        const double g = std::tanh(pre[2 * hidden + j]);
        const double o = sigmoid(pre[3 * hidden + j]);
        out.c[j] = f * c_prev[j] + i * g;
        out.h[j] = o * std::tanh(out.c[j]);
    }
    return out;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

/// Random matrix with entries uniform in [-scale, scale].
inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                     double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    }
    return m;
}

/// Largest eigenvalue of A^T A from a full symmetric eigendecomposition.
inline double top_eigenvalue(const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd gram = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    return solver.eigenvalues().maxCoeff();
}

}  // namespace oracle
