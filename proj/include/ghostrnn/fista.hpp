#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "ghostrnn/imaging.hpp"

namespace ghostrnn {

/// min_x 1/2 |A x - b|^2 + lambda |x|_1 with A's rows the flattened speckles
/// (pixel basis) and b the bucket values.
struct CsProblem {
    Eigen::MatrixXd sensing;       ///< N x pixel_count
    Eigen::VectorXd observations;  ///< N
    double lambda = 0.0;
    int max_iterations = 500;
    double tolerance = 1e-6;  ///< on |x_k - x_{k-1}| / |x_k|
    std::size_t height = 0;   ///< image shape used to reshape the solution
    std::size_t width = 0;

    void validate() const;
};

/// Builds the problem from measurements with lambda = lambda_scale * max|A^T b|.
CsProblem make_cs_problem(const MeasurementSequence& measurements, double lambda_scale = 0.01,
                          int max_iterations = 500, double tolerance = 1e-6);

struct FistaResult {
    Eigen::VectorXd solution;  ///< raw minimizer estimate, may contain negatives
    ImageTensor image;         ///< min-max normalized solution
    int iterations = 0;
    double objective = 0.0;
};

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double theta);
double soft_threshold(double v, double theta);

/// Power-iteration upper estimate of the top eigenvalue of A^T A, times 1.01.
/// Returns 1.0 for an all-zero matrix.
double lipschitz_estimate(const Eigen::MatrixXd& sensing);

double cs_objective(const CsProblem& problem, const Eigen::VectorXd& x);

/// One proximal-gradient step from `x` with step 1/lipschitz (no momentum).
Eigen::VectorXd proximal_step(const CsProblem& problem, const Eigen::VectorXd& x, double lipschitz);

/// Plain FISTA from x0 = 0. Throws NumericalError on a non-finite iterate.
FistaResult fista_reconstruct(const CsProblem& problem);

}  // namespace ghostrnn
