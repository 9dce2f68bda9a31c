#include "ghostrnn/fista.hpp"

#include <cmath>
#include <random>

#include "ghostrnn/correlation.hpp"
#include "ghostrnn/errors.hpp"

namespace ghostrnn {

namespace {

constexpr double kLipschitzSafety = 1.01;
constexpr int kPowerMinIterations = 30;
constexpr int kPowerMaxIterations = 1000;
constexpr double kPowerTolerance = 1e-10;

}  // namespace

void CsProblem::validate() const {
    if (sensing.rows() == 0 || sensing.cols() == 0) {
        throw InvalidArgument("CsProblem: empty sensing matrix");
    }
    if (observations.size() != sensing.rows()) {
        throw InvalidArgument("CsProblem: " + std::to_string(observations.size()) +
                              " observations for " + std::to_string(sensing.rows()) + " rows");
    }
    if (height * width != static_cast<std::size_t>(sensing.cols())) {
        throw InvalidArgument("CsProblem: row length does not match image shape");
    }
    if (!(lambda >= 0.0)) throw InvalidArgument("CsProblem: lambda must be >= 0");
    if (!(tolerance > 0.0)) throw InvalidArgument("CsProblem: tolerance must be > 0");
    if (max_iterations <= 0) throw InvalidArgument("CsProblem: max_iterations must be positive");
}

CsProblem make_cs_problem(const MeasurementSequence& measurements, double lambda_scale,
                          int max_iterations, double tolerance) {
    if (measurements.buckets.size() != measurements.speckles.count()) {
        throw InvalidArgument("make_cs_problem: bucket count differs from speckle count");
    }
    CsProblem problem;
    problem.sensing = measurements.speckles.matrix().transpose();
    problem.observations = Eigen::Map<const Eigen::VectorXd>(
        measurements.buckets.data(), static_cast<Eigen::Index>(measurements.buckets.size()));
    problem.lambda =
        lambda_scale * (problem.sensing.transpose() * problem.observations).cwiseAbs().maxCoeff();
    problem.max_iterations = max_iterations;
    problem.tolerance = tolerance;
    problem.height = measurements.speckles.height();
    problem.width = measurements.speckles.width();
    return problem;
}

double soft_threshold(double v, double theta) {
    if (!(theta >= 0.0)) throw InvalidArgument("soft_threshold: theta must be >= 0");
    const double magnitude = std::abs(v) - theta;
    if (magnitude <= 0.0) return 0.0;
    return v < 0.0 ? -magnitude : magnitude;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double theta) {
    if (!(theta >= 0.0)) throw InvalidArgument("soft_threshold: theta must be >= 0");
    return v.unaryExpr([theta](double x) { return soft_threshold(x, theta); });
}

double lipschitz_estimate(const Eigen::MatrixXd& sensing) {
    if (sensing.size() == 0) throw InvalidArgument("lipschitz_estimate: empty matrix");
    if (sensing.cwiseAbs().maxCoeff() == 0.0) return 1.0;

    std::mt19937_64 engine(0x5eed);
    Eigen::VectorXd v(sensing.cols());
    for (auto& x : v) x = static_cast<double>(engine() >> 11) * 0x1.0p-53 + 0.5;
    v.normalize();

    double estimate = 0.0;
    for (int k = 0; k < kPowerMaxIterations; ++k) {
        Eigen::VectorXd w = sensing.transpose() * (sensing * v);
        const double next = w.norm();
        if (next == 0.0) break;
        const double change = std::abs(next - estimate) / next;
        estimate = next;
        v = w / next;
        if (k + 1 >= kPowerMinIterations && change < kPowerTolerance) break;
    }
    return estimate > 0.0 ? kLipschitzSafety * estimate : 1.0;
}

double cs_objective(const CsProblem& problem, const Eigen::VectorXd& x) {
    return 0.5 * (problem.sensing * x - problem.observations).squaredNorm() +
           problem.lambda * x.lpNorm<1>();
}

Eigen::VectorXd proximal_step(const CsProblem& problem, const Eigen::VectorXd& x, double lipschitz) {
    const Eigen::VectorXd gradient =
        problem.sensing.transpose() * (problem.sensing * x - problem.observations);
    return soft_threshold(x - gradient / lipschitz, problem.lambda / lipschitz);
}

FistaResult fista_reconstruct(const CsProblem& problem) {
    problem.validate();
    if (!problem.sensing.allFinite() || !problem.observations.allFinite()) {
        throw NumericalError("fista_reconstruct: non-finite problem data", 0);
    }
    const double lipschitz = lipschitz_estimate(problem.sensing);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.sensing.cols());
    Eigen::VectorXd y = x;
    double t = 1.0;
    int iterations = 0;
    while (iterations < problem.max_iterations) {
        ++iterations;
        Eigen::VectorXd next = proximal_step(problem, y, lipschitz);
        if (!next.allFinite()) {
            throw NumericalError("fista_reconstruct: non-finite iterate", iterations);
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double change = (next - x).norm() / std::max(next.norm(), 1e-300);
        y = next + ((t - 1.0) / t_next) * (next - x);
        x = std::move(next);
        t = t_next;
        if (change < problem.tolerance) break;
    }

    RawGrid raw{problem.height, problem.width, std::vector<double>(x.data(), x.data() + x.size())};
    FistaResult result;
    result.image = normalize_minmax(raw);
    result.objective = cs_objective(problem, x);
    result.iterations = iterations;
    result.solution = std::move(x);
    return result;
}

}  // namespace ghostrnn
