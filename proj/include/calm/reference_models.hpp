#pragma once

// Deterministic convex trainers used as synthetic pipelines: ordinary least
// squares with intercept, and maximum-likelihood logistic regression with
// intercept fitted by Newton's method.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "calm/metric_engine.hpp"

namespace calm {

/// n x d feature matrix with a length-n label vector. d may be 0.
struct DesignMatrix {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(x.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(x.cols()); }

    /// Throws InputError on a shape mismatch or a non-finite entry.
    void validate() const;
};

struct LinearModel {
    Eigen::VectorXd beta;
    double alpha = 0.0;
};

struct LogisticModel {
    Eigen::VectorXd beta;
    double alpha = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;             // infinity norm of the mean-NLL gradient
    std::vector<double> objective_trace;  // mean NLL after each accepted step, starting at 0
};

struct LogisticOptions {
    double tol = 1e-8;
    int max_iter = 100;
    double max_param_norm = 1e6;
};

/// Least squares via the demeaned normal equations: beta solves
/// Xc' Xc beta = Xc' (y - ybar), alpha = ybar - beta' xbar.
/// Throws NumericalError("rank deficient") if n < d + 1 or the centered Gram
/// matrix has condition estimate above 1e12.
LinearModel fit_ols(const DesignMatrix& train);

double predict_linear(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict_linear_rows(const LinearModel& model, const Eigen::MatrixXd& x);

/// Mean negative log-likelihood of (beta, alpha) on the data; labels in {0, 1}.
double logistic_objective(const DesignMatrix& data, const Eigen::VectorXd& beta, double alpha);

/// Newton-Raphson with step halving on the mean negative log-likelihood.
/// Converged when the gradient infinity norm is at most options.tol and the
/// Newton step infinity norm is at most 1e-6.
/// Throws InputError for non-binary labels, NumericalError for a single class, and
/// NumericalError("did not converge") when max_iter is exhausted or the
/// parameter norm exceeds options.max_param_norm.
LogisticModel fit_logistic(const DesignMatrix& train, const LogisticOptions& options = {});

Probability predict_logistic(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                             double eps = kDefaultEpsilon);

/// Unclamped sigmoid(X beta + alpha) for every row.
Eigen::VectorXd predict_logistic_rows(const LogisticModel& model, const Eigen::MatrixXd& x);

}  // namespace calm
