#include "calm/reference_models.hpp"

#include <cmath>
#include <string>

#include "calm/error.hpp"

namespace calm {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr int kMaxHalvings = 60;
constexpr double kStepTol = 1e-6;

double softplus(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void require_dimension(Eigen::Index expected, Eigen::Index got) {
    if (expected != got) {
        throw InputError("dimension mismatch: model has " + std::to_string(expected) +
                         " coefficients, input has " + std::to_string(got));
    }
}

// Mean NLL for linear predictor z = X beta + alpha.
double mean_nll(const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z[i]) - y[i] * z[i];
    return total / static_cast<double>(z.size());
}

}  // namespace

void DesignMatrix::validate() const {
    if (x.rows() != y.size()) {
        throw InputError("design matrix has " + std::to_string(x.rows()) + " rows but " +
                         std::to_string(y.size()) + " labels");
    }
    if (!x.allFinite() || !y.allFinite()) throw InputError("design matrix has non-finite entries");
}

LinearModel fit_ols(const DesignMatrix& train) {
    train.validate();
    const auto n = train.x.rows();
    const auto d = train.x.cols();
    if (n < d + 1) throw NumericalError("rank deficient");

    const double ybar = train.y.mean();
    LinearModel model;
    if (d == 0) {
        model.beta = Eigen::VectorXd::Zero(0);
        model.alpha = ybar;
        return model;
    }

    const Eigen::RowVectorXd xbar = train.x.colwise().mean();
    const Eigen::MatrixXd xc = train.x.rowwise() - xbar;
    const Eigen::VectorXd yc = train.y.array() - ybar;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() * kMaxCondition >= 1.0)) {
        throw NumericalError("rank deficient");
    }
    model.beta = llt.solve(xc.transpose() * yc);
    model.alpha = ybar - xbar.dot(model.beta);
    return model;
}

double predict_linear(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    require_dimension(model.beta.size(), x.size());
    return model.beta.dot(x) + model.alpha;
}

Eigen::VectorXd predict_linear_rows(const LinearModel& model, const Eigen::MatrixXd& x) {
    require_dimension(model.beta.size(), x.cols());
    return (x * model.beta).array() + model.alpha;
}

double logistic_objective(const DesignMatrix& data, const Eigen::VectorXd& beta, double alpha) {
    require_dimension(beta.size(), data.x.cols());
    const Eigen::VectorXd z = (data.x * beta).array() + alpha;
    return mean_nll(z, data.y);
}

LogisticModel fit_logistic(const DesignMatrix& train, const LogisticOptions& options) {
    train.validate();
    const auto n = train.x.rows();
    const auto d = train.x.cols();
    if (n == 0) throw NumericalError("empty training set");
    bool has_zero = false;
    bool has_one = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (train.y[i] == 0.0) {
            has_zero = true;
        } else if (train.y[i] == 1.0) {
            has_one = true;
        } else {
            throw InputError("logistic labels must be 0 or 1");
        }
    }
    if (!has_zero || !has_one) throw NumericalError("logistic training data must contain both classes");

    // Augmented design [X, 1]; theta = [beta; alpha].
    Eigen::MatrixXd xa(n, d + 1);
    xa.leftCols(d) = train.x;
    xa.col(d).setOnes();
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    double objective = mean_nll(z, train.y);

    LogisticModel model;
    model.objective_trace.push_back(objective);

    for (int iter = 0;; ++iter) {
        Eigen::VectorXd p(n);
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = sigmoid(z[i]);
            w[i] = p[i] * (1.0 - p[i]);
        }
        const Eigen::VectorXd grad = xa.transpose() * (p - train.y) * inv_n;
        const double grad_norm = grad.lpNorm<Eigen::Infinity>();

        Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(d + 1, d + 1);
        hessian.selfadjointView<Eigen::Lower>().rankUpdate(
            (xa.array().colwise() * w.array().sqrt()).matrix().transpose(), inv_n);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian.selfadjointView<Eigen::Lower>());
        const Eigen::VectorXd step = ldlt.solve(grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            throw NumericalError("did not converge");
        }
        // On separable data the gradient vanishes while Newton steps stay large.
        if (grad_norm <= options.tol && step.lpNorm<Eigen::Infinity>() <= kStepTol) {
            model.beta = theta.head(d);
            model.alpha = theta[d];
            model.iterations = iter;
            model.gradient_norm = grad_norm;
            return model;
        }
        if (iter >= options.max_iter) throw NumericalError("did not converge");

        // Halve until the objective does not increase.
        double t = 1.0;
        Eigen::VectorXd candidate;
        Eigen::VectorXd z_candidate;
        double candidate_objective = 0.0;
        bool accepted = false;
        for (int h = 0; h <= kMaxHalvings; ++h, t *= 0.5) {
            candidate = theta - t * step;
            z_candidate = xa * candidate;
            candidate_objective = mean_nll(z_candidate, train.y);
            if (candidate_objective <= objective) {
                accepted = true;
                break;
            }
        }
        if (!accepted) throw NumericalError("did not converge");

        theta = std::move(candidate);
        z = std::move(z_candidate);
        objective = candidate_objective;
        model.objective_trace.push_back(objective);
        if (!(theta.norm() <= options.max_param_norm)) throw NumericalError("did not converge");
    }
}

Probability predict_logistic(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                             double eps) {
    require_dimension(model.beta.size(), x.size());
    return Probability::clamped(sigmoid(model.beta.dot(x) + model.alpha), eps);
}

Eigen::VectorXd predict_logistic_rows(const LogisticModel& model, const Eigen::MatrixXd& x) {
    require_dimension(model.beta.size(), x.cols());
    const Eigen::VectorXd z = (x * model.beta).array() + model.alpha;
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace calm
