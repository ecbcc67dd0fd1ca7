#include "calm/metric_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "calm/error.hpp"
#include "calm/stats.hpp"

namespace calm {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void require_classification(const PredictionSet& data, const char* what) {
    if (data.mode() != Mode::classification) {
        throw InputError(std::string(what) + " requires a classification prediction set");
    }
}

void require_finite_epsilon(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw InputError("clamp epsilon must lie in (0, 0.5)");
}

constexpr double kInitialBracket = 40.0;
constexpr double kMaxBracket = 1e8;
constexpr double kRootTolerancePerItem = 1e-10;
constexpr double kBracketWidthTolerance = 1e-12;

}  // namespace

Probability Probability::clamped(double p, double eps) noexcept {
    return Probability(std::clamp(p, eps, 1.0 - eps));
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(Probability p) noexcept {
    return std::log(p.value()) - std::log1p(-p.value());
}

PredictionSet::PredictionSet(std::vector<LabeledPrediction> items, Mode mode)
    : items_(std::move(items)), mode_(mode) {
    if (items_.empty()) throw NumericalError("empty evaluation set");
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& item = items_[i];
        if (!std::isfinite(item.prediction) || !std::isfinite(item.label)) {
            throw InputError("non-finite value at item " + std::to_string(i));
        }
        if (mode_ == Mode::classification) {
            if (item.label != 0.0 && item.label != 1.0) {
                throw InputError("classification label must be 0 or 1 at item " + std::to_string(i));
            }
            if (item.prediction < 0.0 || item.prediction > 1.0) {
                throw InputError("classification prediction outside [0, 1] at item " +
                                 std::to_string(i));
            }
        }
    }
}

std::string_view to_string(MetricKind metric) noexcept {
    switch (metric) {
        case MetricKind::log_loss: return "log_loss";
        case MetricKind::calibrated_log_loss: return "calibrated_log_loss";
        case MetricKind::quadratic_loss: return "quadratic_loss";
        case MetricKind::calibrated_quadratic_loss: return "calibrated_quadratic_loss";
    }
    return "unknown";
}

std::optional<MetricKind> parse_metric(std::string_view name) noexcept {
    if (name == "log_loss" || name == "ll") return MetricKind::log_loss;
    if (name == "calibrated_log_loss" || name == "cll") return MetricKind::calibrated_log_loss;
    if (name == "quadratic_loss" || name == "ql") return MetricKind::quadratic_loss;
    if (name == "calibrated_quadratic_loss" || name == "cql") {
        return MetricKind::calibrated_quadratic_loss;
    }
    return std::nullopt;
}

bool is_calibrated(MetricKind metric) noexcept {
    return metric == MetricKind::calibrated_log_loss ||
           metric == MetricKind::calibrated_quadratic_loss;
}

bool requires_classification(MetricKind metric) noexcept {
    return metric == MetricKind::log_loss || metric == MetricKind::calibrated_log_loss;
}

Probability bias_adjust(Probability p, CalibrationConstant c, double eps) {
    if (c.kind != ShiftKind::logit_shift) {
        throw InputError("bias_adjust applies a logit shift; got an additive shift");
    }
    if (!std::isfinite(c.c)) throw InputError("calibration constant must be finite");
    return Probability::clamped(sigmoid(logit(p) - c.c), eps);
}

RiskEstimate log_loss(const PredictionSet& data, const MetricOptions& options) {
    require_classification(data, "log_loss");
    require_finite_epsilon(options.epsilon);
    stats::CompensatedSum total;
    for (const auto& item : data.items()) {
        const double p = Probability::clamped(item.prediction, options.epsilon).value();
        total.add(item.label == 1.0 ? -std::log(p) : -std::log1p(-p));
    }
    return {total.value() / static_cast<double>(data.size()), MetricKind::log_loss, data.size(), 0};
}

RiskEstimate quadratic_loss(const PredictionSet& data) {
    stats::CompensatedSum total;
    for (const auto& item : data.items()) {
        const double r = item.label - item.prediction;
        total.add(r * r);
    }
    return {total.value() / static_cast<double>(data.size()), MetricKind::quadratic_loss,
            data.size(), 0};
}

double calibration_objective(const PredictionSet& cal_data, double c, const MetricOptions& options) {
    require_classification(cal_data, "calibration_objective");
    stats::CompensatedSum total;
    for (const auto& item : cal_data.items()) {
        const double z = logit(Probability::clamped(item.prediction, options.epsilon)) - c;
        // -log(sigmoid(z)) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z).
        total.add(item.label == 1.0 ? softplus(-z) : softplus(z));
    }
    return total.value();
}

CalibrationConstant fit_log_calibration(const PredictionSet& cal_data, const MetricOptions& options) {
    require_classification(cal_data, "fit_log_calibration");
    require_finite_epsilon(options.epsilon);

    const auto n = cal_data.size();
    std::vector<double> logits;
    logits.reserve(n);
    double positives = 0.0;
    for (const auto& item : cal_data.items()) {
        logits.push_back(logit(Probability::clamped(item.prediction, options.epsilon)));
        positives += item.label;
    }
    if (positives == 0.0 || positives == static_cast<double>(n)) throw CalibrationUnbounded();

    // g is strictly decreasing in c, positive as c -> -inf and negative as c -> +inf.
    const auto g = [&](double c) {
        stats::CompensatedSum s;
        for (double z : logits) s.add(sigmoid(z - c));
        return s.value() - positives;
    };

    double lo = -kInitialBracket;
    double hi = kInitialBracket;
    while (g(lo) <= 0.0) {
        lo *= 2.0;
        if (lo < -kMaxBracket) throw NumericalError("calibration bracket expansion failed");
    }
    while (g(hi) >= 0.0) {
        hi *= 2.0;
        if (hi > kMaxBracket) throw NumericalError("calibration bracket expansion failed");
    }

    const double g_tol = static_cast<double>(n) * kRootTolerancePerItem;
    double mid = 0.5 * (lo + hi);
    for (;;) {
        const double gm = g(mid);
        if (std::abs(gm) <= g_tol) break;
        if (gm > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        if (hi - lo <= kBracketWidthTolerance) break;
    }
    return {mid, ShiftKind::logit_shift};
}

CalibrationConstant fit_quadratic_calibration(const PredictionSet& cal_data) {
    stats::CompensatedSum residual;
    for (const auto& item : cal_data.items()) residual.add(item.label - item.prediction);
    return {residual.value() / static_cast<double>(cal_data.size()), ShiftKind::additive_shift};
}

std::size_t val_part_size(std::size_t n, double val_fraction) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw InputError("val_fraction must lie in (0, 1)");
    }
    const auto k = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    if (n < 2 || k < 1 || k > n - 1) throw NumericalError("degenerate split");
    return k;
}

std::pair<PredictionSet, PredictionSet> split_test(const PredictionSet& data, const SplitSpec& split) {
    const auto n = data.size();
    const auto k = val_part_size(n, split.val_fraction);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(split.seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto items = data.items();
    std::vector<LabeledPrediction> val;
    std::vector<LabeledPrediction> rest;
    val.reserve(k);
    rest.reserve(n - k);
    for (std::size_t i = 0; i < n; ++i) {
        (i < k ? val : rest).push_back(items[order[i]]);
    }
    return {PredictionSet(std::move(val), data.mode()), PredictionSet(std::move(rest), data.mode())};
}

RiskEstimate calibrated_log_loss(const PredictionSet& val_test, const PredictionSet& remaining_test,
                                 const MetricOptions& options) {
    require_classification(remaining_test, "calibrated_log_loss");
    const auto c = fit_log_calibration(val_test, options);

    std::vector<LabeledPrediction> adjusted;
    adjusted.reserve(remaining_test.size());
    for (const auto& item : remaining_test.items()) {
        const auto q = bias_adjust(Probability::clamped(item.prediction, options.epsilon), c,
                                   options.epsilon);
        adjusted.push_back({q.value(), item.label});
    }
    auto risk = log_loss(PredictionSet(std::move(adjusted), Mode::classification), options);
    risk.metric = MetricKind::calibrated_log_loss;
    risk.n_cal = val_test.size();
    return risk;
}

RiskEstimate calibrated_log_loss(const PredictionSet& test, const SplitSpec& split,
                                 const MetricOptions& options) {
    const auto [val, rest] = split_test(test, split);
    return calibrated_log_loss(val, rest, options);
}

RiskEstimate calibrated_quadratic_loss(const PredictionSet& val_test,
                                       const PredictionSet& remaining_test) {
    const double c = fit_quadratic_calibration(val_test).c;
    stats::CompensatedSum total;
    for (const auto& item : remaining_test.items()) {
        const double r = item.label - item.prediction - c;
        total.add(r * r);
    }
    return {total.value() / static_cast<double>(remaining_test.size()),
            MetricKind::calibrated_quadratic_loss, remaining_test.size(), val_test.size()};
}

RiskEstimate calibrated_quadratic_loss(const PredictionSet& test, const SplitSpec& split) {
    const auto [val, rest] = split_test(test, split);
    return calibrated_quadratic_loss(val, rest);
}

RiskEstimate score_metric(MetricKind metric, const PredictionSet& test, const SplitSpec& split,
                          const MetricOptions& options) {
    return score_metrics(std::span(&metric, 1), test, split, options).front();
}

std::vector<RiskEstimate> score_metrics(std::span<const MetricKind> metrics, const PredictionSet& test,
                                        const SplitSpec& split, const MetricOptions& options) {
    const bool needs_split =
        options.vanilla_scope == VanillaScope::remaining_test ||
        std::any_of(metrics.begin(), metrics.end(), [](MetricKind m) { return is_calibrated(m); });
    std::optional<std::pair<PredictionSet, PredictionSet>> parts;
    if (needs_split) parts.emplace(split_test(test, split));

    std::vector<RiskEstimate> out;
    out.reserve(metrics.size());
    for (const MetricKind metric : metrics) {
        const PredictionSet& vanilla_set =
            options.vanilla_scope == VanillaScope::remaining_test ? parts->second : test;
        switch (metric) {
            case MetricKind::log_loss: out.push_back(log_loss(vanilla_set, options)); break;
            case MetricKind::quadratic_loss: out.push_back(quadratic_loss(vanilla_set)); break;
            case MetricKind::calibrated_log_loss:
                out.push_back(calibrated_log_loss(parts->first, parts->second, options));
                break;
            case MetricKind::calibrated_quadratic_loss:
                out.push_back(calibrated_quadratic_loss(parts->first, parts->second));
                break;
        }
    }
    return out;
}

}  // namespace calm
