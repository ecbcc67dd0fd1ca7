#pragma once

// Vanilla and calibrated loss metrics for binary classifiers and regressors.
//
// A calibrated metric splits the test set into a val-test part and a
// remaining-test part, fits a single bias constant on the val-test part, and
// scores the bias-adjusted predictions on the remaining-test part. For log
// loss the constant is a shift in logit space chosen to minimize the val-test
// log loss; for quadratic loss it is the additive shift mean(y) - mean(p).
//
// All functions are pure and thread-safe.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace calm {

inline constexpr double kDefaultEpsilon = 1e-12;

/// A probability strictly inside (0, 1), obtained by clamping into [eps, 1 - eps].
class Probability {
public:
    static Probability clamped(double p, double eps = kDefaultEpsilon) noexcept;

    double value() const noexcept { return value_; }

    auto operator<=>(const Probability&) const = default;

private:
    explicit Probability(double v) noexcept : value_(v) {}
    double value_;
};

double sigmoid(double x) noexcept;

/// log(p / (1 - p)).
double logit(Probability p) noexcept;

enum class Mode { classification, regression };

struct LabeledPrediction {
    double prediction;
    double label;

    bool operator==(const LabeledPrediction&) const = default;
};

/// Non-empty, ordered collection of (prediction, label) pairs.
///
/// Classification mode requires labels in {0, 1} and predictions in [0, 1];
/// predictions are clamped only when scored. Regression mode requires finite
/// values. Throws NumericalError("empty evaluation set") when empty and
/// InputError on a label or prediction that violates the mode.
class PredictionSet {
public:
    PredictionSet(std::vector<LabeledPrediction> items, Mode mode);

    std::span<const LabeledPrediction> items() const noexcept { return items_; }
    Mode mode() const noexcept { return mode_; }
    std::size_t size() const noexcept { return items_.size(); }

    bool operator==(const PredictionSet&) const = default;

private:
    std::vector<LabeledPrediction> items_;
    Mode mode_;
};

struct SplitSpec {
    double val_fraction;
    std::uint64_t seed;
};

enum class ShiftKind { logit_shift, additive_shift };

struct CalibrationConstant {
    double c;
    ShiftKind kind;
};

enum class MetricKind { log_loss, calibrated_log_loss, quadratic_loss, calibrated_quadratic_loss };

std::string_view to_string(MetricKind metric) noexcept;
/// Accepts the canonical names and the short forms ll, cll, ql, cql.
std::optional<MetricKind> parse_metric(std::string_view name) noexcept;
bool is_calibrated(MetricKind metric) noexcept;
/// Log-loss metrics need classification data; quadratic ones accept either mode.
bool requires_classification(MetricKind metric) noexcept;

struct RiskEstimate {
    double value;
    MetricKind metric;
    std::size_t n_eval;
    std::size_t n_cal;

    bool operator==(const RiskEstimate&) const = default;
};

/// Which part of the test set a vanilla metric is computed on when it is
/// scored alongside calibrated metrics.
enum class VanillaScope { full_test, remaining_test };

struct MetricOptions {
    double epsilon = kDefaultEpsilon;
    VanillaScope vanilla_scope = VanillaScope::full_test;
};

/// sigmoid(logit(p) - c). Only logit shifts apply here; an additive shift
/// throws InputError.
Probability bias_adjust(Probability p, CalibrationConstant c, double eps = kDefaultEpsilon);

/// Mean of -[y log p + (1 - y) log(1 - p)] with p clamped into [eps, 1 - eps].
RiskEstimate log_loss(const PredictionSet& data, const MetricOptions& options = {});

/// Mean of (y - p)^2.
RiskEstimate quadratic_loss(const PredictionSet& data);

/// Summed negative log-likelihood of the shifted predictions sigmoid(logit(p) - c).
/// This is the objective minimized by fit_log_calibration.
double calibration_objective(const PredictionSet& cal_data, double c,
                             const MetricOptions& options = {});

/// Solves for the logit shift that minimizes calibration_objective, i.e. the
/// root of sum_i sigmoid(logit(p_i) - c) - sum_i y_i, by bracketed bisection.
/// Throws CalibrationUnbounded when every label is identical.
CalibrationConstant fit_log_calibration(const PredictionSet& cal_data,
                                        const MetricOptions& options = {});

/// c = mean(y) - mean(p).
CalibrationConstant fit_quadratic_calibration(const PredictionSet& cal_data);

/// Partitions data into (val-test, remaining-test) by a seeded uniform
/// permutation; the val part takes the first round(val_fraction * n) items.
/// Throws NumericalError("degenerate split") if either part would be empty.
std::pair<PredictionSet, PredictionSet> split_test(const PredictionSet& data, const SplitSpec& split);

/// Size of the val-test part split_test would produce, after validation.
std::size_t val_part_size(std::size_t n, double val_fraction);

RiskEstimate calibrated_log_loss(const PredictionSet& val_test, const PredictionSet& remaining_test,
                                 const MetricOptions& options = {});
RiskEstimate calibrated_log_loss(const PredictionSet& test, const SplitSpec& split,
                                 const MetricOptions& options = {});

RiskEstimate calibrated_quadratic_loss(const PredictionSet& val_test,
                                       const PredictionSet& remaining_test);
RiskEstimate calibrated_quadratic_loss(const PredictionSet& test, const SplitSpec& split);

/// Scores any metric kind on one test set. Calibrated metrics split per
/// `split`; vanilla metrics use the whole set or the remaining-test part
/// depending on options.vanilla_scope.
RiskEstimate score_metric(MetricKind metric, const PredictionSet& test, const SplitSpec& split,
                          const MetricOptions& options = {});

/// score_metric for several metrics sharing one split of `test`.
std::vector<RiskEstimate> score_metrics(std::span<const MetricKind> metrics, const PredictionSet& test,
                                        const SplitSpec& split, const MetricOptions& options = {});

}  // namespace calm
