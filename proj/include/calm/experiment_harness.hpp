#pragma once

// Replicated pipeline-vs-pipeline experiments on the synthetic tasks, the
// pairwise accuracy estimator, per-round summaries, and Monte Carlo checks
// of the linear-regression scaling identity and variance inequality.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "calm/metric_engine.hpp"
#include "calm/reference_models.hpp"
#include "calm/synthetic_bench.hpp"

namespace calm {

enum class ModelKind { ols, logistic, external };

std::string_view to_string(ModelKind kind) noexcept;
std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept;

struct PipelineSpec {
    std::string id;
    ModelKind model_kind = ModelKind::ols;
    std::optional<std::vector<std::size_t>> feature_indices;  // nullopt: all columns
    std::vector<std::string> files;                            // external pipelines only

    bool operator==(const PipelineSpec&) const = default;
};

using SyntheticTask = std::variant<GaussianLinearConfig, LogisticConfig>;

enum class TestSetPolicy {
    shared_across_rounds,  // one test draw for the whole experiment
    shared_per_round,      // one test draw scores every run of both pipelines in a round
    fresh_per_replicate,   // each replicate draws its own test set
};

std::string_view to_string(TestSetPolicy policy) noexcept;
std::optional<TestSetPolicy> parse_test_set_policy(std::string_view name) noexcept;

struct ComparisonOptions {
    TestSetPolicy test_set = TestSetPolicy::shared_across_rounds;
    MetricOptions metric;
    std::optional<double> val_fraction;  // default: n_val_test / (n_val_test + n_remaining_test)
    LogisticOptions logistic;
};

struct ComparisonResult {
    MetricKind metric = MetricKind::log_loss;
    double acc_hat = 0.0;
    std::size_t m = 0;
    std::vector<double> risks_a;
    std::vector<double> risks_b;

    bool operator==(const ComparisonResult&) const = default;
};

/// Fraction of the m^2 ordered pairs (i, j) with risks_a[i] < risks_b[j].
/// Ties count as failures. Throws InputError on empty or unequal-length input.
double estimate_accuracy(std::span<const double> risks_a, std::span<const double> risks_b);

/// Fraction of pairs with risks_a[i] == risks_b[j].
double tie_fraction(std::span<const double> risks_a, std::span<const double> risks_b);

ComparisonResult make_comparison(MetricKind metric, std::vector<double> risks_a,
                                 std::vector<double> risks_b);

/// One round of m replicates. Replicate i trains both pipelines on the same
/// fresh training draw and scores every metric on the same test set with the
/// same split. Returns one result per requested metric, in request order.
std::vector<ComparisonResult> run_comparison(const SyntheticTask& task, const PipelineSpec& pipe_a,
                                             const PipelineSpec& pipe_b, std::size_t m,
                                             std::span<const MetricKind> metrics,
                                             std::uint64_t master_seed, std::uint64_t round_index,
                                             const ComparisonOptions& options = {});

/// run_comparison for round indices 0 .. rounds-1.
std::vector<std::vector<ComparisonResult>> run_rounds(const SyntheticTask& task,
                                                      const PipelineSpec& pipe_a,
                                                      const PipelineSpec& pipe_b, std::size_t rounds,
                                                      std::size_t m,
                                                      std::span<const MetricKind> metrics,
                                                      std::uint64_t master_seed,
                                                      const ComparisonOptions& options = {});

struct AccuracySummary {
    MetricKind metric = MetricKind::log_loss;
    double mean = 0.0;
    std::optional<double> standard_error;  // absent with fewer than two rounds
    std::vector<double> per_round;

    bool operator==(const AccuracySummary&) const = default;
};

struct RiskSummary {
    std::string pipeline;
    MetricKind metric = MetricKind::log_loss;
    double mean = 0.0;  // average over rounds of the per-round mean
    double std = 0.0;   // average over rounds of the per-round sample std
    std::vector<double> per_round_mean;
    std::vector<double> per_round_std;

    bool operator==(const RiskSummary&) const = default;
};

struct RoundSummary {
    std::vector<AccuracySummary> accuracy;
    std::vector<RiskSummary> risks;  // pipeline A metrics first, then pipeline B

    bool operator==(const RoundSummary&) const = default;
};

/// Throws InputError if there are no rounds or rounds disagree on metrics.
RoundSummary summarize_rounds(const std::vector<std::vector<ComparisonResult>>& rounds,
                              const std::string& id_a, const std::string& id_b);

struct Histogram {
    std::string pipeline;
    MetricKind metric = MetricKind::log_loss;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;

    bool operator==(const Histogram&) const = default;
};

/// Equal-width bins over [min, max] of values; the maximum falls in the last bin.
Histogram make_histogram(std::string pipeline, MetricKind metric, std::span<const double> values,
                         std::size_t bins);

// ---------------------------------------------------------------------------
// Linear-regression theory checks
// ---------------------------------------------------------------------------

enum class Verdict { pass, fail, inconclusive };

std::string_view to_string(Verdict verdict) noexcept;
std::optional<Verdict> parse_verdict(std::string_view name) noexcept;

enum class RiskSampling {
    // The residual y - h(x) of a fixed linear model is exactly Gaussian, so a
    // test draw of size T is summarized by its mean and centered sum of
    // squares, drawn directly from their normal and chi-square laws.
    sufficient_statistics,
    // Draw every test and calibration row.
    explicit_rows,
};

struct TheoryOptions {
    std::size_t test_draw = 100000;
    // The plug-in shift biases the calibrated risk up by a factor 1 + 1/calibration_draw.
    std::size_t calibration_draw = 100000000;
    double variance_floor = 1e-18;
    RiskSampling sampling = RiskSampling::sufficient_statistics;
};

/// Risks of one OLS fit: estimated on finite test draws, and exact
/// conditional expectations under the generator.
struct TheoryReplicate {
    double vanilla = 0.0;
    double calibrated = 0.0;
    double vanilla_exact = 0.0;
    double calibrated_exact = 0.0;
};

std::vector<TheoryReplicate> simulate_theory(const GaussianLinearConfig& config,
                                             std::size_t replications, std::uint64_t master_seed,
                                             const TheoryOptions& options = {});

struct TheoryCheck {
    std::string check;  // "scaling" or "variance"
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t replications = 0;
    double target = 0.0;       // 1 + 1/n
    double ratio_hat = 0.0;    // mean vanilla / mean calibrated
    double ratio_se = 0.0;     // delta-method standard error of ratio_hat
    double ratio_exact = 0.0;  // same ratio from exact conditional risks
    double mean_vanilla = 0.0;
    double mean_calibrated = 0.0;
    double var_vanilla = 0.0;
    double var_calibrated_scaled = 0.0;  // variance of (1 + 1/n) * calibrated
    double var_diff_se = 0.0;
    Verdict verdict = Verdict::inconclusive;

    bool operator==(const TheoryCheck&) const = default;
};

/// Pass when |ratio_hat - (1 + 1/n)| <= 3 ratio_se.
TheoryCheck scaling_check(const GaussianLinearConfig& config, std::span<const TheoryReplicate> reps);

/// Pass when var_vanilla - var_calibrated_scaled > 2 SE, fail when it is
/// below -2 SE, inconclusive otherwise or when both variances are under
/// variance_floor.
TheoryCheck variance_check(const GaussianLinearConfig& config, std::span<const TheoryReplicate> reps,
                           double variance_floor);

TheoryCheck verify_theorem_scaling(const GaussianLinearConfig& config, std::size_t replications,
                                   std::uint64_t master_seed, const TheoryOptions& options = {});
TheoryCheck verify_variance_reduction(const GaussianLinearConfig& config, std::size_t replications,
                                      std::uint64_t master_seed, const TheoryOptions& options = {});

}  // namespace calm
