#include "calm/experiment_harness.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <type_traits>

#include "calm/error.hpp"
#include "calm/parallel.hpp"
#include "calm/stats.hpp"

namespace calm {

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::ols: return "ols";
        case ModelKind::logistic: return "logistic";
        case ModelKind::external: return "external";
    }
    return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept {
    if (name == "ols") return ModelKind::ols;
    if (name == "logistic") return ModelKind::logistic;
    if (name == "external") return ModelKind::external;
    return std::nullopt;
}

std::string_view to_string(TestSetPolicy policy) noexcept {
    switch (policy) {
        case TestSetPolicy::shared_across_rounds: return "shared_across_rounds";
        case TestSetPolicy::shared_per_round: return "shared_per_round";
        case TestSetPolicy::fresh_per_replicate: return "fresh_per_replicate";
    }
    return "unknown";
}

std::optional<TestSetPolicy> parse_test_set_policy(std::string_view name) noexcept {
    if (name == "shared_across_rounds") return TestSetPolicy::shared_across_rounds;
    if (name == "shared_per_round") return TestSetPolicy::shared_per_round;
    if (name == "fresh_per_replicate") return TestSetPolicy::fresh_per_replicate;
    return std::nullopt;
}

std::string_view to_string(Verdict verdict) noexcept {
    switch (verdict) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::optional<Verdict> parse_verdict(std::string_view name) noexcept {
    if (name == "pass") return Verdict::pass;
    if (name == "fail") return Verdict::fail;
    if (name == "inconclusive") return Verdict::inconclusive;
    return std::nullopt;
}

namespace {

void require_pairable(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InputError("accuracy estimate needs at least one risk per side");
    if (a.size() != b.size()) throw InputError("risk vectors must have equal length");
}

DesignMatrix features_for(const PipelineSpec& pipe, const DesignMatrix& data) {
    if (!pipe.feature_indices) return data;
    return select_features(data, *pipe.feature_indices);
}

struct TaskView {
    std::size_t n_train;
    std::size_t n_val;
    std::size_t n_rest;
    bool logistic;
};

TaskView view_of(const SyntheticTask& task) {
    return std::visit(
        [](const auto& cfg) {
            cfg.validate();
            return TaskView{cfg.n_train, cfg.n_val_test, cfg.n_remaining_test,
                            std::is_same_v<std::decay_t<decltype(cfg)>, LogisticConfig>};
        },
        task);
}

DesignMatrix sample_task(const SyntheticTask& task, std::size_t n, std::uint64_t seed) {
    return std::visit(
        [&](const auto& cfg) {
            if constexpr (std::is_same_v<std::decay_t<decltype(cfg)>, LogisticConfig>) {
                return sample_logistic(cfg, n, seed);
            } else {
                return sample_linear(cfg, n, seed);
            }
        },
        task);
}

void check_pipeline(const PipelineSpec& pipe, const TaskView& view) {
    switch (pipe.model_kind) {
        case ModelKind::external:
            throw InputError("pipeline '" + pipe.id +
                             "' is external; score its prediction files with compare");
        case ModelKind::ols:
            if (view.logistic) throw InputError("pipeline '" + pipe.id + "': ols needs the linear task");
            break;
        case ModelKind::logistic:
            if (!view.logistic) {
                throw InputError("pipeline '" + pipe.id + "': logistic needs the logistic task");
            }
            break;
    }
}

// Fits one pipeline on train and returns its prediction set on test.
PredictionSet predict_pipeline(const PipelineSpec& pipe, const DesignMatrix& train,
                               const DesignMatrix& test, const ComparisonOptions& options) {
    const DesignMatrix train_x = features_for(pipe, train);
    const DesignMatrix test_x = features_for(pipe, test);

    std::vector<LabeledPrediction> items(test_x.rows());
    if (pipe.model_kind == ModelKind::ols) {
        const auto model = fit_ols(train_x);
        const Eigen::VectorXd p = predict_linear_rows(model, test_x.x);
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            items[i] = {p[r], test_x.y[r]};
        }
        return PredictionSet(std::move(items), Mode::regression);
    }
    const auto model = fit_logistic(train_x, options.logistic);
    const Eigen::VectorXd p = predict_logistic_rows(model, test_x.x);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        items[i] = {p[r], test_x.y[r]};
    }
    return PredictionSet(std::move(items), Mode::classification);
}

template <class E>
[[noreturn]] void rethrow_with_replicate(const E& e, std::size_t replicate) {
    throw E("replicate " + std::to_string(replicate) + ": " + e.what());
}

}  // namespace

double estimate_accuracy(std::span<const double> risks_a, std::span<const double> risks_b) {
    require_pairable(risks_a, risks_b);
    std::size_t wins = 0;
    for (double a : risks_a) {
        for (double b : risks_b) wins += a < b ? 1 : 0;
    }
    return static_cast<double>(wins) / static_cast<double>(risks_a.size() * risks_b.size());
}

double tie_fraction(std::span<const double> risks_a, std::span<const double> risks_b) {
    require_pairable(risks_a, risks_b);
    std::size_t ties = 0;
    for (double a : risks_a) {
        for (double b : risks_b) ties += a == b ? 1 : 0;
    }
    return static_cast<double>(ties) / static_cast<double>(risks_a.size() * risks_b.size());
}

ComparisonResult make_comparison(MetricKind metric, std::vector<double> risks_a,
                                 std::vector<double> risks_b) {
    ComparisonResult result;
    result.metric = metric;
    result.acc_hat = estimate_accuracy(risks_a, risks_b);
    result.m = risks_a.size();
    result.risks_a = std::move(risks_a);
    result.risks_b = std::move(risks_b);
    return result;
}

std::vector<ComparisonResult> run_comparison(const SyntheticTask& task, const PipelineSpec& pipe_a,
                                             const PipelineSpec& pipe_b, std::size_t m,
                                             std::span<const MetricKind> metrics,
                                             std::uint64_t master_seed, std::uint64_t round_index,
                                             const ComparisonOptions& options) {
    const TaskView view = view_of(task);
    if (m == 0) throw InputError("runs per pipeline must be at least 1");
    if (metrics.empty()) throw InputError("at least one metric is required");
    check_pipeline(pipe_a, view);
    check_pipeline(pipe_b, view);
    for (const MetricKind metric : metrics) {
        if (requires_classification(metric) && !view.logistic) {
            throw InputError(std::string(to_string(metric)) + " needs the logistic task");
        }
    }

    const ReplicateSeed round_seed{master_seed, 0, round_index};
    const double val_fraction =
        options.val_fraction.value_or(static_cast<double>(view.n_val) /
                                      static_cast<double>(view.n_val + view.n_rest));
    const SplitSpec split{val_fraction, derive_seed(round_seed, Stream::split)};

    std::optional<DesignMatrix> shared_test;
    if (options.test_set != TestSetPolicy::fresh_per_replicate) {
        const ReplicateSeed test_seed{master_seed, 0,
                                      options.test_set == TestSetPolicy::shared_per_round ? round_index : 0};
        shared_test = sample_task(task, view.n_val + view.n_rest,
                                  derive_seed(test_seed, Stream::shared_test));
    }

    // risks[i] holds pipeline A's metrics followed by pipeline B's.
    std::vector<std::vector<double>> risks(m);
    parallel_for(m, [&](std::size_t i) {
        try {
            const ReplicateSeed seed{master_seed, i, round_index};
            const DesignMatrix train = sample_task(task, view.n_train, derive_seed(seed, Stream::train));
            const DesignMatrix fresh_test =
                shared_test ? DesignMatrix{}
                            : sample_task(task, view.n_val + view.n_rest, derive_seed(seed, Stream::test));
            const DesignMatrix& test = shared_test ? *shared_test : fresh_test;

            std::vector<double> row;
            row.reserve(2 * metrics.size());
            for (const PipelineSpec* pipe : {&pipe_a, &pipe_b}) {
                const auto predictions = predict_pipeline(*pipe, train, test, options);
                for (const auto& risk : score_metrics(metrics, predictions, split, options.metric)) {
                    row.push_back(risk.value);
                }
            }
            risks[i] = std::move(row);
        } catch (const NumericalError& e) {
            rethrow_with_replicate(e, i);
        } catch (const InputError& e) {
            rethrow_with_replicate(e, i);
        }
    });

    std::vector<ComparisonResult> results;
    results.reserve(metrics.size());
    for (std::size_t k = 0; k < metrics.size(); ++k) {
        std::vector<double> a(m);
        std::vector<double> b(m);
        for (std::size_t i = 0; i < m; ++i) {
            a[i] = risks[i][k];
            b[i] = risks[i][metrics.size() + k];
        }
        results.push_back(make_comparison(metrics[k], std::move(a), std::move(b)));
    }
    return results;
}

std::vector<std::vector<ComparisonResult>> run_rounds(const SyntheticTask& task,
                                                      const PipelineSpec& pipe_a,
                                                      const PipelineSpec& pipe_b, std::size_t rounds,
                                                      std::size_t m,
                                                      std::span<const MetricKind> metrics,
                                                      std::uint64_t master_seed,
                                                      const ComparisonOptions& options) {
    if (rounds == 0) throw InputError("rounds must be at least 1");
    std::vector<std::vector<ComparisonResult>> out;
    out.reserve(rounds);
    for (std::size_t r = 0; r < rounds; ++r) {
        out.push_back(run_comparison(task, pipe_a, pipe_b, m, metrics, master_seed, r, options));
    }
    return out;
}

RoundSummary summarize_rounds(const std::vector<std::vector<ComparisonResult>>& rounds,
                              const std::string& id_a, const std::string& id_b) {
    if (rounds.empty()) throw InputError("no rounds to summarize");
    const auto& first = rounds.front();
    for (const auto& round : rounds) {
        if (round.size() != first.size()) throw InputError("rounds disagree on metric count");
        for (std::size_t k = 0; k < round.size(); ++k) {
            if (round[k].metric != first[k].metric) throw InputError("rounds disagree on metric order");
        }
    }

    RoundSummary summary;
    for (std::size_t k = 0; k < first.size(); ++k) {
        AccuracySummary acc;
        acc.metric = first[k].metric;
        for (const auto& round : rounds) acc.per_round.push_back(round[k].acc_hat);
        acc.mean = stats::mean(acc.per_round);
        if (rounds.size() >= 2) {
            acc.standard_error =
                stats::sample_std(acc.per_round) / std::sqrt(static_cast<double>(rounds.size()));
        }
        summary.accuracy.push_back(std::move(acc));
    }

    for (const bool side_a : {true, false}) {
        for (std::size_t k = 0; k < first.size(); ++k) {
            RiskSummary risk;
            risk.pipeline = side_a ? id_a : id_b;
            risk.metric = first[k].metric;
            for (const auto& round : rounds) {
                const auto& values = side_a ? round[k].risks_a : round[k].risks_b;
                risk.per_round_mean.push_back(stats::mean(values));
                risk.per_round_std.push_back(stats::sample_std(values));
            }
            risk.mean = stats::mean(risk.per_round_mean);
            risk.std = stats::mean(risk.per_round_std);
            summary.risks.push_back(std::move(risk));
        }
    }
    return summary;
}

Histogram make_histogram(std::string pipeline, MetricKind metric, std::span<const double> values,
                         std::size_t bins) {
    if (bins == 0) throw InputError("histogram needs at least one bin");
    if (values.empty()) throw InputError("histogram needs at least one value");
    Histogram h;
    h.pipeline = std::move(pipeline);
    h.metric = metric;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    h.lo = *lo;
    h.hi = *hi;
    h.counts.assign(bins, 0);
    const double width = (h.hi - h.lo) / static_cast<double>(bins);
    for (double v : values) {
        std::size_t bin = 0;
        if (width > 0.0) {
            bin = std::min(bins - 1, static_cast<std::size_t>((v - h.lo) / width));
        }
        ++h.counts[bin];
    }
    return h;
}

// ---------------------------------------------------------------------------
// Theory checks
// ---------------------------------------------------------------------------

std::vector<TheoryReplicate> simulate_theory(const GaussianLinearConfig& config,
                                             std::size_t replications, std::uint64_t master_seed,
                                             const TheoryOptions& options) {
    config.validate();
    if (replications < 2) throw InputError("theory checks need at least 2 replications");
    if (options.test_draw < 2 || options.calibration_draw < 1) {
        throw InputError("theory test draw must be at least 2 and calibration draw at least 1");
    }

    const double t = static_cast<double>(options.test_draw);
    const double c = static_cast<double>(options.calibration_draw);
    std::vector<TheoryReplicate> out(replications);
    parallel_for(replications, [&](std::size_t i) {
        const ReplicateSeed seed{master_seed, i, 0};
        const DesignMatrix train = sample_linear(config, config.n_train, derive_seed(seed, Stream::train));
        LinearModel model;
        try {
            model = fit_ols(train);
        } catch (const NumericalError& e) {
            rethrow_with_replicate(e, i);
        }

        // Residual r = y - h(x) is N(shift, var) under the generator.
        const Eigen::VectorXd delta = config.beta_true - model.beta;
        const double shift = delta.dot(config.mu_x) + config.noise_mean - model.alpha;
        const double var = delta.dot(config.sigma_x * delta) + config.noise_var;

        TheoryReplicate rep;
        rep.vanilla_exact = var + shift * shift;
        rep.calibrated_exact = var;

        if (options.sampling == RiskSampling::sufficient_statistics) {
            std::mt19937_64 rng(derive_seed(seed, Stream::theory));
            std::normal_distribution<double> normal(0.0, 1.0);
            std::chi_squared_distribution<double> chi2(t - 1.0);
            const double test_mean = shift + std::sqrt(var / t) * normal(rng);
            const double centered_ss = var * chi2(rng);
            const double cal_shift = shift + std::sqrt(var / c) * normal(rng);
            rep.vanilla = centered_ss / t + test_mean * test_mean;
            rep.calibrated = centered_ss / t + (test_mean - cal_shift) * (test_mean - cal_shift);
        } else {
            const DesignMatrix test =
                sample_linear(config, options.test_draw, derive_seed(seed, Stream::test));
            const DesignMatrix cal =
                sample_linear(config, options.calibration_draw, derive_seed(seed, Stream::calibration));
            const Eigen::VectorXd test_resid = test.y - predict_linear_rows(model, test.x);
            const double cal_shift = (cal.y - predict_linear_rows(model, cal.x)).mean();
            rep.vanilla = test_resid.squaredNorm() / t;
            rep.calibrated = (test_resid.array() - cal_shift).square().sum() / t;
        }
        out[i] = rep;
    });
    return out;
}

namespace {

TheoryCheck base_check(const GaussianLinearConfig& config, std::span<const TheoryReplicate> reps) {
    if (reps.size() < 2) throw InputError("theory checks need at least 2 replications");
    const double scale = 1.0 + 1.0 / static_cast<double>(config.n_train);

    std::vector<double> vanilla;
    std::vector<double> calibrated;
    std::vector<double> scaled;
    std::vector<double> vanilla_exact;
    std::vector<double> calibrated_exact;
    for (const auto& r : reps) {
        vanilla.push_back(r.vanilla);
        calibrated.push_back(r.calibrated);
        scaled.push_back(scale * r.calibrated);
        vanilla_exact.push_back(r.vanilla_exact);
        calibrated_exact.push_back(r.calibrated_exact);
    }
    const double n = static_cast<double>(reps.size());

    TheoryCheck check;
    check.n = config.n_train;
    check.d = config.d;
    check.replications = reps.size();
    check.target = scale;
    check.mean_vanilla = stats::mean(vanilla);
    check.mean_calibrated = stats::mean(calibrated);
    check.ratio_hat = check.mean_vanilla / check.mean_calibrated;
    check.ratio_exact = stats::mean(vanilla_exact) / stats::mean(calibrated_exact);

    // Delta method: var(ratio) ~ var(v_i - R c_i) / (N cbar^2).
    std::vector<double> linearized;
    for (const auto& r : reps) linearized.push_back(r.vanilla - check.ratio_hat * r.calibrated);
    check.ratio_se = std::sqrt(stats::sample_variance(linearized) / n) / check.mean_calibrated;

    check.var_vanilla = stats::sample_variance(vanilla);
    check.var_calibrated_scaled = stats::sample_variance(scaled);
    const double mv = check.mean_vanilla;
    const double ms = stats::mean(scaled);
    std::vector<double> diff;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        diff.push_back((vanilla[i] - mv) * (vanilla[i] - mv) - (scaled[i] - ms) * (scaled[i] - ms));
    }
    check.var_diff_se = std::sqrt(stats::sample_variance(diff) / n);
    return check;
}

}  // namespace

TheoryCheck scaling_check(const GaussianLinearConfig& config, std::span<const TheoryReplicate> reps) {
    TheoryCheck check = base_check(config, reps);
    check.check = "scaling";
    check.verdict = std::abs(check.ratio_hat - check.target) <= 3.0 * check.ratio_se ? Verdict::pass
                                                                                     : Verdict::fail;
    return check;
}

TheoryCheck variance_check(const GaussianLinearConfig& config, std::span<const TheoryReplicate> reps,
                           double variance_floor) {
    TheoryCheck check = base_check(config, reps);
    check.check = "variance";
    const double diff = check.var_vanilla - check.var_calibrated_scaled;
    if (std::max(check.var_vanilla, check.var_calibrated_scaled) < variance_floor) {
        check.verdict = Verdict::inconclusive;
    } else if (diff > 2.0 * check.var_diff_se) {
        check.verdict = Verdict::pass;
    } else if (diff < -2.0 * check.var_diff_se) {
        check.verdict = Verdict::fail;
    } else {
        check.verdict = Verdict::inconclusive;
    }
    return check;
}

TheoryCheck verify_theorem_scaling(const GaussianLinearConfig& config, std::size_t replications,
                                   std::uint64_t master_seed, const TheoryOptions& options) {
    const auto reps = simulate_theory(config, replications, master_seed, options);
    return scaling_check(config, reps);
}

TheoryCheck verify_variance_reduction(const GaussianLinearConfig& config, std::size_t replications,
                                      std::uint64_t master_seed, const TheoryOptions& options) {
    const auto reps = simulate_theory(config, replications, master_seed, options);
    return variance_check(config, reps, options.variance_floor);
}

}  // namespace calm
