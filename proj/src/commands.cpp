#include "calm/commands.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "calm/error.hpp"
#include "calm/parallel.hpp"
#include "calm/stats.hpp"

namespace calm {

using nlohmann::json;

namespace {

Mode mode_for(std::span<const MetricKind> metrics) {
    const bool classification = std::any_of(metrics.begin(), metrics.end(), requires_classification);
    return classification ? Mode::classification : Mode::regression;
}

// Scores one file; the error names the file and, for a one-class val split,
// says how to get a usable one.
std::vector<RiskEstimate> score_file(const std::filesystem::path& file, std::span<const MetricKind> metrics,
                                     const SplitSpec& split, const MetricOptions& options) {
    const auto data = read_prediction_file(file, mode_for(metrics));
    try {
        return score_metrics(metrics, data, split, options);
    } catch (const CalibrationUnbounded&) {
        throw NumericalError(file.string() +
                             ": calibration unbounded: the val-test split holds a single class; "
                             "raise --val-fraction or pick another --seed");
    } catch (const NumericalError& e) {
        throw NumericalError(file.string() + ": " + e.what());
    } catch (const ParseError&) {
        throw;
    } catch (const InputError& e) {
        throw InputError(file.string() + ": " + e.what());
    }
}

std::string percent(double x) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * x << '%';
    return s.str();
}

std::string sig6(double x) {
    std::ostringstream s;
    s << std::setprecision(6) << x;
    return s.str();
}

std::string paths_string(const std::vector<std::filesystem::path>& paths) {
    return std::to_string(paths.size()) + (paths.size() == 1 ? " file" : " files");
}

void check_val_fraction(double v) {
    if (!(v > 0.0 && v < 1.0)) throw InputError("val_fraction must lie in (0, 1)");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<RiskEstimate> cmd_score(const ScoreOptions& options, std::ostream& out) {
    if (options.metrics.empty()) throw InputError("no metric requested");
    check_val_fraction(options.val_fraction);
    const SplitSpec split{options.val_fraction, options.seed};
    const auto risks = score_file(options.file, options.metrics, split, options.metric);

    for (const auto& r : risks) {
        out << std::left << std::setw(27) << to_string(r.metric) << ' ' << sig6(r.value) << "  (n_eval "
            << r.n_eval << ", n_cal " << r.n_cal << ")\n";
    }
    if (options.json_out) {
        json records = json::array();
        for (const auto& r : risks) records.push_back(to_json(r));
        write_json_file(*options.json_out, {{"command", "score"},
                                            {"tool_version", kToolVersion},
                                            {"file", options.file.string()},
                                            {"val_fraction", options.val_fraction},
                                            {"seed", options.seed},
                                            {"epsilon", options.metric.epsilon},
                                            {"risks", std::move(records)}});
    }
    return risks;
}

std::vector<CompareResult> cmd_compare(const CompareOptions& options, std::ostream& out) {
    if (options.metrics.empty()) throw InputError("no metric requested");
    if (options.files_a.empty() || options.files_b.empty()) {
        throw InputError("compare needs at least one file per side");
    }
    if (options.files_a.size() != options.files_b.size()) {
        throw InputError("run counts differ: side A has " + paths_string(options.files_a) + ", side B has " +
                         paths_string(options.files_b));
    }

    check_val_fraction(options.val_fraction);
    const SplitSpec split{options.val_fraction, options.seed};
    const std::size_t m = options.files_a.size();
    std::vector<std::vector<RiskEstimate>> scored(2 * m);
    parallel_for(2 * m, [&](std::size_t i) {
        const auto& file = i < m ? options.files_a[i] : options.files_b[i - m];
        scored[i] = score_file(file, options.metrics, split, options.metric);
    });

    std::vector<CompareResult> results;
    json records = json::array();
    out << "m = " << m << " runs per side\n";
    for (std::size_t k = 0; k < options.metrics.size(); ++k) {
        std::vector<double> a(m);
        std::vector<double> b(m);
        for (std::size_t i = 0; i < m; ++i) {
            a[i] = scored[i][k].value;
            b[i] = scored[m + i][k].value;
        }
        CompareResult r;
        r.acc_reverse = estimate_accuracy(b, a);
        r.ties = tie_fraction(a, b);
        r.result = make_comparison(options.metrics[k], std::move(a), std::move(b));
        const auto& ra = r.result.risks_a;
        const auto& rb = r.result.risks_b;

        out << to_string(options.metrics[k]) << '\n'
            << "  acc(A < B) " << sig6(r.result.acc_hat) << "   acc(B < A) " << sig6(r.acc_reverse)
            << "   ties " << sig6(r.ties) << '\n'
            << "  A  mean " << sig6(stats::mean(ra)) << "  std " << sig6(stats::sample_std(ra)) << '\n'
            << "  B  mean " << sig6(stats::mean(rb)) << "  std " << sig6(stats::sample_std(rb)) << '\n';

        json rec = to_json(r.result);
        rec["acc_reverse"] = r.acc_reverse;
        rec["tie_fraction"] = r.ties;
        rec["mean_a"] = stats::mean(ra);
        rec["std_a"] = stats::sample_std(ra);
        rec["mean_b"] = stats::mean(rb);
        rec["std_b"] = stats::sample_std(rb);
        records.push_back(std::move(rec));
        results.push_back(std::move(r));
    }

    if (options.json_out) {
        json files_a = json::array();
        json files_b = json::array();
        for (const auto& f : options.files_a) files_a.push_back(f.string());
        for (const auto& f : options.files_b) files_b.push_back(f.string());
        write_json_file(*options.json_out, {{"command", "compare"},
                                            {"tool_version", kToolVersion},
                                            {"files_a", std::move(files_a)},
                                            {"files_b", std::move(files_b)},
                                            {"val_fraction", options.val_fraction},
                                            {"seed", options.seed},
                                            {"epsilon", options.metric.epsilon},
                                            {"comparisons", std::move(records)}});
    }
    return results;
}

RunConfig apply_overrides(RunConfig config, const RunOverrides& overrides, bool theory) {
    if (overrides.rounds) {
        if (*overrides.rounds < 1) throw InputError("--rounds must be at least 1");
        config.rounds = *overrides.rounds;
    }
    if (overrides.runs) {
        if (theory) {
            if (*overrides.runs < 2) throw InputError("--runs must be at least 2");
            config.theory.replications = *overrides.runs;
        } else {
            if (*overrides.runs < 1) throw InputError("--runs must be at least 1");
            config.runs = *overrides.runs;
        }
    }
    if (overrides.seed) config.master_seed = *overrides.seed;
    return config;
}

ExperimentReport cmd_synth(const RunConfig& config, std::ostream& out,
                           const std::optional<std::filesystem::path>& json_out) {
    const auto start = std::chrono::steady_clock::now();
    const auto [better, other] = config.ordered_pipelines();

    ExperimentReport report;
    report.command = "synth";
    report.config = to_json(config);
    report.rounds = run_rounds(config.generator, better, other, config.rounds, config.runs, config.metrics,
                               config.master_seed, config.comparison_options());
    report.summary = summarize_rounds(report.rounds, better.id, other.id);

    for (std::size_t k = 0; k < config.metrics.size(); ++k) {
        std::vector<double> pooled_a;
        std::vector<double> pooled_b;
        for (const auto& round : report.rounds) {
            pooled_a.insert(pooled_a.end(), round[k].risks_a.begin(), round[k].risks_a.end());
            pooled_b.insert(pooled_b.end(), round[k].risks_b.begin(), round[k].risks_b.end());
        }
        report.histograms.push_back(make_histogram(better.id, config.metrics[k], pooled_a, config.histogram_bins));
        report.histograms.push_back(make_histogram(other.id, config.metrics[k], pooled_b, config.histogram_bins));
    }
    report.wall_clock_seconds = seconds_since(start);

    out << "accuracy of " << better.id << " over " << other.id << ", " << config.rounds << " rounds x "
        << config.runs << " runs\n";
    for (const auto& a : report.summary->accuracy) {
        out << "  " << std::left << std::setw(27) << to_string(a.metric) << ' ' << percent(a.mean);
        if (a.standard_error) out << " \xC2\xB1 " << percent(*a.standard_error);
        out << '\n';
    }
    out << "risk (average over rounds of per-round mean and std)\n";
    for (const auto& r : report.summary->risks) {
        out << "  " << std::left << std::setw(4) << r.pipeline << ' ' << std::setw(27) << to_string(r.metric)
            << " mean " << sig6(r.mean) << "  std " << sig6(r.std) << '\n';
    }
    if (json_out) write_json_file(*json_out, to_json(report));
    return report;
}

ExperimentReport cmd_verify_theory(const RunConfig& config, std::ostream& out,
                                   const std::optional<std::filesystem::path>& json_out) {
    const auto* linear = std::get_if<GaussianLinearConfig>(&config.generator);
    if (!linear) throw InputError("verify-theory needs a linear experiment");
    const auto start = std::chrono::steady_clock::now();

    ExperimentReport report;
    report.command = "verify-theory";
    report.config = to_json(config);
    const auto reps = simulate_theory(*linear, config.theory.replications, config.master_seed,
                                      config.theory.options);
    report.theory_checks.push_back(scaling_check(*linear, reps));
    report.theory_checks.push_back(variance_check(*linear, reps, config.theory.options.variance_floor));
    report.wall_clock_seconds = seconds_since(start);

    const auto& s = report.theory_checks[0];
    const auto& v = report.theory_checks[1];
    out << "n = " << s.n << ", d = " << s.d << ", " << s.replications << " replications\n";
    out << std::fixed << std::setprecision(6);
    out << "scaling   ratio_hat " << s.ratio_hat << " (se " << s.ratio_se << ")  target " << s.target
        << "  exact-risk ratio " << s.ratio_exact << "  " << to_string(s.verdict) << '\n';
    out << std::scientific << std::setprecision(4);
    out << "variance  var_vanilla " << v.var_vanilla << "  var_calibrated_scaled " << v.var_calibrated_scaled
        << "  se(diff) " << v.var_diff_se << "  " << to_string(v.verdict) << '\n';
    out << std::defaultfloat << std::setprecision(6);

    if (json_out) write_json_file(*json_out, to_json(report));
    return report;
}

}  // namespace calm
