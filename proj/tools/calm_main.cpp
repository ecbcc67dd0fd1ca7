// calm: score prediction files with vanilla and calibrated losses, compare
// pipelines from their run files, and run the synthetic experiments.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "calm/commands.hpp"
#include "calm/error.hpp"

namespace {

std::vector<calm::MetricKind> parse_metrics(const std::vector<std::string>& names) {
    std::vector<calm::MetricKind> out;
    for (const auto& name : names) {
        const auto m = calm::parse_metric(name);
        if (!m) throw calm::InputError("unknown metric '" + name + "'");
        out.push_back(*m);
    }
    return out;
}

calm::VanillaScope parse_scope(const std::string& name) {
    if (name == "full_test") return calm::VanillaScope::full_test;
    if (name == "remaining_test") return calm::VanillaScope::remaining_test;
    throw calm::InputError("--vanilla-scope must be full_test or remaining_test");
}

struct SplitFlags {
    std::optional<double> val_fraction;
    bool two_eighteen = false;
    std::uint64_t seed = 0;
    double epsilon = calm::kDefaultEpsilon;
    std::string scope = "full_test";
    std::vector<std::string> metrics;
    std::string out;

    void add_to(CLI::App* cmd, std::vector<std::string> default_metrics) {
        metrics = std::move(default_metrics);
        cmd->add_option("-m,--metric", metrics,
                        "log_loss, calibrated_log_loss, quadratic_loss, calibrated_quadratic_loss "
                        "(or ll, cll, ql, cql); repeatable")
            ->capture_default_str();
        auto* vf = cmd->add_option("--val-fraction", val_fraction, "share of rows used to fit the calibration shift (default 1/11)");
        cmd->add_flag("--split-2-18", two_eighteen, "use a 0.02 : 0.18 calibration : scoring split (val fraction 0.1)")
            ->excludes(vf);
        cmd->add_option("--seed", seed, "split seed")->capture_default_str();
        cmd->add_option("--epsilon", epsilon, "probability clamp")->capture_default_str();
        cmd->add_option("--vanilla-scope", scope, "rows scored by vanilla metrics: full_test or remaining_test")
            ->capture_default_str();
        cmd->add_option("-o,--out", out, "write a JSON record here");
    }

    double fraction() const {
        if (two_eighteen) return calm::kTwoEighteenValFraction;
        return val_fraction.value_or(calm::kDefaultValFraction);
    }

    calm::MetricOptions metric_options() const { return {epsilon, parse_scope(scope)}; }

    std::optional<std::filesystem::path> json_out() const {
        if (out.empty()) return std::nullopt;
        return std::filesystem::path(out);
    }
};

struct RunFlags {
    std::string config;
    std::optional<std::size_t> rounds;
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
    std::string out;

    void add_to(CLI::App* cmd, const std::string& default_config, bool theory) {
        config = default_config;
        cmd->add_option("-c,--config", config, "builtin config name or path to a JSON config")->capture_default_str();
        if (!theory) cmd->add_option("--rounds", rounds, "number of rounds");
        cmd->add_option("--runs", runs, theory ? "number of replications" : "runs per pipeline per round");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("-o,--out", out, "write the JSON report here");
    }

    calm::RunConfig load(bool theory) const {
        return calm::apply_overrides(calm::load_run_config(config), {rounds, runs, seed}, theory);
    }

    std::optional<std::filesystem::path> json_out() const {
        if (out.empty()) return std::nullopt;
        return std::filesystem::path(out);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vanilla and calibrated loss metrics for comparing training pipelines"};
    app.set_version_flag("--version", std::string(calm::kToolVersion));
    app.require_subcommand(1);

    auto* score = app.add_subcommand("score", "score one prediction file");
    std::string score_file;
    score->add_option("file", score_file, "prediction,label file")->required();
    SplitFlags score_flags;
    score_flags.add_to(score, {"log_loss"});

    auto* compare = app.add_subcommand("compare", "estimate how often side A's runs beat side B's");
    std::vector<std::string> files_a;
    std::vector<std::string> files_b;
    std::string compare_config;
    compare->add_option("-a,--a", files_a, "run files of pipeline A");
    compare->add_option("-b,--b", files_b, "run files of pipeline B");
    compare->add_option("-c,--config", compare_config, "config whose two external pipelines list the files");
    SplitFlags compare_flags;
    compare_flags.add_to(compare, {"log_loss", "calibrated_log_loss"});

    auto* synth = app.add_subcommand("synth", "run a synthetic pipeline comparison");
    RunFlags synth_flags;
    synth_flags.add_to(synth, "linreg_paper", false);
    synth->footer("builtin configs: linreg_paper, logreg_paper, theory_default");

    auto* theory = app.add_subcommand("verify-theory", "Monte Carlo check of the OLS scaling identity and variance inequality");
    RunFlags theory_flags;
    theory_flags.add_to(theory, "theory_default", true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*score) {
            calm::ScoreOptions o;
            o.file = score_file;
            o.metrics = parse_metrics(score_flags.metrics);
            o.val_fraction = score_flags.fraction();
            o.seed = score_flags.seed;
            o.metric = score_flags.metric_options();
            o.json_out = score_flags.json_out();
            calm::cmd_score(o, std::cout);
        } else if (*compare) {
            calm::CompareOptions o;
            if (!compare_config.empty()) {
                if (!files_a.empty() || !files_b.empty()) throw calm::InputError("give --config or --a/--b, not both");
                const auto config = calm::load_run_config(compare_config);
                const auto [better, other] = config.ordered_pipelines();
                o.files_a.assign(better.files.begin(), better.files.end());
                o.files_b.assign(other.files.begin(), other.files.end());
            } else {
                o.files_a.assign(files_a.begin(), files_a.end());
                o.files_b.assign(files_b.begin(), files_b.end());
            }
            o.metrics = parse_metrics(compare_flags.metrics);
            o.val_fraction = compare_flags.fraction();
            o.seed = compare_flags.seed;
            o.metric = compare_flags.metric_options();
            o.json_out = compare_flags.json_out();
            calm::cmd_compare(o, std::cout);
        } else if (*synth) {
            calm::cmd_synth(synth_flags.load(false), std::cout, synth_flags.json_out());
        } else if (*theory) {
            calm::cmd_verify_theory(theory_flags.load(true), std::cout, theory_flags.json_out());
        }
    } catch (const calm::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const calm::NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
