#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "calm/cli_io.hpp"
#include "calm/commands.hpp"
#include "calm/error.hpp"

using namespace calm;
using nlohmann::json;

namespace {

PredictionSet parse(const std::string& text, Mode mode = Mode::classification) {
    std::istringstream in(text);
    return parse_predictions(in, mode, "mem");
}

std::size_t parse_error_line(const std::string& text, Mode mode = Mode::classification) {
    try {
        parse(text, mode);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "calm_test_cli_io";
    std::filesystem::create_directories(dir);
    return dir;
}

RunConfig tiny_linear_config() {
    auto doc = *builtin_config("linreg_paper");
    doc["rounds"] = 2;
    doc["runs"] = 4;
    doc["generator"]["d"] = 4;
    doc["generator"]["n_train"] = 50;
    doc["generator"]["n_val_test"] = 50;
    doc["generator"]["n_remaining_test"] = 200;
    doc["pipelines"][1]["drop_features"] = {3};
    return run_config_from_json(doc);
}

}  // namespace

TEST_CASE("parse_predictions accepts header, CRLF and plain records") {
    const auto set = parse("prediction,label\r\n0.5,1\r\n0.25,0\r\n");
    REQUIRE(set.size() == 2);
    CHECK(set.items()[0] == LabeledPrediction{0.5, 1.0});
    CHECK(set.items()[1] == LabeledPrediction{0.25, 0.0});
    CHECK(parse("0.5,1\n1e-3,0").size() == 2);
    CHECK(parse(" 0.5 , 1 \n").size() == 1);
    CHECK(parse("0,0\n1,1\n").size() == 2);
}

TEST_CASE("parse_predictions rejects malformed lines with their line number") {
    CHECK(parse_error_line("0.5,1\n0.5\n") == 2);
    CHECK(parse_error_line("0.5,1,3\n") == 1);
    CHECK(parse_error_line("prediction,label\n0.5,1\nabc,0\n") == 3);
    CHECK(parse_error_line("0.5,1\n0.5,x\n") == 2);
    CHECK(parse_error_line("1.5,1\n") == 1);
    CHECK(parse_error_line("-0.1,1\n") == 1);
    CHECK(parse_error_line("0.5,2\n") == 1);
    CHECK(parse_error_line("0.5,0.5\n") == 1);
    CHECK(parse_error_line("0.5,1\n\n0.5,0\n") == 2);
    CHECK(parse_error_line("nan,1\n") == 1);
    CHECK(parse_error_line("inf,1\n", Mode::regression) == 1);
    CHECK(parse_error_line("0.5;1\n") == 1);
    CHECK(parse_error_line("0x1p-1,1\n") == 1);
    CHECK(parse_error_line("0.5,1\nprediction,label\n") == 2);
    CHECK_THROWS_WITH_AS(parse("0.5\n"), "mem:1: expected two comma-separated fields", ParseError);
}

TEST_CASE("parse_predictions regression mode") {
    const auto set = parse("2.5,-3\n-1e2,7.25\n", Mode::regression);
    CHECK(set.mode() == Mode::regression);
    CHECK(set.items()[1] == LabeledPrediction{-100.0, 7.25});
    CHECK(parse_error_line("2.5,-3\n", Mode::classification) == 1);
}

TEST_CASE("empty prediction files are rejected") {
    CHECK_THROWS_AS(parse(""), InputError);
    CHECK_THROWS_AS(parse("prediction,label\n"), InputError);
}

TEST_CASE("prediction files round trip") {
    const auto path = temp_dir() / "roundtrip.csv";
    const PredictionSet set({{0.1234567890123456789, 1}, {1.0 / 3.0, 0}, {1e-300, 0}}, Mode::classification);
    write_prediction_file(path, set);
    CHECK(read_prediction_file(path, Mode::classification) == set);
    CHECK_THROWS_AS(read_prediction_file(temp_dir() / "missing.csv", Mode::classification), InputError);
}

TEST_CASE("builtin configs parse and re-serialize losslessly") {
    for (const auto& name : builtin_config_names()) {
        CAPTURE(name);
        const auto config = load_run_config(name);
        const auto echoed = run_config_from_json(to_json(config));
        CHECK(echoed == config);
        CHECK(to_json(echoed) == to_json(config));
    }
    CHECK_FALSE(builtin_config("nope").has_value());
}

TEST_CASE("bundled config files equal the builtins") {
    for (const auto& name : builtin_config_names()) {
        CAPTURE(name);
        const auto file = std::filesystem::path(CALM_CONFIG_DIR) / (name + ".json");
        REQUIRE(std::filesystem::exists(file));
        CHECK(load_run_config(file.string()) == load_run_config(name));
    }
}

TEST_CASE("linreg_paper contents") {
    const auto c = load_run_config("linreg_paper");
    const auto& g = std::get<GaussianLinearConfig>(c.generator);
    CHECK(g == paper_linear_config(4.0));
    CHECK(c.rounds == 20);
    CHECK(c.runs == 100);
    CHECK(c.master_seed == 2023);
    CHECK(c.metrics == std::vector<MetricKind>{MetricKind::quadratic_loss, MetricKind::calibrated_quadratic_loss});
    const auto [better, other] = c.ordered_pipelines();
    CHECK(better.id == "A");
    CHECK_FALSE(better.feature_indices.has_value());
    REQUIRE(other.feature_indices.has_value());
    CHECK(other.feature_indices->size() == 19);
    CHECK(other.feature_indices->back() == 18);
    CHECK(c.test_set == TestSetPolicy::shared_across_rounds);
}

TEST_CASE("logreg_paper contents") {
    const auto c = load_run_config("logreg_paper");
    CHECK(std::get<LogisticConfig>(c.generator) == paper_logistic_config());
    CHECK(c.runs == 1000);
    CHECK(c.experiment == ExperimentKind::logistic);
}

TEST_CASE("config schema is strict") {
    auto base = *builtin_config("linreg_paper");
    CHECK_NOTHROW(run_config_from_json(base));

    auto unknown = base;
    unknown["roundz"] = 3;
    CHECK_THROWS_WITH_AS(run_config_from_json(unknown), "unknown key config.roundz", InputError);

    auto unknown_nested = base;
    unknown_nested["generator"]["noise_sd"] = 2;
    CHECK_THROWS_AS(run_config_from_json(unknown_nested), InputError);

    auto wrong_type = base;
    wrong_type["rounds"] = "twenty";
    CHECK_THROWS_AS(run_config_from_json(wrong_type), InputError);

    auto negative = base;
    negative["runs"] = -1;
    CHECK_THROWS_AS(run_config_from_json(negative), InputError);

    auto bad_metric = base;
    bad_metric["metrics"] = {"log_loss"};
    CHECK_THROWS_AS(run_config_from_json(bad_metric), InputError);

    auto bad_better = base;
    bad_better["better"] = "C";
    CHECK_THROWS_AS(run_config_from_json(bad_better), InputError);

    auto bad_index = base;
    bad_index["pipelines"][1]["features"] = {0, 25};
    bad_index["pipelines"][1].erase("drop_features");
    CHECK_THROWS_AS(run_config_from_json(bad_index), InputError);

    auto both = base;
    both["pipelines"][1]["features"] = {0};
    CHECK_THROWS_AS(run_config_from_json(both), InputError);

    auto wrong_model = base;
    wrong_model["pipelines"][0]["model"] = "logistic";
    CHECK_THROWS_AS(run_config_from_json(wrong_model), InputError);

    auto noise_in_logistic = *builtin_config("logreg_paper");
    noise_in_logistic["generator"]["noise_var"] = 2.0;
    CHECK_THROWS_AS(run_config_from_json(noise_in_logistic), InputError);

    auto missing = base;
    missing["generator"].erase("n_train");
    CHECK_THROWS_AS(run_config_from_json(missing), InputError);

    auto short_beta = base;
    short_beta["generator"]["beta_true"] = {1.0, 2.0};
    CHECK_THROWS_AS(run_config_from_json(short_beta), InputError);

    auto not_pd = base;
    not_pd["generator"].erase("x_sd");
    not_pd["generator"]["d"] = 2;
    not_pd["generator"]["x_cov"] = {{1.0, 2.0}, {2.0, 1.0}};
    not_pd["pipelines"][1]["drop_features"] = {1};
    CHECK_THROWS_AS(run_config_from_json(not_pd), NumericalError);

    auto vf = base;
    vf["val_fraction"] = 1.5;
    CHECK_THROWS_AS(run_config_from_json(vf), InputError);

    auto policy = base;
    policy["test_set"] = "sometimes";
    CHECK_THROWS_AS(run_config_from_json(policy), InputError);
}

TEST_CASE("config with explicit covariance and vectors round trips") {
    auto doc = *builtin_config("linreg_paper");
    doc["generator"]["d"] = 2;
    doc["generator"]["beta_true"] = {1.0, -0.5};
    doc["generator"]["mu_x"] = {0.0, 0.1};
    doc["generator"].erase("x_sd");
    doc["generator"]["x_cov"] = {{1.0, 0.3}, {0.3, 0.5}};
    doc["pipelines"][1]["drop_features"] = {1};
    doc["val_fraction"] = 0.2;
    doc["vanilla_scope"] = "remaining_test";
    const auto c = run_config_from_json(doc);
    CHECK(run_config_from_json(to_json(c)) == c);
    CHECK(c.val_fraction == 0.2);
    CHECK(c.vanilla_scope == VanillaScope::remaining_test);
    const auto options = c.comparison_options();
    CHECK(options.val_fraction == 0.2);
    CHECK(options.metric.vanilla_scope == VanillaScope::remaining_test);
}

TEST_CASE("external pipelines carry files") {
    auto doc = *builtin_config("logreg_paper");
    doc["pipelines"] = {{{"id", "A"}, {"model", "external"}, {"files", {"a1.csv", "a2.csv"}}},
                        {{"id", "B"}, {"model", "external"}, {"files", {"b1.csv", "b2.csv"}}}};
    const auto c = run_config_from_json(doc);
    CHECK(c.pipelines[0].files == std::vector<std::string>{"a1.csv", "a2.csv"});
    CHECK(run_config_from_json(to_json(c)) == c);

    doc["pipelines"][0].erase("files");
    CHECK_THROWS_AS(run_config_from_json(doc), InputError);
}

TEST_CASE("load_run_config errors") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), InputError);
    const auto path = temp_dir() / "broken.json";
    std::ofstream(path) << "{ \"experiment\": ";
    CHECK_THROWS_AS(load_run_config(path.string()), InputError);
}

TEST_CASE("synth report round trips through JSON") {
    const auto config = tiny_linear_config();
    std::ostringstream out;
    const auto report = cmd_synth(config, out);
    CHECK(report.schema_version == kReportSchemaVersion);
    CHECK(report.rounds.size() == 2);
    REQUIRE(report.summary.has_value());
    CHECK(report.histograms.size() == 4);

    const auto path = temp_dir() / "report.json";
    write_json_file(path, to_json(report));
    const auto back = report_from_json(read_json_file(path));
    CHECK(back == report);
}

TEST_CASE("theory report round trips through JSON") {
    auto config = load_run_config("theory_default");
    config.theory.replications = 200;
    std::ostringstream out;
    const auto report = cmd_verify_theory(config, out);
    REQUIRE(report.theory_checks.size() == 2);
    CHECK(report.theory_checks[0].check == "scaling");
    CHECK(report.theory_checks[1].check == "variance");
    CHECK(report_from_json(json::parse(to_json(report).dump())) == report);
    CHECK(out.str().find("target 1.010000") != std::string::npos);
}

TEST_CASE("the echoed config reproduces a synth run exactly") {
    const auto config = tiny_linear_config();
    std::ostringstream out;
    const auto first = cmd_synth(config, out);
    const auto second = cmd_synth(run_config_from_json(first.config), out);
    CHECK(second.rounds == first.rounds);
    CHECK(second.summary == first.summary);
    CHECK(second.histograms == first.histograms);
}

TEST_CASE("report_from_json rejects malformed documents") {
    CHECK_THROWS_AS(report_from_json(json::array()), InputError);
    ExperimentReport report;
    auto doc = to_json(report);
    CHECK(report_from_json(doc) == report);
    doc["schema_version"] = 99;
    CHECK_THROWS_AS(report_from_json(doc), InputError);
    auto missing = to_json(report);
    missing.erase("rounds");
    CHECK_THROWS_AS(report_from_json(missing), InputError);
}

TEST_CASE("overrides") {
    const auto base = load_run_config("linreg_paper");
    const auto c = apply_overrides(base, {3, 7, 99}, false);
    CHECK(c.rounds == 3);
    CHECK(c.runs == 7);
    CHECK(c.master_seed == 99);
    const auto t = apply_overrides(load_run_config("theory_default"), {std::nullopt, 500, std::nullopt}, true);
    CHECK(t.theory.replications == 500);
    CHECK_THROWS_AS(apply_overrides(base, {0, std::nullopt, std::nullopt}, false), InputError);
}

TEST_CASE("cmd_score and cmd_compare") {
    const auto dir = temp_dir();
    write_prediction_file(dir / "two.csv", PredictionSet({{0.5, 1}, {0.5, 0}}, Mode::classification));
    ScoreOptions score;
    score.file = dir / "two.csv";
    score.metrics = {MetricKind::log_loss};
    std::ostringstream out;
    const auto risks = cmd_score(score, out);
    CHECK(risks[0].value == doctest::Approx(0.693147180559945));
    CHECK(out.str().find("0.693147") != std::string::npos);

    write_prediction_file(dir / "good.csv", PredictionSet({{0.9, 1}, {0.1, 0}, {0.8, 1}, {0.3, 0}}, Mode::classification));
    write_prediction_file(dir / "bad.csv", PredictionSet({{0.6, 1}, {0.4, 0}, {0.5, 1}, {0.6, 0}}, Mode::classification));
    CompareOptions compare;
    compare.files_a = {dir / "good.csv"};
    compare.files_b = {dir / "bad.csv"};
    compare.metrics = {MetricKind::log_loss};
    const auto results = cmd_compare(compare, out);
    CHECK(results[0].result.acc_hat == 1.0);
    CHECK(results[0].acc_reverse == 0.0);

    compare.files_b.push_back(dir / "bad.csv");
    CHECK_THROWS_AS(cmd_compare(compare, out), InputError);

    // One-class val split: the error explains how to recover.
    write_prediction_file(dir / "oneclass.csv", PredictionSet({{0.5, 1}, {0.5, 1}, {0.5, 1}}, Mode::classification));
    score.file = dir / "oneclass.csv";
    score.metrics = {MetricKind::calibrated_log_loss};
    score.val_fraction = 0.5;
    CHECK_THROWS_WITH_AS(cmd_score(score, out), doctest::Contains("raise --val-fraction"), NumericalError);
}

TEST_CASE("split fractions") {
    CHECK(kTwoEighteenValFraction == doctest::Approx(0.1));
    CHECK(kDefaultValFraction == doctest::Approx(1000.0 / 11000.0));
}
