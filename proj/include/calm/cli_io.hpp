#pragma once

// File formats and configuration for the command-line tool.
//
// Prediction files are comma-delimited text with one `prediction,label`
// record per line and an optional `prediction,label` header. Run configs and
// experiment reports are JSON documents; field names are stable and the
// report carries a schema_version.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calm/experiment_harness.hpp"
#include "calm/metric_engine.hpp"

namespace calm {

inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Prediction files
// ---------------------------------------------------------------------------

/// Strict parse: every non-header line must be exactly two finite numbers.
/// Classification mode also requires predictions in [0, 1] and labels in
/// {0, 1}. Errors are ParseErrors carrying the 1-based line number.
PredictionSet parse_predictions(std::istream& in, Mode mode, const std::string& source);
PredictionSet read_prediction_file(const std::filesystem::path& path, Mode mode);

/// Writes a headered file at full double precision.
void write_prediction_file(const std::filesystem::path& path, const PredictionSet& data);

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class ExperimentKind { linear, logistic };

std::string_view to_string(ExperimentKind kind) noexcept;

struct TheorySettings {
    std::size_t replications = 100000;
    TheoryOptions options;

    bool operator==(const TheorySettings& other) const {
        return replications == other.replications && options.test_draw == other.options.test_draw &&
               options.calibration_draw == other.options.calibration_draw &&
               options.variance_floor == other.options.variance_floor &&
               options.sampling == other.options.sampling;
    }
};

struct RunConfig {
    std::string description;
    ExperimentKind experiment = ExperimentKind::linear;
    SyntheticTask generator;
    std::vector<PipelineSpec> pipelines;  // exactly two
    std::string better;                   // id of the pipeline that is better in ground truth
    std::size_t rounds = 20;
    std::size_t runs = 100;
    std::uint64_t master_seed = 2023;
    std::vector<MetricKind> metrics;
    std::optional<double> val_fraction;
    TestSetPolicy test_set = TestSetPolicy::shared_across_rounds;
    VanillaScope vanilla_scope = VanillaScope::full_test;
    double epsilon = kDefaultEpsilon;
    std::size_t histogram_bins = 20;
    TheorySettings theory;

    /// Pipelines ordered (better, other).
    std::pair<const PipelineSpec&, const PipelineSpec&> ordered_pipelines() const;
    ComparisonOptions comparison_options() const;

    bool operator==(const RunConfig&) const = default;
};

/// Validates the schema; unknown keys and wrong types are InputErrors.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& config);

/// Names of the configs compiled into the tool (linreg_paper, logreg_paper, theory_default).
std::vector<std::string> builtin_config_names();
std::optional<nlohmann::json> builtin_config(std::string_view name);

/// A builtin name or a path to a JSON file.
RunConfig load_run_config(const std::string& name_or_path);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ExperimentReport {
    int schema_version = kReportSchemaVersion;
    std::string tool_version{kToolVersion};
    std::string command;
    nlohmann::json config;
    std::vector<std::vector<ComparisonResult>> rounds;
    std::optional<RoundSummary> summary;
    std::vector<TheoryCheck> theory_checks;
    std::vector<Histogram> histograms;
    double wall_clock_seconds = 0.0;

    bool operator==(const ExperimentReport& other) const;
};

nlohmann::json to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const ComparisonResult& result);
nlohmann::json to_json(const RiskEstimate& risk);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace calm
