#pragma once

// The four subcommands of the `calm` tool. Each writes human-readable output
// to `out` and optionally a JSON document to `json_out`; errors propagate as
// InputError (exit 1) or NumericalError (exit 2).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "calm/cli_io.hpp"

namespace calm {

/// Default val-test share for externally scored files: 1000 of 11000 rows.
inline constexpr double kDefaultValFraction = 1.0 / 11.0;
/// Val-test share when the calibration slice is 2% and the scored slice 18% of the data.
inline constexpr double kTwoEighteenValFraction = 0.02 / (0.02 + 0.18);

struct ScoreOptions {
    std::filesystem::path file;
    std::vector<MetricKind> metrics;
    double val_fraction = kDefaultValFraction;
    std::uint64_t seed = 0;
    MetricOptions metric;
    std::optional<std::filesystem::path> json_out;
};

std::vector<RiskEstimate> cmd_score(const ScoreOptions& options, std::ostream& out);

struct CompareOptions {
    std::vector<std::filesystem::path> files_a;
    std::vector<std::filesystem::path> files_b;
    std::vector<MetricKind> metrics;
    double val_fraction = kDefaultValFraction;
    std::uint64_t seed = 0;
    MetricOptions metric;
    std::optional<std::filesystem::path> json_out;
};

struct CompareResult {
    ComparisonResult result;  // A against B
    double acc_reverse = 0.0;  // B against A
    double ties = 0.0;
};

std::vector<CompareResult> cmd_compare(const CompareOptions& options, std::ostream& out);

struct RunOverrides {
    std::optional<std::size_t> rounds;
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
};

/// Applies command-line overrides; for verify-theory `runs` sets the replication count.
RunConfig apply_overrides(RunConfig config, const RunOverrides& overrides, bool theory);

ExperimentReport cmd_synth(const RunConfig& config, std::ostream& out,
                           const std::optional<std::filesystem::path>& json_out = std::nullopt);

ExperimentReport cmd_verify_theory(const RunConfig& config, std::ostream& out,
                                   const std::optional<std::filesystem::path>& json_out = std::nullopt);

}  // namespace calm
