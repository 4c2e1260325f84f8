#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tsnlse/config.hpp"

namespace tsnlse::cli
{

std::string version();

enum ExitCode : int
{
    kSuccess = 0,
    kFailure = 1,
    kConfigError = 2,
    kNumericalFailure = 3
};

struct CommandOptions
{
    std::filesystem::path out_dir = ".";
    unsigned threads = 1;
    bool emit_plot_data = false;
    bool with_oracle = false;
};

/// Runs the configured command, writing artifacts under options.out_dir and a short report to `out`.
/// Errors are reported on `err` and mapped to exit codes: 2 for configuration errors and violated
/// preconditions, 3 for numerical failures (divergence, non-stationarity, step too large).
int run_command(const RunConfig& config, const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Loads the configuration first, so configuration errors also map to exit code 2.
int run_command(Command command, const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
                const CommandOptions& options, std::ostream& out, std::ostream& err);

/// A CSV artifact: "# key = value" metadata, the "# "-prefixed resolved configuration, a header and rows.
struct CsvDocument
{
    std::map<std::string, std::string> meta;
    std::string config_text;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    RunConfig config() const;
    std::size_t column(const std::string& name) const;
};

CsvDocument read_csv(const std::filesystem::path& path);

struct HistogramFile
{
    std::size_t mode = 0;
    RadialHistogram simulation;
    std::optional<RadialHistogram> oracle;
};

HistogramFile read_histogram(const std::filesystem::path& path);
EventLog read_events(const std::filesystem::path& path);
/// Branch or scan table; one BranchSet per distinct g, in file order.
std::vector<BranchSet> read_branches(const std::filesystem::path& path);
InfraredProbe read_infrared(const std::filesystem::path& path);

}  // namespace tsnlse::cli
