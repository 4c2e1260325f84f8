#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tsnlse/dynamics.hpp"
#include "tsnlse/estat.hpp"
#include "tsnlse/lattice.hpp"
#include "tsnlse/meanfield.hpp"

namespace tsnlse::cli
{

/// Every problem found while reading a configuration, one message per offending key.
class ConfigError : public std::runtime_error
{
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

enum class Command
{
    Simulate,
    MeanField,
    Scan,
    Infrared,
    Describe
};

std::string to_string(Command command);
Command command_from_string(const std::string& name);

/// Flat sectioned key = value configuration, validated against a fixed schema. Sections the command needs
/// are filled with defaults for keys left out; the resolved text records every value actually used.
class RunConfig
{
public:
    /// `overrides` are "section.key=value" strings applied after the file.
    static RunConfig parse(const std::string& text, Command command, const std::vector<std::string>& overrides = {});
    static RunConfig load(const std::filesystem::path& path, Command command,
                          const std::vector<std::string>& overrides = {});

    Command command() const { return command_; }
    bool has(const std::string& key) const;
    const std::string& text(const std::string& key) const;
    double number(const std::string& key) const;
    std::uint64_t count(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;

    /// Resolved configuration in schema order, parseable by `parse`.
    std::string resolved() const;

    ModeLattice lattice() const;
    ModelParams model() const;
    double dt() const;
    std::uint64_t seed() const;
    SamplingBudget budget(unsigned threads) const;
    std::uint64_t oracle_samples() const;
    OracleOptions oracle() const;
    std::uint64_t trace_steps() const;

    MeanFieldConfig meanfield() const;
    std::vector<double> g_grid() const;
    double infrared_x() const;
    std::vector<double> kappa() const;

private:
    Command command_ = Command::Describe;
    std::vector<std::pair<std::string, std::string>> values_;
};

}  // namespace tsnlse::cli
