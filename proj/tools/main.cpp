#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsnlse/commands.hpp"

int main(int argc, char** argv)
{
    using namespace tsnlse::cli;

    CLI::App app{"Stationary states of a truncated stochastic NLSE with capped, thermostatted modes"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool emit_plot_data = false;
    bool with_oracle = false;
    std::vector<std::string> overrides;

    app.add_option("--config", config_path, "configuration file (sectioned key = value)")->required();
    app.add_option("--out", out_dir, "directory for CSV artifacts and summary.txt")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "master seed; overrides simulation.seed");
    app.add_option("--threads", threads, "worker threads for independent trajectories or couplings")
        ->check(CLI::Range(1u, 1024u))
        ->capture_default_str();
    app.add_flag("--emit-plot-data", emit_plot_data, "also write plot_data.csv and trajectory.csv");
    app.add_flag("--with-oracle", with_oracle, "compare reflecting runs with the Metropolis Gibbs sampler");
    app.add_option("--set", overrides, "override a configuration value, e.g. --set meanfield.g=0.7");

    const std::vector<std::pair<Command, const char*>> commands = {
        {Command::Simulate, "run the Langevin system and estimate stationary histograms"},
        {Command::MeanField, "solve the mean-field self-consistency equation"},
        {Command::Scan, "scan the coupling and locate the mean-field transition"},
        {Command::Infrared, "probe the infrared behaviour of the wave-breaking mode integral"},
        {Command::Describe, "print the retained modes with wavenumbers and caps"},
    };
    for (const auto& [command, help] : commands)
    {
        auto* sub = app.add_subcommand(to_string(command), help);
        sub->fallthrough();
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    const Command command = command_from_string(app.get_subcommands().front()->get_name());
    if (*seed_opt && command == Command::Simulate) overrides.push_back("simulation.seed=" + std::to_string(seed));
    CommandOptions options;
    options.out_dir = out_dir;
    options.threads = threads;
    options.emit_plot_data = emit_plot_data;
    options.with_oracle = with_oracle;
    return run_command(command, config_path, overrides, options, std::cout, std::cerr);
}
