#include "tsnlse/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#ifndef TSNLSE_VERSION
#define TSNLSE_VERSION "0.0.0"
#endif

namespace tsnlse::cli
{
namespace
{

namespace fs = std::filesystem;

std::string num(double v)
{
    return fmt::format("{:.17g}", v);
}

std::string mode_label(const ModeLattice& lattice, std::size_t i)
{
    std::string s;
    for (int d = 0; d < lattice.dimension; ++d) s += (d ? " " : "") + std::to_string(lattice.modes[i][d]);
    return s;
}

class CsvWriter
{
public:
    CsvWriter(const fs::path& path, const RunConfig& config, const std::vector<std::pair<std::string, std::string>>& meta)
        : out_(path)
    {
        if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
        out_ << "# generated-by = tsnlse " << version() << "\n";
        out_ << "# command = " << to_string(config.command()) << "\n";
        for (const auto& [k, v] : meta) out_ << "# " << k << " = " << v << "\n";
        std::istringstream lines(config.resolved());
        for (std::string line; std::getline(lines, line);) out_ << "# " << line << "\n";
    }

    void row(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

std::ofstream open_text(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

void write_histogram(const fs::path& path, const RunConfig& config, const ModeLattice& lattice, std::size_t mode,
                     const RadialHistogram& sim, const RadialHistogram* oracle)
{
    CsvWriter csv(path, config,
                  {{"mode", std::to_string(mode)}, {"n", mode_label(lattice, mode)}, {"cap", num(lattice.caps[mode])}});
    if (oracle)
        csv.row({"bin_left", "bin_right", "mass", "oracle_mass"});
    else
        csv.row({"bin_left", "bin_right", "mass"});
    for (std::size_t b = 0; b < sim.bins(); ++b)
    {
        std::vector<std::string> cells{num(sim.left(b)), num(sim.right(b)), num(sim.mass[b])};
        if (oracle) cells.push_back(num(oracle->mass[b]));
        csv.row(cells);
    }
}

void simulate(const RunConfig& config, const CommandOptions& options, std::ostream& out)
{
    const ModeLattice lattice = config.lattice();
    const ModelParams params = config.model();
    const LangevinModel model(lattice, params);
    const SamplingBudget budget = config.budget(options.threads);
    const StationaryEstimate est = estimate_stationary(model, config.dt(), config.seed(), budget);

    std::optional<StationaryEstimate> oracle;
    const bool oracle_possible = params.policy == BoundaryPolicy::Reflect;
    if (options.with_oracle && oracle_possible)
        oracle = gibbs_oracle(model, config.seed(), config.oracle_samples(), config.oracle());

    fs::create_directories(options.out_dir);
    for (std::size_t i = 0; i < lattice.size(); ++i)
        write_histogram(options.out_dir / fmt::format("histogram_mode_{}.csv", i), config, lattice, i,
                        est.modes[i].histogram, oracle ? &oracle->modes[i].histogram : nullptr);

    {
        CsvWriter csv(options.out_dir / "events.csv", config, {});
        csv.row({"mode_id", "reflections", "breaks", "absorbed_mass"});
        for (std::size_t i = 0; i < lattice.size(); ++i)
            csv.row({std::to_string(i), std::to_string(est.events.reflections[i]), std::to_string(est.events.breaks[i]),
                     num(est.events.absorbed_mass[i])});
    }

    if (options.emit_plot_data)
    {
        CsvWriter plot(options.out_dir / "plot_data.csv", config, {});
        plot.row({"mode_id", "bin_center", "simulation", "oracle"});
        for (std::size_t i = 0; i < lattice.size(); ++i)
        {
            const auto& h = est.modes[i].histogram;
            for (std::size_t b = 0; b < h.bins(); ++b)
                plot.row({std::to_string(i), num(0.5 * (h.left(b) + h.right(b))), num(h.mass[b]),
                          oracle ? num(oracle->modes[i].histogram.mass[b]) : ""});
        }

        CsvWriter trace(options.out_dir / "trajectory.csv", config, {});
        trace.row({"time", "mode_id", "re", "im", "abs"});
        const Observer obs{budget.stride, [&](const FieldState& s) {
                               for (std::size_t i = 0; i < s.amplitudes.size(); ++i)
                               {
                                   const cplx a = s.amplitudes[i];
                                   trace.row({num(s.time), std::to_string(i), num(a.real()), num(a.imag()),
                                              num(std::abs(a))});
                               }
                           }};
        TrajectoryOptions topts;
        topts.scheme = budget.scheme;
        run_trajectory(initial_state(lattice, budget.initial), model, config.dt(),
                       std::min(config.trace_steps(), budget.n_steps), config.seed(), std::span(&obs, 1), topts, 0);
    }

    auto summary = open_text(options.out_dir / "summary.txt");
    auto report = [&](std::ostream& s) {
        s << "tsnlse " << version() << " simulate\n";
        s << "policy " << to_string(params.policy) << ", " << lattice.size() << " modes, dt " << num(est.dt) << "\n";
        s << "samples per mode " << est.samples << " in " << est.batches << " batches, burn-in time "
          << num(est.burn_in_time) << ", simulated time " << num(est.simulated_time) << "\n";
        for (std::size_t i = 0; i < lattice.size(); ++i)
        {
            const auto& m = est.modes[i];
            s << fmt::format("mode {} (n = {}): cap {:.6g}  <|a|^2> = {:.6g} +- {:.2g}  <|a|^4> = {:.6g} +- {:.2g}", i,
                             mode_label(lattice, i), lattice.caps[i], m.mean_r2, m.stderr_r2, m.mean_r4, m.stderr_r4);
            if (oracle)
                s << fmt::format("  oracle <|a|^2> = {:.6g}  TV = {:.4f}", oracle->modes[i].mean_r2,
                                 tv_distance(est, *oracle, i));
            s << fmt::format("  reflections {}  breaks {}  absorbed {:.6g}\n", est.events.reflections[i],
                             est.events.breaks[i], est.events.absorbed_mass[i]);
        }
        if (options.with_oracle && !oracle_possible)
            s << "oracle skipped: the Gibbs oracle applies to the reflecting policy only\n";
    };
    report(summary);
    summary << "\n" << config.resolved();
    report(out);
    out << "wrote " << lattice.size() << " histograms, events.csv and summary.txt to " << options.out_dir.string()
        << "\n";
}

void write_branch_rows(CsvWriter& csv, const BranchSet& set)
{
    for (const Branch& b : set.branches)
        csv.row({num(set.g), num(b.x), num(b.observable), std::to_string(b.stability),
                 std::isnan(b.free_energy) ? "" : num(b.free_energy), b.selected ? "1" : "0"});
}

const std::vector<std::string> kBranchColumns = {"g", "x", "observable", "stability", "free_energy", "selected"};

void print_branches(std::ostream& s, const BranchSet& set)
{
    s << fmt::format("g = {:.6g}: {} branch{}\n", set.g, set.branches.size(), set.branches.size() == 1 ? "" : "es");
    for (const Branch& b : set.branches)
    {
        s << fmt::format("  x = {:<14.8g} beta<|phi|^2> = {:<12.6g} {}", b.x, b.observable,
                         b.stability > 0 ? "stable  " : "unstable");
        if (!std::isnan(b.free_energy)) s << fmt::format("  free energy {:.8g}", b.free_energy);
        if (b.selected) s << "  <- selected";
        s << "\n";
    }
    if (set.policy == BoundaryPolicy::WaveBreak && set.branches.size() > 1)
        s << fmt::format("  low-field branch {:.6g}, high-field branch {:.6g}; none selected\n",
                         set.low_field().observable, set.high_field().observable);
}

void meanfield(const RunConfig& config, const CommandOptions& options, std::ostream& out)
{
    const BranchSet set = solve_selfconsistency(config.meanfield());
    fs::create_directories(options.out_dir);
    CsvWriter csv(options.out_dir / "branches.csv", config, {});
    csv.row(kBranchColumns);
    write_branch_rows(csv, set);
    auto summary = open_text(options.out_dir / "summary.txt");
    print_branches(summary, set);
    summary << "\n" << config.resolved();
    print_branches(out, set);
}

void scan(const RunConfig& config, const CommandOptions& options, std::ostream& out)
{
    const MeanFieldConfig mf = config.meanfield();
    const TransitionScan result = transition_scan(mf, config.g_grid(), options.threads);
    fs::create_directories(options.out_dir);
    std::vector<std::pair<std::string, std::string>> meta{{"transition", result.found ? "found" : "none"}};
    if (result.found)
    {
        meta.emplace_back("g_star", num(result.g_star));
        meta.emplace_back("g_lower", num(result.g_lower));
        meta.emplace_back("g_upper", num(result.g_upper));
    }
    CsvWriter csv(options.out_dir / "scan.csv", config, meta);
    csv.row(kBranchColumns);
    for (const auto& row : result.rows) write_branch_rows(csv, row);

    auto report = [&](std::ostream& s) {
        s << "tsnlse " << version() << " scan, policy " << to_string(mf.policy) << ", beta V = " << mf.beta_v << "\n";
        if (mf.policy == BoundaryPolicy::Reflect)
        {
            if (result.found)
                s << fmt::format("transition at g* = {:.4f} (bracket [{:.6g}, {:.6g}], jump {:.6g})\n", result.g_star,
                                 result.g_lower, result.g_upper, result.jump);
            else
                s << "no transition detected\n";
        }
        else
        {
            s << result.message << "\n";
            const bool coexist = std::any_of(result.rows.begin(), result.rows.end(),
                                             [](const BranchSet& r) { return r.branches.size() > 1; });
            if (coexist)
                s << fmt::format("multiple branches for g in [{:.6g}, {:.6g}]\n", result.coexist_lower,
                                 result.coexist_upper);
            const auto& first = result.rows.front();
            const auto& last = result.rows.back();
            s << fmt::format("small-g branch at g = {:.6g}: {:.6g}\n", first.g, first.low_field().observable);
            s << fmt::format("large-g branch at g = {:.6g}: {:.6g}\n", last.g, last.high_field().observable);
        }
    };
    auto summary = open_text(options.out_dir / "summary.txt");
    report(summary);
    for (const auto& row : result.rows) print_branches(summary, row);
    summary << "\n" << config.resolved();
    report(out);
}

void infrared(const RunConfig& config, const CommandOptions& options, std::ostream& out)
{
    const MeanFieldConfig mf = config.meanfield();
    const double x = config.infrared_x();
    const InfraredProbe probe = infrared_probe(mf, x, config.kappa());
    fs::create_directories(options.out_dir);
    CsvWriter csv(options.out_dir / "infrared.csv", config,
                  {{"verdict", to_string(probe.verdict)},
                   {"growth", to_string(probe.growth)},
                   {"r2_bounded", num(probe.fit_r2[0])},
                   {"r2_power", num(probe.fit_r2[1])},
                   {"r2_log_suppressed", num(probe.fit_r2[2])}});
    csv.row({"kappa", "F"});
    for (std::size_t i = 0; i < probe.kappa.size(); ++i) csv.row({num(probe.kappa[i]), num(probe.value[i])});

    auto report = [&](std::ostream& s) {
        s << fmt::format("D = {}, x = {:.6g}, beta V = {:.6g}: {}\n", mf.dimension, x, mf.beta_v,
                         to_string(probe.verdict));
        s << fmt::format("growth {} (R^2: bounded {:.4f}, power {:.4f}, log-suppressed {:.4f})\n",
                         to_string(probe.growth), probe.fit_r2[0], probe.fit_r2[1], probe.fit_r2[2]);
        s << fmt::format("F at kappa = {:.3g}: {:.8g}; at kappa = {:.3g}: {:.8g}\n", probe.kappa.front(),
                         probe.value.front(), probe.kappa.back(), probe.value.back());
    };
    auto summary = open_text(options.out_dir / "summary.txt");
    report(summary);
    summary << "\n" << config.resolved();
    report(out);
}

}  // namespace

std::string version()
{
    return TSNLSE_VERSION;
}

int run_command(const RunConfig& config, const CommandOptions& options, std::ostream& out, std::ostream& err)
{
    try
    {
        switch (config.command())
        {
        case Command::Simulate: simulate(config, options, out); break;
        case Command::MeanField: meanfield(config, options, out); break;
        case Command::Scan: scan(config, options, out); break;
        case Command::Infrared: infrared(config, options, out); break;
        case Command::Describe: out << describe(config.lattice()); break;
        }
        return kSuccess;
    }
    catch (const ConfigError& e)
    {
        err << e.what() << "\n";
        return kConfigError;
    }
    catch (const NumericalError& e)
    {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    }
    catch (const NonStationaryError& e)
    {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    }
    catch (const StepTooLargeError& e)
    {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    }
    catch (const TuningError& e)
    {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    }
    catch (const std::logic_error& e)
    {
        err << "invalid input: " << e.what() << "\n";
        return kConfigError;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

int run_command(Command command, const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
                const CommandOptions& options, std::ostream& out, std::ostream& err)
{
    try
    {
        const RunConfig config = RunConfig::load(config_path, command, overrides);
        return run_command(config, options, out, err);
    }
    catch (const ConfigError& e)
    {
        err << e.what() << "\n";
        return kConfigError;
    }
}

// ---------------------------------------------------------------------------------------------------------------

RunConfig CsvDocument::config() const
{
    const auto it = meta.find("command");
    if (it == meta.end()) throw std::runtime_error("CSV artifact has no command line");
    return RunConfig::parse(config_text, command_from_string(it->second));
}

std::size_t CsvDocument::column(const std::string& name) const
{
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw std::out_of_range("CSV has no column '" + name + "'");
}

CsvDocument read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    CsvDocument doc;
    bool in_config = false;
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream s(line);
        while (std::getline(s, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    for (std::string line; std::getline(in, line);)
    {
        if (line.rfind("# ", 0) == 0)
        {
            const std::string body = line.substr(2);
            if (!body.empty() && body.front() == '[') in_config = true;
            if (in_config)
            {
                doc.config_text += body + "\n";
                continue;
            }
            const auto eq = body.find(" = ");
            if (eq != std::string::npos) doc.meta[body.substr(0, eq)] = body.substr(eq + 3);
            continue;
        }
        if (doc.columns.empty())
            doc.columns = split(line);
        else
            doc.rows.push_back(split(line));
    }
    return doc;
}

namespace
{

double to_double(const std::string& s)
{
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

}  // namespace

HistogramFile read_histogram(const std::filesystem::path& path)
{
    const CsvDocument doc = read_csv(path);
    HistogramFile file;
    file.mode = std::stoul(doc.meta.at("mode"));
    const std::size_t left = doc.column("bin_left");
    const std::size_t right = doc.column("bin_right");
    const std::size_t mass = doc.column("mass");
    const bool has_oracle = doc.columns.size() > 3;
    if (has_oracle) file.oracle = RadialHistogram{};
    for (const auto& row : doc.rows)
    {
        file.simulation.mass.push_back(to_double(row[mass]));
        if (has_oracle) file.oracle->mass.push_back(to_double(row[doc.column("oracle_mass")]));
        if (file.simulation.mass.size() == 1)
        {
            file.simulation.bin_width = to_double(row[right]) - to_double(row[left]);
            if (has_oracle) file.oracle->bin_width = file.simulation.bin_width;
        }
    }
    // the width is a fixed constant of the format; snap away the subtraction rounding
    if (std::abs(file.simulation.bin_width - kRadialBinWidth) < 1e-12)
    {
        file.simulation.bin_width = kRadialBinWidth;
        if (has_oracle) file.oracle->bin_width = kRadialBinWidth;
    }
    return file;
}

EventLog read_events(const std::filesystem::path& path)
{
    const CsvDocument doc = read_csv(path);
    EventLog log(doc.rows.size());
    for (std::size_t i = 0; i < doc.rows.size(); ++i)
    {
        const auto& row = doc.rows[i];
        const std::size_t id = std::stoul(row[doc.column("mode_id")]);
        log.reflections.at(id) = std::stoull(row[doc.column("reflections")]);
        log.breaks.at(id) = std::stoull(row[doc.column("breaks")]);
        log.absorbed_mass.at(id) = to_double(row[doc.column("absorbed_mass")]);
    }
    return log;
}

std::vector<BranchSet> read_branches(const std::filesystem::path& path)
{
    const CsvDocument doc = read_csv(path);
    const RunConfig config = doc.config();
    const BoundaryPolicy policy = policy_from_string(config.text("meanfield.policy"));
    std::vector<BranchSet> sets;
    for (const auto& row : doc.rows)
    {
        const double g = to_double(row[doc.column("g")]);
        if (sets.empty() || sets.back().g != g)
        {
            sets.emplace_back();
            sets.back().g = g;
            sets.back().policy = policy;
        }
        Branch b;
        b.x = to_double(row[doc.column("x")]);
        b.observable = to_double(row[doc.column("observable")]);
        b.stability = std::stoi(row[doc.column("stability")]);
        b.free_energy = to_double(row[doc.column("free_energy")]);
        b.selected = row[doc.column("selected")] == "1";
        sets.back().branches.push_back(b);
    }
    return sets;
}

InfraredProbe read_infrared(const std::filesystem::path& path)
{
    const CsvDocument doc = read_csv(path);
    InfraredProbe probe;
    for (const auto& row : doc.rows)
    {
        probe.kappa.push_back(to_double(row[doc.column("kappa")]));
        probe.value.push_back(to_double(row[doc.column("F")]));
    }
    probe.verdict = doc.meta.at("verdict") == "divergent" ? InfraredVerdict::Divergent : InfraredVerdict::Convergent;
    const std::string& growth = doc.meta.at("growth");
    probe.growth = growth == "power" ? GrowthLaw::Power
                   : growth == "log-suppressed" ? GrowthLaw::LogSuppressed
                                                : GrowthLaw::Bounded;
    probe.fit_r2 = {to_double(doc.meta.at("r2_bounded")), to_double(doc.meta.at("r2_power")),
                    to_double(doc.meta.at("r2_log_suppressed"))};
    return probe;
}

}  // namespace tsnlse::cli
