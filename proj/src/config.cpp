#include "tsnlse/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace tsnlse::cli
{
namespace
{

enum class Kind
{
    Integer,
    Unsigned,
    Real,
    RealList,
    Boolean,
    Choice
};

struct KeySpec
{
    const char* section;
    const char* key;
    Kind kind;
    const char* fallback;  // nullptr: required
    std::vector<std::string> choices = {};
};

const std::vector<KeySpec>& schema()
{
    static const std::vector<KeySpec> keys = {
        {"lattice", "dimension", Kind::Integer, "1"},
        {"lattice", "eta_c", Kind::Real, nullptr},
        {"lattice", "box_length", Kind::Real, "1"},
        {"lattice", "cap", Kind::Choice, "linear", {"linear", "langmuir", "generic", "table"}},
        {"lattice", "alpha0", Kind::Real, "1"},
        {"lattice", "k_max", Kind::Real, "1"},
        {"lattice", "c", Kind::Real, "1"},
        {"lattice", "caps", Kind::RealList, ""},
        {"lattice", "pin_zero_mode", Kind::Boolean, "false"},
        {"lattice", "max_modes", Kind::Unsigned, "1000000"},

        {"model", "lambda", Kind::Real, nullptr},
        {"model", "p", Kind::Integer, "4"},
        {"model", "beta", Kind::Real, "1"},
        {"model", "mu", Kind::Real, "0"},
        {"model", "nu", Kind::RealList, "1"},
        {"model", "policy", Kind::Choice, "reflect", {"reflect", "wavebreak"}},

        {"simulation", "dt", Kind::Real, nullptr},
        {"simulation", "n_steps", Kind::Unsigned, nullptr},
        {"simulation", "stride", Kind::Unsigned, "10"},
        {"simulation", "trajectories", Kind::Unsigned, "1"},
        {"simulation", "blocks", Kind::Unsigned, "64"},
        {"simulation", "initial", Kind::Choice, "zero", {"zero", "near_cap"}},
        {"simulation", "scheme", Kind::Choice, "rk4", {"rk4", "euler"}},
        {"simulation", "burn_in_tolerance", Kind::Real, "0.02"},
        {"simulation", "seed", Kind::Unsigned, "1"},
        {"simulation", "oracle_samples", Kind::Unsigned, "1000000"},
        {"simulation", "oracle_thin", Kind::Unsigned, "5"},
        {"simulation", "trace_steps", Kind::Unsigned, "10000"},

        {"meanfield", "dimension", Kind::Integer, "3"},
        {"meanfield", "m", Kind::Real, "0.5"},
        {"meanfield", "g", Kind::Real, "0"},
        {"meanfield", "q", Kind::Real, "1"},
        {"meanfield", "beta_v", Kind::Real, "1000"},
        {"meanfield", "policy", Kind::Choice, "reflect", {"reflect", "wavebreak"}},
        {"meanfield", "cap", Kind::Choice, "linear", {"linear", "langmuir", "generic"}},
        {"meanfield", "alpha0", Kind::Real, "1"},
        {"meanfield", "k_max", Kind::Real, "1"},
        {"meanfield", "c", Kind::Real, "1"},
        {"meanfield", "infrared_cutoff", Kind::Real, "0"},
        {"meanfield", "quad_rel_tol", Kind::Real, "1e-8"},
        {"meanfield", "root_tol", Kind::Real, "1e-10"},
        {"meanfield", "scan_points", Kind::Unsigned, "2000"},

        {"scan", "g_min", Kind::Real, nullptr},
        {"scan", "g_max", Kind::Real, nullptr},
        {"scan", "g_points", Kind::Unsigned, "51"},
        {"scan", "spacing", Kind::Choice, "linear", {"linear", "log"}},

        {"infrared", "x", Kind::Real, "0"},
        {"infrared", "kappa_max", Kind::Real, "0.1"},
        {"infrared", "kappa_min", Kind::Real, "1e-14"},
        {"infrared", "per_decade", Kind::Unsigned, "2"},
    };
    return keys;
}

const std::vector<std::string> kSectionOrder = {"lattice", "model", "simulation", "meanfield", "scan", "infrared"};

std::vector<std::string> needed_sections(Command command)
{
    switch (command)
    {
    case Command::Simulate: return {"lattice", "model", "simulation"};
    case Command::MeanField: return {"meanfield"};
    case Command::Scan: return {"meanfield", "scan"};
    case Command::Infrared: return {"meanfield", "infrared"};
    case Command::Describe: return {"lattice"};
    }
    return {};
}

const KeySpec* find_spec(const std::string& section, const std::string& key)
{
    for (const auto& s : schema())
        if (section == s.section && key == s.key) return &s;
    return nullptr;
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_real(const std::string& s, double& out)
{
    if (s.empty()) return false;
    std::size_t used = 0;
    try
    {
        out = std::stod(s, &used);
    }
    catch (...)
    {
        return false;
    }
    return used == s.size() && std::isfinite(out);
}

bool parse_integer(const std::string& s, long long& out)
{
    if (s.empty()) return false;
    std::size_t used = 0;
    try
    {
        out = std::stoll(s, &used);
    }
    catch (...)
    {
        return false;
    }
    return used == s.size();
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> items;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) items.push_back(trim(item));
    return items;
}

std::string check_value(const KeySpec& spec, const std::string& value)
{
    const std::string where = fmt::format("{}.{}", spec.section, spec.key);
    double real = 0.0;
    long long integer = 0;
    switch (spec.kind)
    {
    case Kind::Integer:
        if (!parse_integer(value, integer)) return where + ": expected an integer, got '" + value + "'";
        break;
    case Kind::Unsigned:
        if (!parse_integer(value, integer) || integer < 0)
            return where + ": expected a non-negative integer, got '" + value + "'";
        break;
    case Kind::Real:
        if (!parse_real(value, real)) return where + ": expected a finite number, got '" + value + "'";
        break;
    case Kind::RealList:
        if (value.empty()) break;
        for (const auto& item : split_list(value))
            if (!parse_real(item, real)) return where + ": expected a comma-separated list of numbers, got '" + value + "'";
        break;
    case Kind::Boolean:
        if (value != "true" && value != "false") return where + ": expected true or false, got '" + value + "'";
        break;
    case Kind::Choice:
        if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end())
        {
            std::string options;
            for (const auto& c : spec.choices) options += (options.empty() ? "" : "|") + c;
            return where + ": expected one of " + options + ", got '" + value + "'";
        }
        break;
    }
    return {};
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string msg = "configuration error:";
          for (const auto& p : problems) msg += "\n  " + p;
          return msg;
      }()),
      problems_(std::move(problems))
{
}

std::string to_string(Command command)
{
    switch (command)
    {
    case Command::Simulate: return "simulate";
    case Command::MeanField: return "meanfield";
    case Command::Scan: return "scan";
    case Command::Infrared: return "infrared";
    case Command::Describe: return "describe";
    }
    return "unknown";
}

Command command_from_string(const std::string& name)
{
    for (Command c : {Command::Simulate, Command::MeanField, Command::Scan, Command::Infrared, Command::Describe})
        if (to_string(c) == name) return c;
    throw std::invalid_argument("unknown command '" + name + "'");
}

RunConfig RunConfig::parse(const std::string& text, Command command, const std::vector<std::string>& overrides)
{
    namespace pt = boost::property_tree;
    std::vector<std::string> problems;
    pt::ptree tree;
    try
    {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error& e)
    {
        throw ConfigError({fmt::format("line {}: {}", e.line(), e.message())});
    }

    std::map<std::string, std::string> given;  // "section.key" -> value
    std::set<std::string> sections;
    for (const auto& [name, node] : tree)
    {
        if (node.empty())
        {
            problems.push_back("key '" + name + "' appears outside any section");
            continue;
        }
        if (std::find(kSectionOrder.begin(), kSectionOrder.end(), name) == kSectionOrder.end())
        {
            problems.push_back("unknown section [" + name + "]");
            continue;
        }
        sections.insert(name);
        for (const auto& [key, leaf] : node)
        {
            if (!find_spec(name, key))
            {
                problems.push_back(name + "." + key + ": unknown key");
                continue;
            }
            given[name + "." + key] = trim(leaf.data());
        }
    }
    for (const auto& o : overrides)
    {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        {
            problems.push_back("override '" + o + "': expected section.key=value");
            continue;
        }
        const std::string section = trim(o.substr(0, dot));
        const std::string key = trim(o.substr(dot + 1, eq - dot - 1));
        if (!find_spec(section, key))
        {
            problems.push_back("override '" + o + "': unknown key " + section + "." + key);
            continue;
        }
        sections.insert(section);
        given[section + "." + key] = trim(o.substr(eq + 1));
    }
    for (const auto& s : needed_sections(command))
    {
        if (!sections.count(s)) problems.push_back("missing section [" + s + "] required by '" + to_string(command) + "'");
        sections.insert(s);
    }

    RunConfig config;
    config.command_ = command;
    for (const auto& spec : schema())
    {
        if (!sections.count(spec.section)) continue;
        const std::string full = std::string(spec.section) + "." + spec.key;
        const auto it = given.find(full);
        std::string value;
        if (it != given.end())
        {
            value = it->second;
        }
        else if (spec.fallback)
        {
            value = spec.fallback;
        }
        else
        {
            problems.push_back(full + ": required key is missing");
            continue;
        }
        const std::string issue = check_value(spec, value);
        if (!issue.empty())
        {
            problems.push_back(issue);
            continue;
        }
        config.values_.emplace_back(full, value);
    }
    if (!problems.empty()) throw ConfigError(problems);

    // Semantic checks by building what the command will use.
    auto attempt = [&](const char* what, auto&& build) {
        try
        {
            build();
        }
        catch (const std::exception& e)
        {
            problems.push_back(std::string(what) + ": " + e.what());
        }
    };
    if (sections.count("lattice")) attempt("lattice", [&] { (void)config.lattice(); });
    if (command == Command::Simulate && problems.empty())
    {
        attempt("model", [&] {
            const LangevinModel model(config.lattice(), config.model());
            const double dt = config.dt();
            if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
            if (dt >= max_stable_dt(model))
                throw std::invalid_argument(
                    fmt::format("simulation.dt = {} is too large; the noise-to-cap ratio needs dt < {:.6g}", dt,
                                max_stable_dt(model)));
        });
        attempt("simulation", [&] {
            const SamplingBudget b = config.budget(1);
            if (b.stride == 0) throw std::invalid_argument("stride must be > 0");
            if (b.trajectories == 0) throw std::invalid_argument("trajectories must be > 0");
            if (b.blocks < 4) throw std::invalid_argument("blocks must be >= 4");
            if (b.n_steps / b.stride < b.blocks)
                throw std::invalid_argument(fmt::format(
                    "budget too small: n_steps / stride = {} samples cannot fill {} blocks, histograms would be empty",
                    b.n_steps / b.stride, b.blocks));
            if (!(b.burn_in_tolerance > 0.0 && b.burn_in_tolerance < 1.0))
                throw std::invalid_argument("burn_in_tolerance must lie in (0, 1)");
            if (config.count("simulation.oracle_thin") == 0) throw std::invalid_argument("oracle_thin must be > 0");
        });
    }
    if (sections.count("meanfield")) attempt("meanfield", [&] { config.meanfield().validate(); });
    if (sections.count("scan")) attempt("scan", [&] { (void)config.g_grid(); });
    if (sections.count("infrared")) attempt("infrared", [&] { (void)config.kappa(); });
    if (!problems.empty()) throw ConfigError(problems);
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path, Command command, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read configuration file '" + path.string() + "'"});
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), command, overrides);
}

bool RunConfig::has(const std::string& key) const
{
    return std::any_of(values_.begin(), values_.end(), [&](const auto& kv) { return kv.first == key; });
}

const std::string& RunConfig::text(const std::string& key) const
{
    for (const auto& kv : values_)
        if (kv.first == key) return kv.second;
    throw std::out_of_range("configuration has no value for " + key);
}

double RunConfig::number(const std::string& key) const
{
    double v = 0.0;
    parse_real(text(key), v);
    return v;
}

std::uint64_t RunConfig::count(const std::string& key) const
{
    long long v = 0;
    parse_integer(text(key), v);
    return static_cast<std::uint64_t>(v);
}

bool RunConfig::flag(const std::string& key) const
{
    return text(key) == "true";
}

std::vector<double> RunConfig::numbers(const std::string& key) const
{
    std::vector<double> out;
    const std::string& raw = text(key);
    if (raw.empty()) return out;
    for (const auto& item : split_list(raw))
    {
        double v = 0.0;
        parse_real(item, v);
        out.push_back(v);
    }
    return out;
}

std::string RunConfig::resolved() const
{
    std::string out;
    std::string current;
    for (const auto& [full, value] : values_)
    {
        const auto dot = full.find('.');
        const std::string section = full.substr(0, dot);
        if (section != current)
        {
            out += "[" + section + "]\n";
            current = section;
        }
        out += full.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

ModeLattice RunConfig::lattice() const
{
    LatticeOptions options;
    options.max_modes = count("lattice.max_modes");
    ModeLattice lattice = build_lattice(static_cast<int>(number("lattice.dimension")), number("lattice.eta_c"),
                                        number("lattice.box_length"), options);
    const std::string& kind = text("lattice.cap");
    CapProfile profile;
    if (kind == "table")
        profile = CapProfile::table(numbers("lattice.caps"));
    else if (kind == "linear")
        profile = CapProfile::linear(number("lattice.alpha0"), number("lattice.k_max"));
    else if (kind == "langmuir")
        profile = CapProfile::langmuir(number("lattice.c"));
    else
        profile = CapProfile::generic(number("lattice.c"), number("lattice.k_max"));
    return with_caps(std::move(lattice), profile, flag("lattice.pin_zero_mode"));
}

ModelParams RunConfig::model() const
{
    ModelParams p;
    p.lambda = number("model.lambda");
    p.p = static_cast<int>(number("model.p"));
    p.beta = number("model.beta");
    p.mu = number("model.mu");
    p.nu = numbers("model.nu");
    p.policy = policy_from_string(text("model.policy"));
    return p;
}

double RunConfig::dt() const
{
    return number("simulation.dt");
}

std::uint64_t RunConfig::seed() const
{
    return count("simulation.seed");
}

SamplingBudget RunConfig::budget(unsigned threads) const
{
    SamplingBudget b;
    b.n_steps = count("simulation.n_steps");
    b.stride = count("simulation.stride");
    b.trajectories = static_cast<unsigned>(count("simulation.trajectories"));
    b.threads = std::max(1u, threads);
    b.blocks = count("simulation.blocks");
    b.initial = text("simulation.initial") == "near_cap" ? InitialCondition::NearCap : InitialCondition::Zero;
    b.scheme = text("simulation.scheme") == "euler" ? DriftScheme::Euler : DriftScheme::RungeKutta4;
    b.burn_in_tolerance = number("simulation.burn_in_tolerance");
    return b;
}

std::uint64_t RunConfig::oracle_samples() const
{
    return count("simulation.oracle_samples");
}

OracleOptions RunConfig::oracle() const
{
    OracleOptions o;
    o.thin = count("simulation.oracle_thin");
    o.blocks = count("simulation.blocks");
    return o;
}

std::uint64_t RunConfig::trace_steps() const
{
    return count("simulation.trace_steps");
}

MeanFieldConfig RunConfig::meanfield() const
{
    MeanFieldConfig c;
    c.dimension = static_cast<int>(number("meanfield.dimension"));
    c.m = number("meanfield.m");
    c.g = number("meanfield.g");
    c.q = number("meanfield.q");
    c.beta_v = number("meanfield.beta_v");
    c.policy = policy_from_string(text("meanfield.policy"));
    const std::string& kind = text("meanfield.cap");
    if (kind == "linear")
        c.cap = CapProfile::linear(number("meanfield.alpha0"), number("meanfield.k_max"));
    else if (kind == "langmuir")
        c.cap = CapProfile::langmuir(number("meanfield.c"));
    else
        c.cap = CapProfile::generic(number("meanfield.c"), number("meanfield.k_max"));
    c.infrared_cutoff = number("meanfield.infrared_cutoff");
    c.quad_rel_tol = number("meanfield.quad_rel_tol");
    c.root_tol = number("meanfield.root_tol");
    c.scan_points = count("meanfield.scan_points");
    return c;
}

std::vector<double> RunConfig::g_grid() const
{
    const double lo = number("scan.g_min");
    const double hi = number("scan.g_max");
    const auto n = count("scan.g_points");
    const bool log = text("scan.spacing") == "log";
    if (n < 2) throw std::invalid_argument("g_points must be >= 2");
    if (!(hi > lo) || lo < 0.0) throw std::invalid_argument("need 0 <= g_min < g_max");
    if (log && !(lo > 0.0)) throw std::invalid_argument("log spacing needs g_min > 0");
    std::vector<double> grid;
    for (std::uint64_t i = 0; i < n; ++i)
    {
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);
        grid.push_back(log ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
    }
    grid.back() = hi;
    return grid;
}

double RunConfig::infrared_x() const
{
    return number("infrared.x");
}

std::vector<double> RunConfig::kappa() const
{
    return kappa_grid(number("infrared.kappa_max"), number("infrared.kappa_min"),
                      static_cast<int>(count("infrared.per_decade")));
}

}  // namespace tsnlse::cli
