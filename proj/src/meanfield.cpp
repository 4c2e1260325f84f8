#include "tsnlse/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/tools/minima.hpp>

#include "tsnlse/quadrature.hpp"
#include "tsnlse/specfun.hpp"

namespace tsnlse
{
namespace
{

constexpr double kPi = std::numbers::pi;

// S_D / (2 pi)^D
double sphere_factor(int dimension)
{
    switch (dimension)
    {
    case 1: return 2.0 / (2.0 * kPi);
    case 2: return 2.0 * kPi / std::pow(2.0 * kPi, 2);
    case 3: return 4.0 * kPi / std::pow(2.0 * kPi, 3);
    default: throw std::invalid_argument("dimension must be 1, 2 or 3");
    }
}

double psi(double z, BoundaryPolicy policy)
{
    return policy == BoundaryPolicy::Reflect ? specfun::psi_reflect(z) : specfun::psi_wavebreak(z);
}

bool blows_up_at_zero(const CapProfile& cap)
{
    return cap.kind == CapKind::Langmuir || cap.kind == CapKind::Generic;
}

// Integral of f(k) over [lo, hi] with breakpoints. Pieces spanning more than a factor 2 in k are
// integrated in s = ln k, which resolves the 1/k-type behaviour of caps that blow up at k = 0.
quad::Result radial_integral(const std::function<double(double)>& f, double lo, double hi,
                             std::vector<double> breaks, double rel_tol, double abs_tol = 0.0)
{
    breaks.push_back(lo);
    breaks.push_back(hi);
    if (lo > 0.0)
        for (double d = hi / 10.0; d > lo; d /= 10.0) breaks.push_back(d);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double b) { return b < lo || b > hi; }),
                 breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    quad::Options opts;
    opts.rel_tol = rel_tol;
    opts.abs_tol = abs_tol;
    quad::Result total{0.0, 0.0, true, 0};
    std::vector<quad::Result> pieces;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    {
        const double a = breaks[i];
        const double b = breaks[i + 1];
        quad::Result piece;
        if (a > 0.0 && b > 2.0 * a)
        {
            auto g = [&](double s) {
                const double k = std::exp(s);
                return f(k) * k;
            };
            piece = quad::integrate(g, std::log(a), std::log(b), opts);
        }
        else
        {
            piece = quad::integrate(f, a, b, opts);
        }
        total.value += piece.value;
        total.error += piece.error;
        total.intervals += piece.intervals;
        pieces.push_back(piece);
    }
    // Pieces are refined to their own relative tolerance; what matters is the total.
    total.converged = total.error <= std::max(abs_tol, rel_tol * std::abs(total.value)) * 10.0 ||
                      std::all_of(pieces.begin(), pieces.end(), [](const quad::Result& p) { return p.converged; });
    return total;
}

std::vector<double> crossing_points(double x, double lo, double hi)
{
    std::vector<double> points;
    if (x < 0.0)
    {
        const double kstar = std::sqrt(-x);
        if (kstar > lo && kstar < hi) points.push_back(kstar);
    }
    return points;
}

double lower_limit(const MeanFieldConfig& config)
{
    return config.infrared_cutoff;
}

double moment_integrand(double x, double k, const MeanFieldConfig& config)
{
    const double alpha = cap_value(config.cap, k);
    if (!(alpha > 0.0)) return 0.0;
    const double a2 = alpha * alpha;
    const double z = 0.5 * config.beta_v * a2 * (x + k * k);
    return config.beta_v * a2 * psi(z, config.policy) * std::pow(k, config.dimension - 1);
}

double integrate_moment(double x, const MeanFieldConfig& config, double lo, double hi)
{
    auto f = [&](double k) { return moment_integrand(x, k, config); };
    std::vector<double> breaks = crossing_points(x, lo, hi);
    // With a pole-like cap at k = 0 and no cutoff, the innermost piece is integrated in k itself.
    if (lo == 0.0 && blows_up_at_zero(config.cap))
    {
        const double first = 1e-6 * hi;
        quad::Options opts;
        opts.rel_tol = config.quad_rel_tol;
        const auto inner = quad::integrate(f, 0.0, first, opts);
        const auto outer = radial_integral(f, first, hi, breaks, config.quad_rel_tol);
        if (!inner.converged || !outer.converged || !std::isfinite(inner.value + outer.value))
            throw NumericalError("mode integral does not converge at k = 0 (infrared divergence)");
        return sphere_factor(config.dimension) * (inner.value + outer.value);
    }
    const auto r = radial_integral(f, lo, hi, breaks, config.quad_rel_tol);
    if (!r.converged || !std::isfinite(r.value)) throw NumericalError("mode integral did not converge");
    return sphere_factor(config.dimension) * r.value;
}

// Residual m - x - g F(x); positive below the lowest root.
struct Residual
{
    const MeanFieldConfig& config;
    double operator()(double x) const { return config.m - x - config.g * f_eps(x, config); }
};

double bisect(const Residual& r, double a, double ra, double b, double tol)
{
    // invariant: sign r(a) = sign ra, r(b) of the other sign
    while (b - a > tol)
    {
        const double mid = 0.5 * (a + b);
        if (!(mid > a && mid < b)) break;
        const double rm = r(mid);
        if (rm == 0.0) return mid;
        if ((rm > 0.0) == (ra > 0.0))
        {
            a = mid;
            ra = rm;
        }
        else
        {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

std::vector<double> scan_grid(const MeanFieldConfig& config, double x_lo)
{
    const double span = config.m - x_lo;
    const std::size_t half = std::max<std::size_t>(config.scan_points / 2, 8);
    std::vector<double> grid;
    grid.reserve(2 * half + 1);
    for (std::size_t i = 0; i <= half; ++i) grid.push_back(x_lo + span * static_cast<double>(i) / half);
    // geometric in m - x toward m, where roots cluster at small coupling
    const double dmin = std::min(1e-7 * std::max(1.0, std::abs(config.m)), 1e-3 * span);
    for (std::size_t i = 0; i < half; ++i)
        grid.push_back(config.m - dmin * std::pow(span / dmin, static_cast<double>(i) / (half - 1)));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

void attach_observables(BranchSet& set, const MeanFieldConfig& config)
{
    const double scale = std::max(1.0, std::abs(config.m));
    for (Branch& b : set.branches)
    {
        const double fx = f_eps(b.x, config);
        b.observable = config.g > 0.0 ? (config.m - b.x) / config.g : fx;
        b.residual = config.m - b.x - config.g * fx;
        const double step = 1e-6 * std::max(scale, std::abs(b.x));
        const double slope = 1.0 + config.g * (f_eps(b.x + step, config) - f_eps(b.x - step, config)) / (2.0 * step);
        b.stability = slope >= 0.0 ? 1 : -1;
        b.free_energy = std::numeric_limits<double>::quiet_NaN();
        if (config.policy == BoundaryPolicy::Reflect) b.free_energy = free_energy(b.x, config);
    }
    if (config.policy == BoundaryPolicy::Reflect && !set.branches.empty())
    {
        auto best = std::min_element(set.branches.begin(), set.branches.end(),
                                     [](const Branch& a, const Branch& b) { return a.free_energy < b.free_energy; });
        best->selected = true;
    }
}

}  // namespace

void MeanFieldConfig::validate() const
{
    std::vector<std::string> bad;
    if (dimension < 1 || dimension > 3) bad.push_back("dimension must be 1, 2 or 3");
    if (!(beta_v > 0.0)) bad.push_back("beta_v must be > 0");
    if (!(g >= 0.0) || !std::isfinite(g)) bad.push_back("g must be finite and >= 0");
    if (!(q > 0.0)) bad.push_back("q must be > 0");
    if (!std::isfinite(m)) bad.push_back("m must be finite");
    if (!(infrared_cutoff >= 0.0)) bad.push_back("infrared_cutoff must be >= 0");
    if (cap.kind == CapKind::PerMode) bad.push_back("mean-field caps must be a function of k");
    if (!(quad_rel_tol > 0.0 && quad_rel_tol < 1e-3)) bad.push_back("quad_rel_tol must lie in (0, 1e-3)");
    if (!(root_tol > 0.0)) bad.push_back("root_tol must be > 0");
    if (!(residual_tol > 0.0)) bad.push_back("residual_tol must be > 0");
    if (scan_points < 16) bad.push_back("scan_points must be >= 16");
    if (!(cap.cutoff() > infrared_cutoff)) bad.push_back("infrared_cutoff must lie below the cap cutoff");
    if (bad.empty()) return;
    std::string msg = "invalid mean-field configuration:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw std::invalid_argument(msg);
}

double h_fn(double x, double k, double beta)
{
    return 0.5 * beta * (k * k + x);
}

double z_mode(double x, double k, double beta_v, BoundaryPolicy policy, double alpha)
{
    if (!(alpha > 0.0)) throw std::domain_error("z_mode: mode with zero cap carries no measure");
    const double a2 = alpha * alpha;
    const double u = x + k * k;
    const double z = 0.5 * beta_v * a2 * u;
    // Z / (beta V alpha^2 / 2) = Phi(z) / z, which is 1 + O(z)
    double ratio;
    if (std::abs(z) < 1e-8)
        ratio = policy == BoundaryPolicy::Reflect ? 1.0 + 0.5 * z : 1.0 + 0.25 * z;
    else
        ratio = (policy == BoundaryPolicy::Reflect ? std::expm1(z) : specfun::g_entire(z)) / z;
    return 0.5 * beta_v * a2 * ratio;
}

double mode_second_moment(double x, double k, double beta_v, BoundaryPolicy policy, double alpha)
{
    if (!(alpha > 0.0)) throw std::domain_error("mode_second_moment: mode with zero cap carries no measure");
    const double a2 = alpha * alpha;
    const double z = 0.5 * beta_v * a2 * (x + k * k);
    return beta_v * a2 * psi(z, policy);
}

double f_eps(double x, const MeanFieldConfig& config)
{
    return integrate_moment(x, config, lower_limit(config), config.cap.cutoff());
}

double f_eps_discrete(double x, const MeanFieldConfig& config, double box_length)
{
    const double kc = config.cap.cutoff();
    const double eta = kc * box_length / (2.0 * kPi);
    const ModeLattice lattice = build_lattice(config.dimension, eta, box_length);
    double sum = 0.0;
    for (std::size_t i = 0; i < lattice.size(); ++i)
    {
        const double k = lattice.k_norm[i];
        if (k < config.infrared_cutoff) continue;
        if (k == 0.0 && blows_up_at_zero(config.cap)) continue;
        const double alpha = cap_value(config.cap, k);
        if (alpha > 0.0) sum += mode_second_moment(x, k, config.beta_v, config.policy, alpha);
    }
    return sum / lattice.volume();
}

double f_saturation(const MeanFieldConfig& config)
{
    auto f = [&](double k) {
        const double alpha = cap_value(config.cap, k);
        return config.beta_v * alpha * alpha * std::pow(k, config.dimension - 1);
    };
    const double lo = lower_limit(config);
    const auto r = radial_integral(f, lo, config.cap.cutoff(), {}, 1e-10);
    if (!std::isfinite(r.value)) throw NumericalError("saturated mode integral diverges; set an infrared cutoff");
    return sphere_factor(config.dimension) * r.value;
}

int BranchSet::selected_index() const
{
    for (std::size_t i = 0; i < branches.size(); ++i)
        if (branches[i].selected) return static_cast<int>(i);
    return -1;
}

const Branch& BranchSet::high_field() const
{
    if (branches.empty()) throw std::out_of_range("empty branch set");
    return *std::max_element(branches.begin(), branches.end(),
                             [](const Branch& a, const Branch& b) { return a.observable < b.observable; });
}

const Branch& BranchSet::low_field() const
{
    if (branches.empty()) throw std::out_of_range("empty branch set");
    return *std::min_element(branches.begin(), branches.end(),
                             [](const Branch& a, const Branch& b) { return a.observable < b.observable; });
}

BranchSet solve_selfconsistency(const MeanFieldConfig& config)
{
    config.validate();
    BranchSet set;
    set.g = config.g;
    set.policy = config.policy;
    if (config.g == 0.0)
    {
        set.branches.push_back(Branch{config.m});
        attach_observables(set, config);
        return set;
    }

    // Every root obeys m - x = g F(x) <= g sup F, and psi <= 1 bounds F by the saturated integral.
    const double bound = f_saturation(config);
    const double span = config.g * bound * 1.05 + 1e-3 * std::max(1.0, std::abs(config.m));
    const double x_lo = config.m - span;
    const Residual residual{config};
    const std::vector<double> grid = scan_grid(config, x_lo);
    std::vector<double> r(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) r[i] = residual(grid[i]);

    const double tol = config.root_tol * std::max(1.0, std::abs(config.m));
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    {
        if (r[i] == 0.0)
        {
            roots.push_back(grid[i]);
            continue;
        }
        if ((r[i] > 0.0) != (r[i + 1] > 0.0) && r[i + 1] != 0.0)
        {
            roots.push_back(bisect(residual, grid[i], r[i], grid[i + 1], tol));
            continue;
        }
        // A pair of roots inside one cell shows up as a dip of |r| without a sign change.
        if (i >= 1 && (r[i - 1] > 0.0) == (r[i] > 0.0) && (r[i] > 0.0) == (r[i + 1] > 0.0) &&
            std::abs(r[i]) < std::abs(r[i - 1]) && std::abs(r[i]) < std::abs(r[i + 1]))
        {
            const double sign = r[i] > 0.0 ? 1.0 : -1.0;
            auto objective = [&](double x) { return sign * residual(x); };
            const auto [xmin, vmin] =
                boost::math::tools::brent_find_minima(objective, grid[i - 1], grid[i + 1], 40);
            if (vmin < 0.0)
            {
                roots.push_back(bisect(residual, grid[i - 1], r[i - 1], xmin, tol));
                roots.push_back(bisect(residual, xmin, -sign, grid[i + 1], tol));
            }
        }
    }
    if (r.back() == 0.0) roots.push_back(grid.back());

    std::sort(roots.begin(), roots.end());
    const double separation = 10.0 * tol;
    for (double x : roots)
        if (set.branches.empty() || x - set.branches.back().x > separation) set.branches.push_back(Branch{x});

    if (set.branches.empty())
    {
        std::ostringstream trace;
        trace << "no root of the self-consistency equation found on [" << x_lo << ", " << config.m << "] at g = "
              << config.g << "; residual at the ends " << r.front() << ", " << r.back();
        throw NumericalError(trace.str());
    }
    attach_observables(set, config);
    return set;
}

double free_energy(double x, const MeanFieldConfig& config)
{
    if (config.policy != BoundaryPolicy::Reflect)
        throw std::invalid_argument("free energy is defined for the reflecting policy only");
    const double fx = f_eps(x, config);
    auto f = [&](double k) {
        const double alpha = cap_value(config.cap, k);
        if (!(alpha > 0.0)) return 0.0;
        const double z = 0.5 * config.beta_v * alpha * alpha * (x + k * k);
        return specfun::log_one_minus_exp_over(z) * std::pow(k, config.dimension - 1);
    };
    const double lo = lower_limit(config);
    const double hi = config.cap.cutoff();
    const auto r = radial_integral(f, lo, hi, crossing_points(x, lo, hi), config.quad_rel_tol,
                                   1e-14 * config.beta_v);
    if (!std::isfinite(r.value)) throw NumericalError("log partition integral did not converge");
    const double log_z = sphere_factor(config.dimension) * r.value;
    return -(config.g / (2.0 * config.q)) * fx * fx + 0.5 * (config.m - x) * fx - log_z;
}

double minimize_free_energy(const MeanFieldConfig& config)
{
    config.validate();
    if (config.policy != BoundaryPolicy::Reflect)
        throw std::invalid_argument("free energy is defined for the reflecting policy only");
    // Stationary points solve m - x = (2g/q) F(x).
    const double coupling = std::max(config.g, 2.0 * config.g / config.q);
    const double span = coupling * f_saturation(config) * 1.05 + 1e-3 * std::max(1.0, std::abs(config.m));
    const std::vector<double> grid = scan_grid(config, config.m - span);
    std::size_t best = 0;
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        values[i] = free_energy(grid[i], config);
        if (values[i] < values[best]) best = i;
    }
    if (best == 0 || best + 1 == grid.size()) return grid[best];
    auto objective = [&](double x) { return free_energy(x, config); };
    return boost::math::tools::brent_find_minima(objective, grid[best - 1], grid[best + 1], 50).first;
}

TransitionScan transition_scan(const MeanFieldConfig& config, const std::vector<double>& g_grid, unsigned threads)
{
    config.validate();
    if (g_grid.size() < 2) throw std::invalid_argument("transition scan needs at least two couplings");
    for (std::size_t i = 1; i < g_grid.size(); ++i)
        if (!(g_grid[i] > g_grid[i - 1])) throw std::invalid_argument("coupling grid must be increasing");

    TransitionScan scan;
    scan.rows.resize(g_grid.size());
    auto solve_at = [&](double g) {
        MeanFieldConfig c = config;
        c.g = g;
        return solve_selfconsistency(c);
    };
    {
        std::vector<std::exception_ptr> errors(g_grid.size());
        auto work = [&](std::size_t first) {
            for (std::size_t i = first; i < g_grid.size(); i += std::max(1u, threads))
            {
                try
                {
                    scan.rows[i] = solve_at(g_grid[i]);
                }
                catch (...)
                {
                    errors[i] = std::current_exception();
                }
            }
        };
        if (threads <= 1)
        {
            work(0);
        }
        else
        {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
            for (auto& th : pool) th.join();
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    if (config.policy == BoundaryPolicy::WaveBreak)
    {
        bool any = false;
        for (const auto& row : scan.rows)
        {
            if (row.branches.size() < 2) continue;
            if (!any) scan.coexist_lower = row.g;
            scan.coexist_upper = row.g;
            any = true;
        }
        scan.message = any ? "coexisting branches; no branch selected for the wave-breaking policy"
                           : "single branch at every coupling";
        return scan;
    }

    auto selected = [](const BranchSet& s) { return s.branches[static_cast<std::size_t>(s.selected_index())].observable; };
    std::size_t at = 0;
    double largest = -1.0;
    for (std::size_t i = 0; i + 1 < scan.rows.size(); ++i)
    {
        const double jump = std::abs(selected(scan.rows[i + 1]) - selected(scan.rows[i]));
        if (jump > largest)
        {
            largest = jump;
            at = i;
        }
    }
    double a = g_grid[at];
    double b = g_grid[at + 1];
    double va = selected(scan.rows[at]);
    double vb = selected(scan.rows[at + 1]);
    while (b - a > 1e-3)
    {
        const double mid = 0.5 * (a + b);
        const double vm = selected(solve_at(mid));
        if (std::abs(vm - va) < std::abs(vb - vm))
        {
            a = mid;
            va = vm;
        }
        else
        {
            b = mid;
            vb = vm;
        }
    }
    scan.g_lower = a;
    scan.g_upper = b;
    scan.jump = std::abs(vb - va);
    scan.found = largest > 0.0 && scan.jump >= 0.5 * largest;
    scan.g_star = 0.5 * (a + b);
    if (scan.found)
    {
        std::ostringstream msg;
        msg << "transition at g = " << scan.g_star << " (jump " << scan.jump << ")";
        scan.message = msg.str();
    }
    else
    {
        scan.message = "no transition detected";
    }
    return scan;
}

std::string to_string(InfraredVerdict verdict)
{
    return verdict == InfraredVerdict::Convergent ? "convergent" : "divergent";
}

std::string to_string(GrowthLaw law)
{
    switch (law)
    {
    case GrowthLaw::Bounded: return "bounded";
    case GrowthLaw::Power: return "power";
    case GrowthLaw::LogSuppressed: return "log-suppressed";
    }
    return "unknown";
}

std::vector<double> kappa_grid(double largest, double smallest, int per_decade)
{
    if (!(largest > smallest && smallest > 0.0 && per_decade > 0))
        throw std::invalid_argument("kappa grid needs largest > smallest > 0 and per_decade > 0");
    std::vector<double> grid;
    const double decades = std::log10(largest / smallest);
    const int n = static_cast<int>(std::ceil(decades * per_decade - 1e-9));
    for (int i = 0; i <= n; ++i) grid.push_back(largest * std::pow(10.0, -std::min(decades, double(i) / per_decade)));
    return grid;
}

namespace
{

double fit_r2(const std::vector<double>& xs, const std::vector<double>& ys)
{
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy * sxy / (sxx * syy);
}

// int_kappa^top of the law's integrand, in s = ln k.
double law_integral(GrowthLaw law, int dimension, double kappa, double top)
{
    const double p = law == GrowthLaw::Bounded ? dimension : dimension - 2;
    auto f = [&](double s) {
        const double w = std::exp(p * s);
        return law == GrowthLaw::LogSuppressed ? w / std::abs(s) : w;
    };
    quad::Options opts;
    opts.rel_tol = 1e-10;
    return quad::integrate(f, std::log(kappa), std::log(top), opts).value;
}

}  // namespace

InfraredProbe infrared_probe(const MeanFieldConfig& config, double x, const std::vector<double>& kappa_grid)
{
    if (kappa_grid.size() < 3) throw std::invalid_argument("infrared probe needs at least three cutoffs");
    for (std::size_t i = 1; i < kappa_grid.size(); ++i)
        if (!(kappa_grid[i] < kappa_grid[i - 1] && kappa_grid[i] > 0.0))
            throw std::invalid_argument("cutoffs must be positive and decreasing");
    if (!blows_up_at_zero(config.cap)) throw std::invalid_argument("infrared probe needs a langmuir or generic cap");
    MeanFieldConfig c = config;
    c.policy = BoundaryPolicy::WaveBreak;
    c.infrared_cutoff = kappa_grid.front();
    c.validate();

    InfraredProbe probe;
    probe.kappa = kappa_grid;
    double value = integrate_moment(x, c, kappa_grid.front(), c.cap.cutoff());
    probe.value.push_back(value);
    // Each cutoff adds the exact contribution of the newly uncovered shell [kappa_{i+1}, kappa_i].
    std::vector<double> increments;
    for (std::size_t i = 0; i + 1 < kappa_grid.size(); ++i)
    {
        const double inc = integrate_moment(x, c, kappa_grid[i + 1], kappa_grid[i]);
        increments.push_back(inc);
        value += inc;
        probe.value.push_back(value);
    }
    const double threshold = 10.0 * c.quad_rel_tol * std::abs(value);
    const std::size_t n = increments.size();
    const bool saturated = std::abs(increments[n - 1]) < threshold && std::abs(increments[n - 2]) < threshold;
    probe.verdict = saturated ? InfraredVerdict::Convergent : InfraredVerdict::Divergent;

    const double top = std::min(kappa_grid.front(), 0.5);
    std::vector<double> tail_values;
    std::vector<std::vector<double>> laws(3);
    for (std::size_t i = 0; i < kappa_grid.size(); ++i)
    {
        if (kappa_grid[i] > top) continue;
        tail_values.push_back(probe.value[i]);
        for (int l = 0; l < 3; ++l)
            laws[l].push_back(law_integral(static_cast<GrowthLaw>(l), c.dimension, kappa_grid[i], top));
    }
    for (int l = 0; l < 3; ++l)
        probe.fit_r2.push_back(tail_values.size() >= 3 ? fit_r2(laws[l], tail_values) : 0.0);
    if (probe.verdict == InfraredVerdict::Convergent)
        probe.growth = GrowthLaw::Bounded;
    else
        probe.growth = probe.fit_r2[1] >= probe.fit_r2[2] ? GrowthLaw::Power : GrowthLaw::LogSuppressed;
    return probe;
}

double mf_mode_density(double radius, double h, double alpha, BoundaryPolicy policy)
{
    if (!(alpha > 0.0)) throw std::domain_error("mf_mode_density: alpha must be > 0");
    if (radius < 0.0 || radius > alpha) throw std::domain_error("mf_mode_density: radius outside [0, alpha]");
    const double a2 = alpha * alpha;
    const double z = h * a2;
    if (std::abs(z) > 700.0) throw std::domain_error("mf_mode_density: |h| alpha^2 too large");
    const double r2 = radius * radius;
    if (policy == BoundaryPolicy::Reflect)
    {
        if (std::abs(z) < 1e-12) return 2.0 * radius / a2;
        // written so that neither sign of h overflows
        if (h > 0.0) return 2.0 * h * radius * std::exp(-h * r2) / -std::expm1(-z);
        return -2.0 * h * radius * std::exp(h * (a2 - r2)) / -std::expm1(z);
    }
    if (radius == 0.0 || radius == alpha) return 0.0;
    // density of |a|: 2 pi r e^{-h r^2} int_r^alpha e^{h s^2} ds / s, normalized by (pi / 2h) G(h alpha^2)
    const double inner = 2.0 * std::log(alpha / radius) + specfun::g_entire(z) - specfun::g_entire(h * r2);
    const double g_over_z = std::abs(z) < 1e-10 ? 1.0 + 0.25 * z : specfun::g_entire(z) / z;
    const double norm = 0.5 * kPi * a2 * g_over_z;
    return kPi * radius * std::exp(-h * r2) * inner / norm;
}

double mf_mode_second_moment(double h, double alpha, BoundaryPolicy policy)
{
    const double a2 = alpha * alpha;
    return a2 * psi(h * a2, policy);
}

}  // namespace tsnlse
