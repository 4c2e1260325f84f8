#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsnlse/dynamics.hpp"
#include "tsnlse/lattice.hpp"

namespace tsnlse
{

/// Raised when an integral over modes fails to converge (infrared divergence) or a solve cannot
/// produce the promised result.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Large-system mean-field problem in the rescaled variables x = mu/2 - |lambda| W, m = mu/2.
struct MeanFieldConfig
{
    int dimension = 3;
    double m = 0.5;
    /// Coupling q |lambda| / beta.
    double g = 0.0;
    /// Ratio W / <|phi|^2> of the self-consistency prescription; enters only the free energy.
    double q = 1.0;
    double beta_v = 1e3;
    CapProfile cap = CapProfile::linear(1.0, 1.0);
    BoundaryPolicy policy = BoundaryPolicy::Reflect;
    /// Lower limit of the k-integrals. Required > 0 for caps that blow up at k = 0 when D <= 2.
    double infrared_cutoff = 0.0;
    double quad_rel_tol = 1e-8;
    /// Bisection stops once the bracket is below root_tol * max(1, |m|).
    double root_tol = 1e-10;
    /// Accepted residual |m - x - g F(x)| relative to max(1, |m|, |x|).
    double residual_tol = 1e-6;
    std::size_t scan_points = 2000;

    /// Throws std::invalid_argument listing the offending fields.
    void validate() const;
};

/// beta (k^2 + x) / 2.
double h_fn(double x, double k, double beta);

/// Per-mode partition function in units of pi / beta:
///   reflecting     (e^z - 1) / u
///   wave-breaking  G(z) / u
/// with u = x + k^2, z = beta V alpha^2 u / 2, and the common limit beta V alpha^2 / 2 at u = 0.
/// Throws std::domain_error when alpha <= 0.
double z_mode(double x, double k, double beta_v, BoundaryPolicy policy, double alpha);

/// beta <|a(k)|^2> per unit volume: (2/u)(1 - z / Z(z)), continuous at u = 0.
double mode_second_moment(double x, double k, double beta_v, BoundaryPolicy policy, double alpha);

/// S_D / (2 pi)^D times the k-integral of mode_second_moment k^{D-1} over [infrared_cutoff, cutoff].
/// Throws NumericalError if the adaptive quadrature does not converge.
double f_eps(double x, const MeanFieldConfig& config);

/// Same quantity as an explicit sum over the modes of a torus of side box_length: (1/V) sum_n.
double f_eps_discrete(double x, const MeanFieldConfig& config, double box_length);

/// Largest value F can take (every mode pinned at its cap).
double f_saturation(const MeanFieldConfig& config);

struct Branch
{
    double x = 0.0;
    /// beta <|phi|^2>, equal to (m - x) / g at a root; F(m) at g = 0.
    double observable = 0.0;
    /// +1 where x + g F(x) - m increases through the root, -1 where it decreases.
    int stability = 0;
    /// NaN for the wave-breaking policy.
    double free_energy = 0.0;
    bool selected = false;
    double residual = 0.0;
};

struct BranchSet
{
    double g = 0.0;
    BoundaryPolicy policy = BoundaryPolicy::Reflect;
    std::vector<Branch> branches;  ///< increasing x

    /// Index of the selected branch, or -1 when none is selected.
    int selected_index() const;
    /// Branch with the largest observable.
    const Branch& high_field() const;
    /// Branch with the smallest observable.
    const Branch& low_field() const;
};

/// All roots x <= m of x + g F(x) = m. Reflecting: free energies attached and the minimizer selected.
/// Wave-breaking: every branch reported, none selected. Throws NumericalError on an empty set.
BranchSet solve_selfconsistency(const MeanFieldConfig& config);

/// beta times the mean-field free energy per unit volume as a function of x, W-independent terms dropped:
///   -(g / 2q) F^2 + (m - x) F / 2 - S_D / (2 pi)^D int ln[(1 - e^{-z}) / z] k^{D-1} dk.
/// Reflecting policy only (std::invalid_argument otherwise).
double free_energy(double x, const MeanFieldConfig& config);

/// Global minimizer over x of free_energy, i.e. the variational choice of W.
double minimize_free_energy(const MeanFieldConfig& config);

struct TransitionScan
{
    std::vector<BranchSet> rows;
    bool found = false;
    double g_star = 0.0;
    double g_lower = 0.0;  ///< refined bracket around the jump
    double g_upper = 0.0;
    double jump = 0.0;
    /// Wave-breaking: range of grid couplings with more than one branch (zero width if none).
    double coexist_lower = 0.0;
    double coexist_upper = 0.0;
    std::string message;
};

/// Solves on every grid coupling. Reflecting: locates the largest jump of the selected observable and
/// refines it by bisection in g to width 1e-3; the jump counts as a transition if at least half of it
/// survives refinement. Wave-breaking: reports the coexistence window only.
TransitionScan transition_scan(const MeanFieldConfig& config, const std::vector<double>& g_grid,
                               unsigned threads = 1);

enum class InfraredVerdict
{
    Convergent,
    Divergent
};

enum class GrowthLaw
{
    Bounded,         ///< like int k^{D-1} dk
    Power,           ///< like int k^{D-3} dk (|ln kappa| for D = 2)
    LogSuppressed    ///< like int |ln k|^{-1} k^{D-3} dk
};

std::string to_string(InfraredVerdict verdict);
std::string to_string(GrowthLaw law);

struct InfraredProbe
{
    std::vector<double> kappa;
    std::vector<double> value;  ///< wave-breaking F(x) with the integral cut off at kappa
    InfraredVerdict verdict = InfraredVerdict::Convergent;
    GrowthLaw growth = GrowthLaw::Bounded;
    /// R^2 of linear fits of value against each law, in GrowthLaw order.
    std::vector<double> fit_r2;
};

/// Evaluates the wave-breaking F(x) for each cutoff of a decreasing kappa grid. Divergent unless the last
/// two increments fall below 10x the quadrature tolerance relative to F.
InfraredProbe infrared_probe(const MeanFieldConfig& config, double x, const std::vector<double>& kappa_grid);

/// Decreasing geometric grid from `largest` down to `smallest` with `per_decade` points per decade.
std::vector<double> kappa_grid(double largest, double smallest, int per_decade);

/// Normalized radial density of |a| under exp(-h |a|^2) with the policy's boundary at alpha.
/// h already includes beta. Throws std::domain_error for radius outside [0, alpha] or |h| alpha^2 > 700.
double mf_mode_density(double radius, double h, double alpha, BoundaryPolicy policy);

/// <|a|^2> under mf_mode_density.
double mf_mode_second_moment(double h, double alpha, BoundaryPolicy policy);

}  // namespace tsnlse
