#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace tsnlse
{

/// Integer wave-vector n in Z^D. Components beyond the lattice dimension are zero.
using ModeIndex = std::array<int, 3>;

enum class CapKind
{
    Linear,    ///< alpha0 (1 - k / k_max) below k_max
    Langmuir,  ///< wave-breaking amplitude of a Langmuir wave, ~ c / k at small k
    Generic,   ///< c zeta(k) / k with a tabulated shape zeta
    PerMode    ///< explicit table, one cap per lattice mode
};

/// Amplitude cap alpha(k) as a function of the wavenumber modulus.
struct CapProfile
{
    CapKind kind = CapKind::Linear;
    double alpha0 = 1.0;
    double k_max = 1.0;
    double c = 1.0;
    /// (k, zeta) knots for the generic kind, increasing in k, zeta(0) = 1, zeta(k_max) = 0.
    std::vector<std::pair<double, double>> zeta;
    /// Caps in lattice order for the per-mode kind.
    std::vector<double> per_mode;

    static CapProfile linear(double alpha0, double k_max);
    static CapProfile langmuir(double c);
    /// Generic profile with the default linear shape zeta(k) = 1 - k / k_max.
    static CapProfile generic(double c, double k_max);
    static CapProfile generic(double c, double k_max, std::vector<std::pair<double, double>> zeta);
    static CapProfile table(std::vector<double> caps);

    /// Wavenumber at and beyond which the cap vanishes.
    double cutoff() const;
};

/// alpha(k) for k >= 0. Infinite at k = 0 for the langmuir and generic kinds.
/// Not defined for the per-mode kind (throws std::invalid_argument).
double cap_value(const CapProfile& profile, double k);

/// Bracketed Langmuir shape 1 + 2 sqrt(3) k - (8 / 3^{3/4}) sqrt(k) - k^2, i.e. k^2 alpha^2 / c^2.
double langmuir_shape(double k);

/// Truncated Fourier mode set ||n|| < eta_c on the D-torus of side L.
struct ModeLattice
{
    int dimension = 1;
    double box_length = 1.0;
    double eta_c = 1.0;
    std::vector<ModeIndex> modes;
    std::vector<std::array<double, 3>> wavevectors;
    std::vector<double> k_norm;
    std::vector<double> caps;
    /// Modes held at a_n = 0 for all times (zero cap or explicitly pinned k = 0 mode).
    std::vector<bool> pinned;

    std::size_t size() const { return modes.size(); }
    double volume() const;
    /// Position of n in the mode list, or -1 when absent.
    std::ptrdiff_t find(const ModeIndex& n) const;
    /// Largest |n_i| over all modes and components.
    int max_component() const;
    bool is_active(std::size_t i) const { return !pinned[i]; }
};

struct LatticeOptions
{
    std::size_t max_modes = 1'000'000;
};

/// Enumerates ||n|| < eta_c in lexicographic order with k_n = 2 pi n / L.
/// Caps start at +infinity; attach a profile with with_caps().
ModeLattice build_lattice(int dimension, double eta_c, double box_length, LatticeOptions options = {});

/// Returns a copy of the lattice with caps taken from the profile. Modes with a zero cap are pinned;
/// pin_zero_mode additionally pins n = 0 (required when its cap is infinite and the run is bounded).
ModeLattice with_caps(ModeLattice lattice, const CapProfile& profile, bool pin_zero_mode = false);

/// Plain-text table: one row per mode, columns n_1..n_D, |k_n|, alpha_n.
std::string describe(const ModeLattice& lattice);

std::string to_string(CapKind kind);
CapKind cap_kind_from_string(const std::string& text);

}  // namespace tsnlse
