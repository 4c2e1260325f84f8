#include "tsnlse/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tsnlse
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

double interpolate_zeta(const std::vector<std::pair<double, double>>& knots, double k)
{
    if (k <= knots.front().first) return knots.front().second;
    if (k >= knots.back().first) return knots.back().second;
    const auto it = std::upper_bound(knots.begin(), knots.end(), k,
                                     [](double v, const auto& knot) { return v < knot.first; });
    const auto& [k1, z1] = *it;
    const auto& [k0, z0] = *(it - 1);
    return z0 + (z1 - z0) * (k - k0) / (k1 - k0);
}

}  // namespace

CapProfile CapProfile::linear(double alpha0, double k_max)
{
    if (!(alpha0 > 0.0) || !(k_max > 0.0)) throw std::invalid_argument("linear cap needs alpha0 > 0 and k_max > 0");
    CapProfile p;
    p.kind = CapKind::Linear;
    p.alpha0 = alpha0;
    p.k_max = k_max;
    return p;
}

CapProfile CapProfile::langmuir(double c)
{
    if (!(c > 0.0)) throw std::invalid_argument("langmuir cap needs c > 0");
    CapProfile p;
    p.kind = CapKind::Langmuir;
    p.c = c;
    p.k_max = 1.0 / std::sqrt(3.0);
    return p;
}

CapProfile CapProfile::generic(double c, double k_max)
{
    return generic(c, k_max, {{0.0, 1.0}, {k_max, 0.0}});
}

CapProfile CapProfile::generic(double c, double k_max, std::vector<std::pair<double, double>> zeta)
{
    if (!(c > 0.0) || !(k_max > 0.0)) throw std::invalid_argument("generic cap needs c > 0 and k_max > 0");
    if (zeta.size() < 2) throw std::invalid_argument("generic cap needs at least two zeta knots");
    for (std::size_t i = 1; i < zeta.size(); ++i)
    {
        if (!(zeta[i].first > zeta[i - 1].first)) throw std::invalid_argument("zeta knots must increase in k");
        if (zeta[i].second > zeta[i - 1].second) throw std::invalid_argument("zeta must be non-increasing");
    }
    if (zeta.front().first != 0.0 || std::abs(zeta.front().second - 1.0) > 1e-12)
        throw std::invalid_argument("zeta must satisfy zeta(0) = 1");
    if (std::abs(zeta.back().first - k_max) > 1e-12 || zeta.back().second != 0.0)
        throw std::invalid_argument("zeta must satisfy zeta(k_max) = 0");
    CapProfile p;
    p.kind = CapKind::Generic;
    p.c = c;
    p.k_max = k_max;
    p.zeta = std::move(zeta);
    return p;
}

CapProfile CapProfile::table(std::vector<double> caps)
{
    for (double a : caps)
        if (!(a >= 0.0)) throw std::invalid_argument("per-mode caps must be >= 0");
    CapProfile p;
    p.kind = CapKind::PerMode;
    p.per_mode = std::move(caps);
    return p;
}

double CapProfile::cutoff() const
{
    switch (kind)
    {
    case CapKind::Langmuir: return 1.0 / std::sqrt(3.0);
    case CapKind::PerMode: return kInf;
    default: return k_max;
    }
}

double langmuir_shape(double k)
{
    const double s = std::sqrt(k);
    return 1.0 + 2.0 * std::sqrt(3.0) * k - (8.0 / std::pow(3.0, 0.75)) * s - k * k;
}

double cap_value(const CapProfile& profile, double k)
{
    if (k < 0.0) throw std::invalid_argument("cap_value: k must be >= 0");
    switch (profile.kind)
    {
    case CapKind::Linear:
        return k < profile.k_max ? profile.alpha0 * (1.0 - k / profile.k_max) : 0.0;
    case CapKind::Langmuir:
    {
        if (k >= profile.cutoff()) return 0.0;
        if (k == 0.0) return kInf;
        // the bracket vanishes like (cutoff - k)^3; clamp rounding noise
        const double shape = std::max(langmuir_shape(k), 0.0);
        return profile.c * std::sqrt(shape) / k;
    }
    case CapKind::Generic:
        if (k >= profile.k_max) return 0.0;
        if (k == 0.0) return kInf;
        return profile.c * interpolate_zeta(profile.zeta, k) / k;
    case CapKind::PerMode:
        break;
    }
    throw std::invalid_argument("cap_value: per-mode caps have no k dependence");
}

double ModeLattice::volume() const
{
    return std::pow(box_length, dimension);
}

std::ptrdiff_t ModeLattice::find(const ModeIndex& n) const
{
    const auto it = std::lower_bound(modes.begin(), modes.end(), n);
    if (it == modes.end() || *it != n) return -1;
    return it - modes.begin();
}

int ModeLattice::max_component() const
{
    int m = 0;
    for (const auto& n : modes)
        for (int c : n) m = std::max(m, std::abs(c));
    return m;
}

ModeLattice build_lattice(int dimension, double eta_c, double box_length, LatticeOptions options)
{
    if (dimension < 1 || dimension > 3) throw std::invalid_argument("build_lattice: dimension must be 1, 2 or 3");
    if (!(eta_c > 0.0) || !std::isfinite(eta_c)) throw std::invalid_argument("build_lattice: eta_c must be > 0");
    if (!(box_length > 0.0)) throw std::invalid_argument("build_lattice: box length must be > 0");

    // Volume estimate of the ball rejects runaway cutoffs before enumerating.
    const double ball = dimension == 1 ? 2.0 * eta_c
                        : dimension == 2 ? std::numbers::pi * eta_c * eta_c
                                         : 4.0 / 3.0 * std::numbers::pi * eta_c * eta_c * eta_c;
    if (ball > 2.0 * static_cast<double>(options.max_modes) + 64.0)
        throw std::length_error("build_lattice: mode count exceeds the configured safety limit");

    ModeLattice lattice;
    lattice.dimension = dimension;
    lattice.eta_c = eta_c;
    lattice.box_length = box_length;

    const int r = static_cast<int>(std::ceil(eta_c));
    const double eta2 = eta_c * eta_c;
    const int r1 = r;
    const int r2 = dimension >= 2 ? r : 0;
    const int r3 = dimension >= 3 ? r : 0;
    for (int i = -r1; i <= r1; ++i)
        for (int j = -r2; j <= r2; ++j)
            for (int l = -r3; l <= r3; ++l)
            {
                const double norm2 = double(i) * i + double(j) * j + double(l) * l;
                if (norm2 < eta2)
                {
                    lattice.modes.push_back({i, j, l});
                    if (lattice.modes.size() > options.max_modes)
                        throw std::length_error("build_lattice: mode count exceeds the configured safety limit");
                }
            }

    const double scale = 2.0 * std::numbers::pi / box_length;
    for (const auto& n : lattice.modes)
    {
        std::array<double, 3> k{scale * n[0], scale * n[1], scale * n[2]};
        lattice.wavevectors.push_back(k);
        lattice.k_norm.push_back(std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
    }
    lattice.caps.assign(lattice.size(), kInf);
    lattice.pinned.assign(lattice.size(), false);
    return lattice;
}

ModeLattice with_caps(ModeLattice lattice, const CapProfile& profile, bool pin_zero_mode)
{
    if (profile.kind == CapKind::PerMode)
    {
        if (profile.per_mode.size() != lattice.size())
            throw std::invalid_argument("with_caps: per-mode table size does not match the lattice");
        lattice.caps = profile.per_mode;
    }
    else
    {
        for (std::size_t i = 0; i < lattice.size(); ++i) lattice.caps[i] = cap_value(profile, lattice.k_norm[i]);
    }
    for (std::size_t i = 0; i < lattice.size(); ++i)
    {
        const bool zero_mode = lattice.k_norm[i] == 0.0;
        lattice.pinned[i] = lattice.caps[i] == 0.0 || (pin_zero_mode && zero_mode);
    }
    return lattice;
}

std::string describe(const ModeLattice& lattice)
{
    std::ostringstream out;
    for (int d = 0; d < lattice.dimension; ++d) out << "n" << (d + 1) << ' ';
    out << "k alpha\n";
    out << std::setprecision(10);
    for (std::size_t i = 0; i < lattice.size(); ++i)
    {
        for (int d = 0; d < lattice.dimension; ++d) out << lattice.modes[i][d] << ' ';
        out << lattice.k_norm[i] << ' ';
        if (std::isinf(lattice.caps[i]))
            out << "inf";
        else
            out << lattice.caps[i];
        out << '\n';
    }
    return out.str();
}

std::string to_string(CapKind kind)
{
    switch (kind)
    {
    case CapKind::Linear: return "linear";
    case CapKind::Langmuir: return "langmuir";
    case CapKind::Generic: return "generic";
    case CapKind::PerMode: return "table";
    }
    return "unknown";
}

CapKind cap_kind_from_string(const std::string& text)
{
    if (text == "linear") return CapKind::Linear;
    if (text == "langmuir") return CapKind::Langmuir;
    if (text == "generic") return CapKind::Generic;
    if (text == "table") return CapKind::PerMode;
    throw std::invalid_argument("unknown cap kind '" + text + "'");
}

}  // namespace tsnlse
