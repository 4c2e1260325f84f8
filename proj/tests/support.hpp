#pragma once

#include <complex>
#include <random>
#include <vector>

#include "tsnlse/dynamics.hpp"
#include "tsnlse/lattice.hpp"

namespace support
{

// Three modes n = -1, 0, 1 at L = 1 with caps 1/2, 1, 1/2 and lambda / beta = -5, nu = 10.
inline tsnlse::ModeLattice three_modes()
{
    return tsnlse::with_caps(tsnlse::build_lattice(1, 1.5, 1.0), tsnlse::CapProfile::table({0.5, 1.0, 0.5}));
}

inline tsnlse::ModelParams three_mode_params(tsnlse::BoundaryPolicy policy)
{
    tsnlse::ModelParams p;
    p.lambda = -5.0;
    p.beta = 1.0;
    p.mu = 0.0;
    p.nu = {10.0};
    p.policy = policy;
    return p;
}

inline std::vector<std::complex<double>> random_amplitudes(std::size_t n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> gauss(0.0, scale);
    std::vector<std::complex<double>> a(n);
    for (auto& v : a) v = {gauss(rng), gauss(rng)};
    return a;
}

inline double relative_error(double value, double reference)
{
    return std::abs(value - reference) / std::max(std::abs(reference), 1e-300);
}

}  // namespace support
