#pragma once

namespace tsnlse::specfun
{

inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;

struct SpecFunConfig
{
    /// Target relative accuracy of the series and continued fractions, in (0, 1e-6].
    double accuracy = 1e-12;
    /// Above this argument Ei switches from the power series to its asymptotic expansion.
    double crossover = 40.0;

    void validate() const;
};

/// Principal-value exponential integral Ei(x) for x > 0. Throws std::domain_error otherwise.
double ei(double x, const SpecFunConfig& config = {});

/// E1(x) = int_x^inf e^{-t} / t dt for x > 0. Throws std::domain_error otherwise.
double e1(double x, const SpecFunConfig& config = {});

/// Entire function G(z) = sum_{k>=1} z^k / (k k!).
///   G(z) = Ei(z) - ln z - gamma        for z > 0
///   G(z) = -[E1(-z) + ln(-z) + gamma]  for z < 0
/// so that the wave-breaking partition function is (pi / 2h) G(alpha^2 h) for either sign of h.
double g_entire(double z, const SpecFunConfig& config = {});

/// (1 - z / (e^z - 1)) / z, continuous at z = 0 with value 1/2.
double psi_reflect(double z);

/// (1 - z / G(z)) / z, continuous at z = 0 with value 1/4.
double psi_wavebreak(double z);

/// ln((1 - e^{-z}) / z), continuous at z = 0 with value 0.
double log_one_minus_exp_over(double z);

}  // namespace tsnlse::specfun
