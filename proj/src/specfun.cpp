#include "tsnlse/specfun.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tsnlse::specfun
{

namespace
{

/// Kahan-compensated sum_{k>=first} z^{k-first} / (k k!).
double scaled_series(double z, int first, double accuracy)
{
    double factorial = 1.0;
    for (int k = 2; k <= first; ++k) factorial *= k;
    double term = 1.0 / factorial;  // z^{k-first} / k!
    double sum = term / first;
    double comp = 0.0;
    for (int k = first + 1; k < 2000; ++k)
    {
        term *= z / k;
        const double add = term / k;
        const double y = add - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if (k > std::abs(z) && std::abs(add) <= accuracy * std::abs(sum)) break;
    }
    return sum;
}

double g_series(double z, double accuracy)
{
    return z * scaled_series(z, 1, accuracy);
}

double e1_continued_fraction(double x, double accuracy)
{
    constexpr double tiny = 1e-300;
    double b = x + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i)
    {
        const double an = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        const double del = c * d;
        h *= del;
        if (std::abs(del - 1.0) <= accuracy) break;
    }
    return h * std::exp(-x);
}

double ei_asymptotic(double x, double accuracy)
{
    if (x > 709.0) return std::numeric_limits<double>::infinity();
    double sum = 1.0;
    double term = 1.0;
    for (int k = 1; k < 200; ++k)
    {
        const double next = term * k / x;
        if (next > term) break;
        term = next;
        sum += term;
        if (term <= accuracy * sum) break;
    }
    return std::exp(x) / x * sum;
}

}  // namespace

void SpecFunConfig::validate() const
{
    if (!(accuracy > 0.0) || accuracy > 1e-6) throw std::invalid_argument("specfun accuracy must lie in (0, 1e-6]");
    if (!(crossover > 0.0)) throw std::invalid_argument("specfun crossover must be > 0");
}

double ei(double x, const SpecFunConfig& config)
{
    config.validate();
    if (!(x > 0.0)) throw std::domain_error("ei: argument must be > 0");
    if (x > config.crossover) return ei_asymptotic(x, config.accuracy);
    return euler_gamma + std::log(x) + g_series(x, config.accuracy);
}

double e1(double x, const SpecFunConfig& config)
{
    config.validate();
    if (!(x > 0.0)) throw std::domain_error("e1: argument must be > 0");
    if (x > 1.0) return e1_continued_fraction(x, config.accuracy);
    return -euler_gamma - std::log(x) - g_series(-x, config.accuracy);
}

double g_entire(double z, const SpecFunConfig& config)
{
    config.validate();
    if (z == 0.0) return 0.0;
    if (z > 0.0)
    {
        if (z <= config.crossover) return g_series(z, config.accuracy);
        return ei_asymptotic(z, config.accuracy) - std::log(z) - euler_gamma;
    }
    // The alternating series cancels catastrophically for large |z|.
    if (z >= -2.0) return g_series(z, config.accuracy);
    return -(e1_continued_fraction(-z, config.accuracy) + std::log(-z) + euler_gamma);
}

double psi_reflect(double z)
{
    if (std::abs(z) < 1e-2)
    {
        const double z2 = z * z;
        return 0.5 - z / 12.0 + z * z2 / 720.0 - z * z2 * z2 / 30240.0;
    }
    return 1.0 / z - 1.0 / std::expm1(z);
}

double psi_wavebreak(double z)
{
    if (std::abs(z) <= 1.0)
    {
        // (G - z) / (z G) with G = z (1 + z tail) avoids the cancellation near 0
        const double tail = scaled_series(z, 2, 1e-16);
        return tail / (1.0 + z * tail);
    }
    return 1.0 / z - 1.0 / g_entire(z);
}

double log_one_minus_exp_over(double z)
{
    if (z == 0.0) return 0.0;
    if (std::abs(z) <= 1.0) return std::log(-std::expm1(-z) / z);
    if (z > 0.0) return std::log(-std::expm1(-z)) - std::log(z);
    const double a = -z;
    return a + std::log(-std::expm1(-a)) - std::log(a);
}

}  // namespace tsnlse::specfun
