#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace tsnlse::quad
{

struct Result
{
    double value = 0.0;
    double error = 0.0;
    bool converged = false;
    int intervals = 0;
};

struct Options
{
    double rel_tol = 1e-8;
    double abs_tol = 0.0;
    int max_intervals = 4000;
};

namespace detail
{

// Gauss-Kronrod 10/21 nodes and weights (QUADPACK qk21).
inline constexpr std::array<double, 11> xgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452, 0.930157491355708226001207180059508,
    0.865063366688984510732096688423493, 0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784, 0.294392862701460198131126603103866,
    0.148874338981631210884826001129720, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> wgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390, 0.054755896574351996031381300244580,
    0.075039674810919952767043140916190, 0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077508460247059, 0.134709217311473325928054001771707, 0.142775938577060080797094273138717,
    0.147739104901338491374841515972068, 0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> wg = {0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
                                             0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
                                             0.295524224714752870173892994651338};

struct Segment
{
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(F& f, double a, double b)
{
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * wgk[10];
    double gauss = 0.0;
    for (int j = 0; j < 10; ++j)
    {
        const double dx = half * xgk[j];
        const double fsum = f(center - dx) + f(center + dx);
        kronrod += wgk[j] * fsum;
        if (j % 2 == 1) gauss += wg[j / 2] * fsum;
    }
    const double value = kronrod * half;
    const double error = std::abs((kronrod - gauss) * half);
    return {a, b, value, error};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of f over [a, b]. Subdivides the interval with
/// the largest error estimate until the total error meets max(abs_tol, rel_tol |I|).
template <class F>
Result integrate(F&& f, double a, double b, const Options& options = {})
{
    Result result;
    if (a == b) return {0.0, 0.0, true, 0};
    std::priority_queue<detail::Segment> heap;
    heap.push(detail::gk21(f, a, b));
    double total = heap.top().value;
    double error = heap.top().error;
    int intervals = 1;
    while (true)
    {
        const double target = std::max(options.abs_tol, options.rel_tol * std::abs(total));
        if (error <= target)
        {
            result.converged = true;
            break;
        }
        if (intervals >= options.max_intervals || !std::isfinite(total)) break;
        const detail::Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b))
        {
            heap.push(worst);
            break;
        }
        const auto left = detail::gk21(f, worst.a, mid);
        const auto right = detail::gk21(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++intervals;
    }
    // Re-sum to shed accumulated rounding from the running updates.
    total = 0.0;
    error = 0.0;
    while (!heap.empty())
    {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    result.value = total;
    result.error = error;
    result.intervals = intervals;
    if (!result.converged) result.converged = error <= std::max(options.abs_tol, options.rel_tol * std::abs(total));
    return result;
}

/// Integrates over consecutive breakpoints, accumulating values and errors.
template <class F>
Result integrate_pieces(F&& f, const std::vector<double>& breakpoints, const Options& options = {})
{
    Result total{0.0, 0.0, true, 0};
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    {
        if (breakpoints[i + 1] <= breakpoints[i]) continue;
        const Result piece = integrate(f, breakpoints[i], breakpoints[i + 1], options);
        total.value += piece.value;
        total.error += piece.error;
        total.converged = total.converged && piece.converged;
        total.intervals += piece.intervals;
    }
    return total;
}

}  // namespace tsnlse::quad
