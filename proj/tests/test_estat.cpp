#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "tsnlse/estat.hpp"

using namespace tsnlse;

namespace
{

// Single k = 0 mode with cap alpha and lambda = 0; the stationary weight is exp(-beta mu |a|^2 / 4).
LangevinModel single_mode(double alpha, double beta, double mu, double nu, BoundaryPolicy policy)
{
    ModelParams p;
    p.lambda = 0.0;
    p.beta = beta;
    p.mu = mu;
    p.nu = {nu};
    p.policy = policy;
    return LangevinModel(with_caps(build_lattice(1, 1.0, 1.0), CapProfile::table({alpha})), p);
}

// Bin masses of the truncated Gaussian r exp(-h r^2) on [0, alpha], binned in sqrt(beta) r.
RadialHistogram truncated_gaussian(double h, double alpha, double beta)
{
    RadialHistogram hist;
    const double sqrt_beta = std::sqrt(beta);
    hist.mass.resize(radial_bin_count(sqrt_beta * alpha));
    const double norm = -std::expm1(-h * alpha * alpha);
    for (std::size_t b = 0; b < hist.bins(); ++b)
    {
        const double lo = hist.left(b) / sqrt_beta;
        const double hi = std::min(hist.right(b) / sqrt_beta, alpha);
        hist.mass[b] = (std::exp(-h * lo * lo) - std::exp(-h * hi * hi)) / norm;
    }
    return hist;
}

double truncated_gaussian_r2(double h, double alpha)
{
    const double z = h * alpha * alpha;
    return (1.0 - z * std::exp(-z) / -std::expm1(-z)) / h;
}

std::size_t argmax(const std::vector<double>& v)
{
    return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

double mass_below(const RadialHistogram& h, double scaled_radius)
{
    double sum = 0.0;
    for (std::size_t b = 0; b < h.bins() && h.right(b) <= scaled_radius + 1e-12; ++b) sum += h.mass[b];
    return sum;
}

}  // namespace

TEST_CASE("total variation examples")
{
    RadialHistogram p{1.0, {0.5, 0.5, 0.0}};
    RadialHistogram q{1.0, {0.25, 0.25, 0.5}};
    CHECK(tv_distance(p, q) == doctest::Approx(0.5));
    CHECK(tv_distance(p, p) == 0.0);
    CHECK(tv_distance(RadialHistogram{1.0, {1.0, 0.0}}, RadialHistogram{1.0, {0.0, 1.0}}) == 1.0);
    CHECK(tv_distance(p, q) == tv_distance(q, p));
    CHECK_THROWS_AS(tv_distance(p, RadialHistogram{1.0, {1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(tv_distance(p, RadialHistogram{2.0, {0.5, 0.5, 0.0}}), std::invalid_argument);
}

TEST_CASE("bin count covers the scaled cap")
{
    CHECK(radial_bin_count(1.0) == 200);
    CHECK(radial_bin_count(0.5) == 100);
    CHECK(radial_bin_count(0.5012) == 101);
    CHECK(radial_bin_count(0.0) == 1);
}

TEST_CASE("sampler layout, normalization and merging")
{
    const auto lattice = support::three_modes();
    const double beta = 4.0;
    BlockedSampler a(lattice, beta, 4, 10), b(lattice, beta, 4, 10), both(lattice, beta, 4, 10);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i)
    {
        FieldState s{std::vector<cplx>(3), 0.0};
        for (std::size_t m = 0; m < 3; ++m) s.amplitudes[m] = std::polar(lattice.caps[m] * u(rng), 6.28 * u(rng));
        (i % 2 ? a : b).add(s);
        both.add(s);
    }
    CHECK(a.samples_in(0) == 10);
    CHECK(a.samples_in(1) == 10);
    CHECK(a.samples_in(2) == 0);
    a.merge(b);
    const auto merged = a.estimate(0);
    const auto direct = both.estimate(0);
    for (std::size_t m = 0; m < 3; ++m)
    {
        const auto& h = merged.modes[m].histogram;
        CHECK(h.bins() == radial_bin_count(2.0 * lattice.caps[m]));
        CHECK(std::abs(std::accumulate(h.mass.begin(), h.mass.end(), 0.0) - 1.0) < 1e-12);
        CHECK(merged.modes[m].mean_r2 == doctest::Approx(direct.modes[m].mean_r2));
    }
    CHECK_THROWS_AS(a.merge(BlockedSampler(lattice, beta, 5, 10)), std::invalid_argument);
}

TEST_CASE("burn-in selection on synthetic sequences")
{
    const auto lattice = with_caps(build_lattice(1, 1.0, 1.0), CapProfile::table({1.0}));
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto disk = [&](double cap) { return std::polar(cap * std::sqrt(u(rng)), 6.28 * u(rng)); };

    // The first 3 of 64 blocks sit near the cap, the rest are uniform on the disk.
    BlockedSampler settling(lattice, 1.0, 64, 20000);
    for (int i = 0; i < 64 * 20000; ++i)
        settling.add({{i < 3 * 20000 ? std::polar(0.99, 0.0) : disk(1.0)}, 0.0});
    CHECK(settling.select_burn_in() == 4);

    // A radius that keeps drifting never passes the doubling check.
    BlockedSampler drifting(lattice, 1.0, 64, 1000);
    for (int i = 0; i < 64 * 1000; ++i) drifting.add({{std::polar(double(i) / (64 * 1000), 0.0)}, 0.0});
    CHECK_THROWS_AS(drifting.select_burn_in(), NonStationaryError);
}

TEST_CASE("batch-means standard error on independent samples")
{
    const auto lattice = with_caps(build_lattice(1, 1.0, 1.0), CapProfile::table({1.0}));
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BlockedSampler sampler(lattice, 1.0, 64, 2000);
    for (int i = 0; i < 64 * 2000; ++i) sampler.add({{std::polar(std::sqrt(u(rng)), 0.0)}, 0.0});
    const auto est = sampler.estimate(0);
    // uniform on the unit disk: r^2 ~ U(0, 1), mean 1/2, sd 1/sqrt(12)
    const double expected_se = 1.0 / std::sqrt(12.0 * 64 * 2000);
    CHECK(est.modes[0].stderr_r2 == doctest::Approx(expected_se).epsilon(0.25));
    CHECK(std::abs(est.modes[0].mean_r2 - 0.5) < 4.0 * expected_se);
    CHECK(est.batches == 64);
}

TEST_CASE("reflecting single mode samples the truncated Gaussian")
{
    // h = beta mu / 4 = 1 and z = h alpha^2 = 1
    const double alpha = 1.0, beta = 1.0, mu = 4.0, h = 1.0;
    const auto model = single_mode(alpha, beta, mu, 100.0, BoundaryPolicy::Reflect);
    SamplingBudget budget;
    budget.n_steps = 20'000'000;
    budget.stride = 10;
    const auto est = estimate_stationary(model, 2e-5, 3, budget);
    const auto& mode = est.modes[0];
    CHECK(tv_distance(mode.histogram, truncated_gaussian(h, alpha, beta)) <= 0.03);
    CHECK(std::abs(mode.mean_r2 - truncated_gaussian_r2(h, alpha)) <= 3.0 * mode.stderr_r2);
    CHECK(mode.histogram.bins() == 200);
    CHECK(est.events.reflections[0] > 0);
    CHECK(est.events.breaks[0] == 0);
}

TEST_CASE("wave-breaking single mode without confinement has <|a|^2> = alpha^2 / 4")
{
    // Pure diffusion on the disk with reset at the cap. The discrete trigger overshoots by O(sqrt(dt)),
    // biasing <r^2> upward by about a percent at nu dt = 1e-4.
    const auto model = single_mode(1.0, 1.0, 0.0, 1.0, BoundaryPolicy::WaveBreak);
    SamplingBudget budget;
    budget.n_steps = 5'000'000;
    budget.stride = 10;
    const auto est = estimate_stationary(model, 1e-4, 5, budget);
    CHECK(std::abs(est.modes[0].mean_r2 - 0.25) < std::max(3.0 * est.modes[0].stderr_r2, 0.01));
    CHECK(est.events.breaks[0] > 0);
    CHECK(est.events.absorbed_mass[0] >= double(est.events.breaks[0]));
}

TEST_CASE("three-mode wave breaking: suppressed cap mass, enhanced mass near zero, positive absorption")
{
    const auto lattice = support::three_modes();
    const LangevinModel breaking(lattice, support::three_mode_params(BoundaryPolicy::WaveBreak));
    const LangevinModel reflecting(lattice, support::three_mode_params(BoundaryPolicy::Reflect));
    SamplingBudget budget;
    budget.stride = 10;
    budget.n_steps = 3'000'000;
    const auto wb = estimate_stationary(breaking, 2e-5, 1, budget);
    budget.n_steps = 2'000'000;
    const auto rf = estimate_stationary(reflecting, 5e-5, 1, budget);

    for (std::size_t m = 0; m < 3; ++m)
    {
        const auto& mass = wb.modes[m].histogram.mass;
        INFO("mode " << m);
        CHECK(mass.back() < 0.1 * mass[argmax(mass)]);
        CHECK(wb.events.absorbed_mass[m] > 0.0);
    }
    const std::size_t zero = std::size_t(lattice.find({0, 0, 0}));
    CHECK(mass_below(wb.modes[zero].histogram, 0.05) >= 2.0 * mass_below(rf.modes[zero].histogram, 0.05));
}

TEST_CASE("absorption rate vanishes as the caps grow at lambda = 0")
{
    // h = beta mu / 4 = 1/2 on the zero mode, so escapes through the cap are exponentially rare in alpha^2.
    auto rate = [](double scale) {
        const auto lattice =
            with_caps(build_lattice(1, 1.5, 1.0), CapProfile::table({0.5 * scale, 1.0 * scale, 0.5 * scale}));
        auto p = support::three_mode_params(BoundaryPolicy::WaveBreak);
        p.lambda = 0.0;
        p.mu = 2.0;
        const auto run = run_trajectory(initial_state(lattice), LangevinModel(lattice, p), 1e-4, 1'000'000, 7);
        return std::accumulate(run.events.absorbed_mass.begin(), run.events.absorbed_mass.end(), 0.0) / 100.0;
    };
    const double r1 = rate(1.0), r2 = rate(2.0), r4 = rate(4.0);
    CHECK(r1 > r2);
    CHECK(r2 > r4);
    CHECK(r4 < 0.01 * r1);
}

TEST_CASE("doubling the burn-in moves every moment by less than one standard error")
{
    const auto lattice = support::three_modes();
    const LangevinModel model(lattice, support::three_mode_params(BoundaryPolicy::Reflect));
    const std::size_t blocks = 64;
    const std::uint64_t stride = 10, n_steps = 4'000'000;
    BlockedSampler sampler(lattice, 1.0, blocks, n_steps / stride / blocks);
    const Observer obs{stride, [&](const FieldState& s) { sampler.add(s); }};
    run_trajectory(initial_state(lattice, InitialCondition::NearCap), model, 5e-5, n_steps, 2, std::span(&obs, 1));

    const std::size_t first = std::max<std::size_t>(sampler.select_burn_in(), 1);
    REQUIRE(2 * first < blocks);
    const auto once = sampler.estimate(first);
    const auto twice = sampler.estimate(2 * first);
    for (std::size_t m = 0; m < 3; ++m)
    {
        INFO("mode " << m);
        CHECK(std::abs(once.modes[m].mean_r2 - twice.modes[m].mean_r2) < twice.modes[m].stderr_r2);
        CHECK(std::abs(once.modes[m].mean_r4 - twice.modes[m].mean_r4) < twice.modes[m].stderr_r4);
    }
}

TEST_CASE("estimates do not depend on the thread count")
{
    const LangevinModel model(support::three_modes(), support::three_mode_params(BoundaryPolicy::Reflect));
    SamplingBudget budget;
    budget.n_steps = 200'000;
    budget.trajectories = 3;
    budget.burn_in_tolerance = 0.2;
    budget.threads = 1;
    const auto serial = estimate_stationary(model, 5e-5, 4, budget);
    budget.threads = 3;
    const auto parallel = estimate_stationary(model, 5e-5, 4, budget);
    for (std::size_t m = 0; m < 3; ++m)
    {
        CHECK(serial.modes[m].histogram.mass == parallel.modes[m].histogram.mass);
        CHECK(serial.modes[m].mean_r2 == parallel.modes[m].mean_r2);
    }
    CHECK(serial.events.reflections == parallel.events.reflections);
    CHECK(serial.samples == parallel.samples);
    CHECK(serial.simulated_time == doctest::Approx(30.0));
}

TEST_CASE("an empty budget is rejected")
{
    const LangevinModel model(support::three_modes(), support::three_mode_params(BoundaryPolicy::Reflect));
    SamplingBudget budget;
    budget.n_steps = 100;
    CHECK_THROWS_AS(estimate_stationary(model, 5e-5, 1, budget), std::invalid_argument);
    budget.n_steps = 0;
    CHECK_THROWS_AS(estimate_stationary(model, 5e-5, 1, budget), std::invalid_argument);
}

TEST_CASE("Gibbs oracle reproduces factorized marginals at lambda = 0")
{
    auto p = support::three_mode_params(BoundaryPolicy::Reflect);
    p.lambda = 0.0;
    const auto lattice = support::three_modes();
    const auto oracle = gibbs_oracle(LangevinModel(lattice, p), 6, 1'000'000);
    for (std::size_t m = 0; m < 3; ++m)
    {
        // h = beta (k^2 / 2 + mu / 4); the zero mode is uniform on its disk (h -> 0 limit).
        const double h = p.beta * lattice.k_norm[m] * lattice.k_norm[m] / 2.0;
        RadialHistogram expected = truncated_gaussian(std::max(h, 1e-12), lattice.caps[m], p.beta);
        INFO("mode " << m);
        CHECK(tv_distance(oracle.modes[m].histogram, expected) <= 0.02);
    }
    CHECK(oracle.samples == 1'000'000);
}

TEST_CASE("Gibbs oracle: quadrupling beta halves the RMS radius of the unbounded Gaussian")
{
    // caps far beyond the Gaussian width stand in for alpha -> infinity
    auto rms = [](double beta) {
        const auto model = single_mode(12.0, beta, 4.0, 1.0, BoundaryPolicy::Reflect);
        return std::sqrt(gibbs_oracle(model, 8, 200'000).modes[0].mean_r2);
    };
    CHECK(rms(1.0) / rms(4.0) == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("Gibbs oracle refuses wave breaking and reports failed tuning")
{
    const LangevinModel breaking(support::three_modes(), support::three_mode_params(BoundaryPolicy::WaveBreak));
    CHECK_THROWS_AS(gibbs_oracle(breaking, 1, 1000), std::invalid_argument);

    const LangevinModel model(support::three_modes(), support::three_mode_params(BoundaryPolicy::Reflect));
    OracleOptions untuned;
    untuned.max_tuning_rounds = 0;
    untuned.tuning_sweeps = 0;
    CHECK_THROWS_AS(gibbs_oracle(model, 1, 1000, untuned), TuningError);
}

TEST_CASE("exponential decay fit recovers a known rate above the floor")
{
    ConvergenceCurve curve;
    for (int i = 0; i < 60; ++i)
    {
        const double t = 0.01 * i;
        curve.times.push_back(t);
        curve.tv.push_back(std::max(std::exp(-20.0 * t), 0.01 + 0.001 * (i % 3)));
    }
    const auto fit = fit_exponential_decay(curve);
    CHECK(fit.slope == doctest::Approx(-20.0).epsilon(0.02));
    CHECK(fit.r2 > 0.999);
    CHECK(fit.floor == doctest::Approx(0.011).epsilon(0.1));
    CHECK(fit.points >= 5);
}

TEST_CASE("ensembles from opposite corners converge")
{
    const LangevinModel model(support::three_modes(), support::three_mode_params(BoundaryPolicy::Reflect));
    const auto curve = ensemble_convergence(model, 1e-4, 3, 1000, 20, 30);
    REQUIRE(curve.tv.size() == 30);
    CHECK(curve.tv.front() > 0.8);
    CHECK(*std::min_element(curve.tv.end() - 10, curve.tv.end()) < 0.15);
    CHECK(curve.times[1] - curve.times[0] == doctest::Approx(2e-3));
}
