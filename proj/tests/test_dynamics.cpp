#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "tsnlse/dynamics.hpp"

using namespace tsnlse;
using support::relative_error;

namespace
{

// Damping is required to be positive; this is small enough that nu (grad H + mu a / 2) underflows to zero.
constexpr double kNoDamping = 1e-300;

ModelParams params(double lambda, double mu = 0.0, double nu = 1.0, double beta = 1.0,
                   BoundaryPolicy policy = BoundaryPolicy::Reflect)
{
    ModelParams p;
    p.lambda = lambda;
    p.mu = mu;
    p.nu = {nu};
    p.beta = beta;
    p.policy = policy;
    return p;
}

FieldState state_of(std::vector<cplx> a)
{
    return {std::move(a), 0.0};
}

// int |psi|^4 d^Dx on a uniform grid of m^D points; exact for trigonometric polynomials once
// m exceeds four times the largest |n_i|.
double quartic_by_quadrature(const ModeLattice& lattice, std::span<const cplx> a, int m)
{
    const double h = lattice.box_length / m;
    const int ny = lattice.dimension > 1 ? m : 1;
    const int nz = lattice.dimension > 2 ? m : 1;
    double sum = 0.0;
    for (int ix = 0; ix < m; ++ix)
        for (int iy = 0; iy < ny; ++iy)
            for (int iz = 0; iz < nz; ++iz)
            {
                const double x[3] = {ix * h, iy * h, iz * h};
                cplx psi{};
                for (std::size_t n = 0; n < lattice.size(); ++n)
                {
                    double phase = 0.0;
                    for (int d = 0; d < 3; ++d) phase += lattice.wavevectors[n][d] * x[d];
                    psi += a[n] * std::polar(1.0, phase);
                }
                sum += std::norm(psi) * std::norm(psi);
            }
    return sum * lattice.volume() / (double(m) * ny * nz);
}

}  // namespace

TEST_CASE("hamiltonian examples")
{
    const auto single = build_lattice(1, 1.0, 1.0);
    const auto p = params(-5.0);
    CHECK(hamiltonian(state_of({0.0}), p, single) == 0.0);
    CHECK(hamiltonian(state_of({0.8}), p, single) == doctest::Approx(-5.0 / 4.0 * std::pow(0.8, 4)));

    const auto three = support::three_modes();
    const std::vector<cplx> a = {{0.21, -0.33}, {0.7, 0.12}, {-0.05, 0.41}};
    const double kinetic = 0.5 * (three.k_norm[0] * three.k_norm[0] * std::norm(a[0]) +
                                  three.k_norm[2] * three.k_norm[2] * std::norm(a[2]));
    const double expected = kinetic - 5.0 / 4.0 * quartic_by_quadrature(three, a, 64);
    CHECK(relative_error(hamiltonian(state_of(a), p, three), expected) < 1e-10);
}

TEST_CASE("hamiltonian matches real-space quadrature in two and three dimensions")
{
    std::mt19937_64 rng(17);
    for (int dimension : {2, 3})
    {
        const auto lattice = build_lattice(dimension, 2.3, 1.7);
        const auto a = support::random_amplitudes(lattice.size(), rng, 0.3);
        const LangevinModel model(lattice, params(0.8));
        double kinetic = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) kinetic += 0.5 * lattice.k_norm[i] * lattice.k_norm[i] * std::norm(a[i]);
        const double expected = kinetic + 0.2 * quartic_by_quadrature(lattice, a, 12);
        CHECK(relative_error(model.hamiltonian(a), expected) < 1e-10);
    }
}

TEST_CASE("mass examples")
{
    CHECK(mass(state_of({0.0, 2.0, 0.0})) == 1.0);
    CHECK(mass(state_of({0.0, 0.0})) == 0.0);
    std::mt19937_64 rng(2);
    const auto a = support::random_amplitudes(40, rng);
    double direct = 0.0;
    for (const auto& v : a) direct += v.real() * v.real() + v.imag() * v.imag();
    CHECK(mass(a) == doctest::Approx(direct / 4.0).epsilon(1e-14));
}

TEST_CASE("gradient examples")
{
    const auto single = build_lattice(1, 1.0, 1.0);
    const auto zero = grad_energy(state_of({0.0}), params(-5.0), single);
    CHECK(zero[0] == cplx{});
    const auto g = grad_energy(state_of({0.9}), params(-5.0), single);
    CHECK(g[0].real() == doctest::Approx(-5.0 * std::pow(0.9, 3)));
    CHECK(g[0].imag() == 0.0);
}

TEST_CASE("gradient matches central finite differences on 100 random states")
{
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> lambda_dist(-6.0, 6.0);
    const double step = 1e-5;
    for (int trial = 0; trial < 100; ++trial)
    {
        const int dimension = 1 + trial % 2;
        const auto lattice = dimension == 1 ? build_lattice(1, 3.5, 1.0) : build_lattice(2, 1.5, 1.0);
        const LangevinModel model(lattice, params(lambda_dist(rng)));
        auto a = support::random_amplitudes(lattice.size(), rng, 0.4);
        std::vector<cplx> gradient(a.size());
        model.energy_gradient(a, gradient);
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            for (int part = 0; part < 2; ++part)
            {
                const cplx shift = part == 0 ? cplx{step, 0.0} : cplx{0.0, step};
                const cplx saved = a[i];
                a[i] = saved + shift;
                const double up = model.hamiltonian(a);
                a[i] = saved - shift;
                const double down = model.hamiltonian(a);
                a[i] = saved;
                const double fd = (up - down) / (2.0 * step);
                const double exact = part == 0 ? gradient[i].real() : gradient[i].imag();
                INFO("trial " << trial << " mode " << i << " part " << part);
                CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
            }
        }
    }
}

TEST_CASE("direct and spectral convolutions agree")
{
    std::mt19937_64 rng(31);
    for (int dimension = 1; dimension <= 3; ++dimension)
    {
        const auto lattice = build_lattice(dimension, dimension == 3 ? 2.6 : 4.2, 1.0);
        const CubicConvolution direct(lattice, ConvolutionPath::Direct);
        const CubicConvolution spectral(lattice, ConvolutionPath::Spectral);
        for (int trial = 0; trial < 5; ++trial)
        {
            const auto a = support::random_amplitudes(lattice.size(), rng);
            std::vector<cplx> x(a.size()), y(a.size());
            direct.apply(a, x);
            spectral.apply(a, y);
            double diff = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i)
            {
                diff = std::max(diff, std::abs(x[i] - y[i]));
                scale = std::max(scale, std::abs(x[i]));
            }
            CHECK(diff <= 1e-10 * scale);
        }
    }
    CHECK(CubicConvolution(build_lattice(1, 10.0, 1.0)).path() == ConvolutionPath::Direct);
    CHECK(CubicConvolution(build_lattice(2, 10.0, 1.0)).path() == ConvolutionPath::Spectral);
}

TEST_CASE("drift examples")
{
    // single mode n = 1 at L = 2 pi has k = 1
    const auto lattice = build_lattice(1, 1.5, 2.0 * std::numbers::pi);
    const FieldState s = state_of({0.0, 0.0, cplx{0.3, 0.4}});
    const auto rot = drift(s, params(0.0, 0.0, kNoDamping), lattice);
    CHECK(std::abs(rot[2] - cplx{0.0, -1.0} * s.amplitudes[2]) < 1e-15);
    CHECK(std::abs((std::conj(rot[2]) * s.amplitudes[2]).real()) < 1e-15);
    CHECK(std::abs(rot[2]) == doctest::Approx(0.5));

    const auto zero_mode = build_lattice(1, 1.0, 1.0);
    const auto decay = drift(state_of({cplx{0.3, -0.2}}), params(0.0, 3.0, 2.0), zero_mode);
    CHECK(std::abs(decay[0] - (-2.0 * 1.5) * cplx{0.3, -0.2}) < 1e-15);

    std::mt19937_64 rng(4);
    const auto lattice2 = build_lattice(2, 2.1, 1.3);
    const auto a = support::random_amplitudes(lattice2.size(), rng, 0.5);
    const auto hamiltonian_part = drift(state_of(a), params(-2.0, 0.0, kNoDamping), lattice2);
    const auto gradient = grad_energy(state_of(a), params(-2.0), lattice2);
    double dot = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        dot += hamiltonian_part[i].real() * gradient[i].real() + hamiltonian_part[i].imag() * gradient[i].imag();
        scale += std::norm(gradient[i]);
    }
    CHECK(std::abs(dot) < 1e-13 * scale);
}

TEST_CASE("linear flow without damping preserves |a| to O(dt^2)")
{
    const auto lattice = build_lattice(1, 2.5, 1.0);
    const LangevinModel model(lattice, params(0.0, 0.0, kNoDamping));
    const FieldState start = state_of({cplx{0.2, 0.1}, cplx{0.5, 0.0}, cplx{0.0, -0.3}, cplx{0.1, 0.1}, cplx{-0.4, 0.2}});
    for (DriftScheme scheme : {DriftScheme::Euler, DriftScheme::RungeKutta4})
    {
        FieldState s = start;
        Stepper stepper(model, 1e-4, scheme, false);
        Rng rng = make_stream(1, 0);
        EventLog events(lattice.size());
        stepper.step(s, rng, events);
        for (std::size_t i = 0; i < s.amplitudes.size(); ++i)
        {
            const double k2dt = lattice.k_norm[i] * lattice.k_norm[i] * 1e-4;
            CHECK(std::abs(std::abs(s.amplitudes[i]) - std::abs(start.amplitudes[i])) <= k2dt * k2dt + 1e-15);
        }
    }
}

TEST_CASE("noise-free linear decay")
{
    const auto lattice = build_lattice(1, 1.0, 1.0);
    const double nu = 2.0, mu = 3.0, dt = 1e-4;
    const LangevinModel model(lattice, params(0.0, mu, nu));
    const auto steps = std::uint64_t(std::llround(2.0 / (nu * mu) / dt));
    for (DriftScheme scheme : {DriftScheme::Euler, DriftScheme::RungeKutta4})
    {
        const auto result = run_trajectory(state_of({cplx{0.6, 0.0}}), model, dt, steps, 1, {}, {scheme, false});
        CHECK(std::abs(std::abs(result.final_state.amplitudes[0]) / 0.6 - std::exp(-1.0)) < 1e-3 * std::exp(-1.0));
    }
}

TEST_CASE("forced boundary crossings")
{
    const auto lattice = build_lattice(1, 1.0, 1.0);  // k = 0, cap 1
    const auto capped = with_caps(lattice, CapProfile::table({1.0}));
    const double dt = 1e-4;
    const double growth = std::exp(50.0 * dt);  // mu = -100, nu = 1: da/dt = 50 a

    SUBCASE("wave break resets to zero and logs the pre-reset mass")
    {
        const LangevinModel model(capped, params(0.0, -100.0, 1.0, 1.0, BoundaryPolicy::WaveBreak));
        FieldState s = state_of({cplx{0.999, 0.0}});
        Stepper stepper(model, dt, DriftScheme::RungeKutta4, false);
        Rng rng = make_stream(1, 0);
        EventLog events(1);
        stepper.step(s, rng, events);
        CHECK(s.amplitudes[0] == cplx{});
        CHECK(events.breaks[0] == 1);
        CHECK(events.reflections[0] == 0);
        CHECK(events.absorbed_mass[0] == doctest::Approx(std::pow(0.999 * growth, 2)).epsilon(1e-9));
    }
    SUBCASE("reflection mirrors the radius at fixed phase")
    {
        const LangevinModel model(capped, params(0.0, -100.0, 1.0));
        const cplx phase = std::polar(1.0, 0.7);
        FieldState s = state_of({0.999 * phase});
        Stepper stepper(model, dt, DriftScheme::RungeKutta4, false);
        Rng rng = make_stream(1, 0);
        EventLog events(1);
        stepper.step(s, rng, events);
        CHECK(std::abs(s.amplitudes[0]) == doctest::Approx(2.0 - 0.999 * growth).epsilon(1e-9));
        CHECK(std::arg(s.amplitudes[0]) == doctest::Approx(0.7));
        CHECK(events.reflections[0] == 1);
        CHECK(events.breaks[0] == 0);
    }
    SUBCASE("a reflection that cannot land inside the disk reports the step as too large")
    {
        const LangevinModel model(capped, params(0.0, -1e6, 1.0));
        FieldState s = state_of({cplx{0.9, 0.0}});
        Stepper stepper(model, dt, DriftScheme::RungeKutta4, false);
        Rng rng = make_stream(1, 0);
        EventLog events(1);
        CHECK_THROWS_AS(stepper.step(s, rng, events), StepTooLargeError);
    }
}

TEST_CASE("time step limit from the noise-to-cap ratio")
{
    const LangevinModel model(support::three_modes(), support::three_mode_params(BoundaryPolicy::Reflect));
    // smallest cap 1/2, nu = 10, beta = 1: (0.05)^2 / 20
    CHECK(max_stable_dt(model) == doctest::Approx(1.25e-4));
    CHECK_THROWS_AS(Stepper(model, 2e-4), std::invalid_argument);
    CHECK_NOTHROW(Stepper(model, 1e-4));
}

TEST_CASE("model parameters are validated")
{
    const auto lattice = support::three_modes();
    auto p = support::three_mode_params(BoundaryPolicy::Reflect);
    p.p = 6;
    CHECK_THROWS_AS(LangevinModel(lattice, p), std::invalid_argument);
    p = support::three_mode_params(BoundaryPolicy::Reflect);
    p.beta = 0.0;
    CHECK_THROWS_AS(LangevinModel(lattice, p), std::invalid_argument);
    p = support::three_mode_params(BoundaryPolicy::Reflect);
    p.nu = {1.0, 0.0, 1.0};
    CHECK_THROWS_AS(LangevinModel(lattice, p), std::invalid_argument);
    p.nu = {1.0, 2.0};
    CHECK_THROWS_AS(LangevinModel(lattice, p), std::invalid_argument);
}

TEST_CASE("noise-free, damping-free flow conserves H and N")
{
    // RK4 drift error per unit time scales like dt^4; at dt = 1e-4 it sits far below the 1e-6 bound.
    const auto lattice = support::three_modes();
    const LangevinModel model(lattice, params(-5.0, 0.0, kNoDamping));
    const FieldState start = state_of({cplx{0.2, -0.1}, cplx{0.6, 0.3}, cplx{-0.15, 0.25}});
    const double h0 = model.hamiltonian(start.amplitudes);
    const double n0 = mass(start);

    auto drift_after = [&](double dt, std::uint64_t steps) {
        const auto result = run_trajectory(start, model, dt, steps, 1, {}, {DriftScheme::RungeKutta4, false});
        return std::pair{relative_error(model.hamiltonian(result.final_state.amplitudes), h0),
                         relative_error(mass(result.final_state), n0)};
    };
    const auto [dh, dn] = drift_after(1e-4, 10'000);
    CHECK(dh <= 1e-6);
    CHECK(dn <= 1e-6);

    // Euler grows the norm at first order; the same bound fails there by orders of magnitude.
    const auto euler = run_trajectory(start, model, 1e-4, 10'000, 1, {}, {DriftScheme::Euler, false});
    CHECK(relative_error(mass(euler.final_state), n0) > 1e-4);
}

TEST_CASE("trajectories are reproducible and confined")
{
    const auto lattice = support::three_modes();
    for (BoundaryPolicy policy : {BoundaryPolicy::Reflect, BoundaryPolicy::WaveBreak})
    {
        const LangevinModel model(lattice, support::three_mode_params(policy));
        const FieldState start = initial_state(lattice);
        std::size_t samples = 0;
        bool confined = true;
        Observer check{1, [&](const FieldState& s) {
                           ++samples;
                           for (std::size_t i = 0; i < s.amplitudes.size(); ++i)
                               confined = confined && std::abs(s.amplitudes[i]) <= lattice.caps[i];
                       }};
        const auto a = run_trajectory(start, model, 5e-5, 50'000, 9, std::span(&check, 1));
        const auto b = run_trajectory(start, model, 5e-5, 50'000, 9);
        const auto c = run_trajectory(start, model, 5e-5, 50'000, 9, {}, {}, 1);
        CHECK(samples == 50'000);
        CHECK(confined);
        CHECK(a.final_state.amplitudes == b.final_state.amplitudes);
        CHECK(a.events.reflections == b.events.reflections);
        CHECK(a.events.breaks == b.events.breaks);
        CHECK(a.final_state.amplitudes != c.final_state.amplitudes);
        CHECK(a.final_state.time == doctest::Approx(2.5));

        if (policy == BoundaryPolicy::Reflect)
        {
            CHECK(a.events.reflections[1] > 0);
            CHECK(a.events.breaks == std::vector<std::uint64_t>(3, 0));
        }
        else
        {
            CHECK(a.events.breaks[1] > 0);
            CHECK(a.events.reflections == std::vector<std::uint64_t>(3, 0));
        }
    }
}

TEST_CASE("zero steps return the initial state")
{
    const auto lattice = support::three_modes();
    const LangevinModel model(lattice, support::three_mode_params(BoundaryPolicy::Reflect));
    const FieldState start = initial_state(lattice, InitialCondition::NearCap);
    const auto result = run_trajectory(start, model, 5e-5, 0, 1);
    CHECK(result.final_state.amplitudes == start.amplitudes);
    CHECK(std::abs(start.amplitudes[1]) == doctest::Approx(0.99));
    CHECK(std::abs(start.amplitudes[0]) == doctest::Approx(0.495));
}

TEST_CASE("policy names round-trip")
{
    CHECK(policy_from_string(to_string(BoundaryPolicy::Reflect)) == BoundaryPolicy::Reflect);
    CHECK(policy_from_string(to_string(BoundaryPolicy::WaveBreak)) == BoundaryPolicy::WaveBreak);
    CHECK_THROWS_AS(policy_from_string("absorb"), std::invalid_argument);
}
