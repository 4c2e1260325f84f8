#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsnlse/lattice.hpp"

namespace tsnlse
{

using cplx = std::complex<double>;
using Rng = std::mt19937_64;

enum class BoundaryPolicy
{
    Reflect,   ///< zero-flux mirror at |a_n| = alpha_n
    WaveBreak  ///< a_n reset to 0 on reaching alpha_n
};

std::string to_string(BoundaryPolicy policy);
BoundaryPolicy policy_from_string(const std::string& text);

/// Raised when a boundary event cannot restore |a_n| <= alpha_n; the step is too large.
class StepTooLargeError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct ModelParams
{
    double lambda = 0.0;
    int p = 4;
    double beta = 1.0;
    double mu = 0.0;
    /// Damping per mode; a single entry is broadcast to every mode.
    std::vector<double> nu{1.0};
    BoundaryPolicy policy = BoundaryPolicy::Reflect;

    double nu_at(std::size_t mode) const { return nu.size() == 1 ? nu.front() : nu[mode]; }
    /// Throws std::invalid_argument on beta <= 0, nu <= 0, p != 4 or a nu table of the wrong length.
    void validate(const ModeLattice& lattice) const;
};

struct FieldState
{
    std::vector<cplx> amplitudes;
    double time = 0.0;
};

enum class InitialCondition
{
    Zero,
    NearCap  ///< |a_n| = 0.99 alpha_n, zero phase
};

FieldState initial_state(const ModeLattice& lattice, InitialCondition kind = InitialCondition::Zero,
                         double cap_fraction = 0.99);

struct EventLog
{
    std::vector<std::uint64_t> reflections;
    std::vector<std::uint64_t> breaks;
    std::vector<double> absorbed_mass;

    explicit EventLog(std::size_t modes = 0) : reflections(modes, 0), breaks(modes, 0), absorbed_mass(modes, 0.0) {}
    void merge(const EventLog& other);
};

enum class ConvolutionPath
{
    Auto,
    Direct,   ///< explicit triple sum over resonant triads
    Spectral  ///< zero-padded FFT, exact for the retained modes
};

/// Fourier coefficients c_n = sum_{n1 + n2 - n3 = n} a_{n1} a_{n2} conj(a_{n3}) of |psi|^2 psi on the
/// retained modes. Holds scratch space, so one instance must not be shared between threads.
class CubicConvolution
{
public:
    explicit CubicConvolution(const ModeLattice& lattice, ConvolutionPath path = ConvolutionPath::Auto);
    ~CubicConvolution();
    CubicConvolution(const CubicConvolution& other);
    CubicConvolution& operator=(const CubicConvolution&) = delete;

    void apply(std::span<const cplx> a, std::span<cplx> out) const;
    ConvolutionPath path() const { return path_; }

    /// Direct sum is used up to this many modes when the path is Auto.
    static constexpr std::size_t direct_limit = 64;

private:
    struct Spectral;

    std::size_t modes_;
    ConvolutionPath path_;
    // Direct path: for every target mode, the triads (i1, i2, i3) with i1 <= i2, and their multiplicity.
    std::vector<std::uint32_t> offsets_;
    std::vector<std::uint32_t> triads_;
    std::vector<double> weights_;
    std::unique_ptr<Spectral> spectral_;
};

/// Lattice, parameters and the convolution engine for one Langevin system.
class LangevinModel
{
public:
    LangevinModel(ModeLattice lattice, ModelParams params, ConvolutionPath path = ConvolutionPath::Auto);

    const ModeLattice& lattice() const { return lattice_; }
    const ModelParams& params() const { return params_; }
    std::size_t size() const { return lattice_.size(); }

    /// 1/2 sum k_n^2 |a_n|^2 + (lambda / 4) int |psi|^4 d^Dx over the torus of volume L^D.
    double hamiltonian(std::span<const cplx> a) const;
    /// Packs (dH/da_R, dH/da_I) of each mode into one complex number.
    void energy_gradient(std::span<const cplx> a, std::span<cplx> gradient) const;
    /// Deterministic Langevin drift: -i grad H - nu_n (grad H + mu a_n / 2). Pinned modes get zero drift.
    void drift(std::span<const cplx> a, std::span<cplx> out) const;

private:
    ModeLattice lattice_;
    ModelParams params_;
    CubicConvolution convolution_;
    mutable std::vector<cplx> scratch_;
};

double mass(std::span<const cplx> a);
double mass(const FieldState& state);
double hamiltonian(const FieldState& state, const ModelParams& params, const ModeLattice& lattice);
std::vector<cplx> grad_energy(const FieldState& state, const ModelParams& params, const ModeLattice& lattice);
std::vector<cplx> drift(const FieldState& state, const ModelParams& params, const ModeLattice& lattice);

enum class DriftScheme
{
    Euler,        ///< plain Euler-Maruyama
    RungeKutta4   ///< deterministic flow by classical RK4, additive noise and boundary event after
};

/// Seeds an independent generator for one trajectory from the master seed and the trajectory index.
Rng make_stream(std::uint64_t master_seed, std::uint64_t stream);

/// Largest dt allowed by the noise-to-cap ratio sqrt(2 nu / beta dt) < alpha / 10 over active finite caps.
double max_stable_dt(const LangevinModel& model);

/// Advances a state by one time step: drift, Gaussian kick sqrt(2 nu / beta dt) per component, then the
/// per-mode boundary event of the model's policy. Reusable scratch space lives inside.
class Stepper
{
public:
    Stepper(const LangevinModel& model, double dt, DriftScheme scheme = DriftScheme::RungeKutta4,
            bool noise = true);

    void step(FieldState& state, Rng& rng, EventLog& events);
    double dt() const { return dt_; }

private:
    void deterministic(std::vector<cplx>& a);

    const LangevinModel* model_;
    double dt_;
    DriftScheme scheme_;
    bool noise_;
    std::vector<double> kick_;
    std::normal_distribution<double> gauss_;
    std::vector<cplx> k1_, k2_, k3_, k4_, tmp_;
};

struct Observer
{
    std::size_t stride = 1;
    std::function<void(const FieldState&)> sample;
};

struct TrajectoryResult
{
    FieldState final_state;
    EventLog events;
};

struct TrajectoryOptions
{
    DriftScheme scheme = DriftScheme::RungeKutta4;
    bool noise = true;
};

/// Repeated Stepper::step. Observers fire after every step whose 1-based index is a multiple of their
/// stride. Identical (seed, stream, dt, n_steps, initial) give bit-identical results.
TrajectoryResult run_trajectory(const FieldState& initial, const LangevinModel& model, double dt,
                                std::uint64_t n_steps, std::uint64_t seed, std::span<const Observer> observers = {},
                                TrajectoryOptions options = {}, std::uint64_t stream = 0);

}  // namespace tsnlse
