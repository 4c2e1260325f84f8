#include "tsnlse/dynamics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace tsnlse
{

namespace
{

std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

std::uint64_t splitmix64(std::uint64_t& x)
{
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::string to_string(BoundaryPolicy policy)
{
    return policy == BoundaryPolicy::Reflect ? "reflect" : "wavebreak";
}

BoundaryPolicy policy_from_string(const std::string& text)
{
    if (text == "reflect") return BoundaryPolicy::Reflect;
    if (text == "wavebreak") return BoundaryPolicy::WaveBreak;
    throw std::invalid_argument("unknown boundary policy '" + text + "' (expected reflect or wavebreak)");
}

void ModelParams::validate(const ModeLattice& lattice) const
{
    if (p != 4) throw std::invalid_argument("only the quartic nonlinearity p = 4 is supported");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be > 0");
    if (!std::isfinite(lambda) || !std::isfinite(mu)) throw std::invalid_argument("lambda and mu must be finite");
    if (nu.empty() || (nu.size() != 1 && nu.size() != lattice.size()))
        throw std::invalid_argument("nu needs one entry or one entry per mode");
    for (double v : nu)
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("every damping nu_n must be > 0");
}

FieldState initial_state(const ModeLattice& lattice, InitialCondition kind, double cap_fraction)
{
    FieldState state;
    state.amplitudes.assign(lattice.size(), cplx{});
    if (kind == InitialCondition::NearCap)
    {
        for (std::size_t i = 0; i < lattice.size(); ++i)
        {
            if (!lattice.is_active(i)) continue;
            if (!std::isfinite(lattice.caps[i]))
                throw std::invalid_argument("near-cap initial condition needs finite caps on active modes");
            state.amplitudes[i] = cap_fraction * lattice.caps[i];
        }
    }
    return state;
}

void EventLog::merge(const EventLog& other)
{
    if (reflections.empty())
    {
        *this = other;
        return;
    }
    for (std::size_t i = 0; i < reflections.size(); ++i)
    {
        reflections[i] += other.reflections[i];
        breaks[i] += other.breaks[i];
        absorbed_mass[i] += other.absorbed_mass[i];
    }
}

// ---------------------------------------------------------------------------------------------------------------

struct CubicConvolution::Spectral
{
    int rank = 1;
    int extent = 0;
    std::size_t points = 0;
    std::vector<std::size_t> positions;
    fftw_complex* spectrum = nullptr;
    fftw_complex* grid = nullptr;
    fftw_plan to_grid = nullptr;
    fftw_plan to_spectrum = nullptr;

    Spectral(int rank_, int extent_, std::vector<std::size_t> positions_)
        : rank(rank_), extent(extent_), positions(std::move(positions_))
    {
        points = 1;
        for (int d = 0; d < rank; ++d) points *= static_cast<std::size_t>(extent);
        spectrum = fftw_alloc_complex(points);
        grid = fftw_alloc_complex(points);
        std::vector<int> dims(rank, extent);
        std::lock_guard lock(fftw_planner_mutex());
        to_grid = fftw_plan_dft(rank, dims.data(), spectrum, grid, FFTW_BACKWARD, FFTW_ESTIMATE);
        to_spectrum = fftw_plan_dft(rank, dims.data(), grid, spectrum, FFTW_FORWARD, FFTW_ESTIMATE);
    }

    ~Spectral()
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(to_grid);
        fftw_destroy_plan(to_spectrum);
        fftw_free(spectrum);
        fftw_free(grid);
    }

    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;
};

CubicConvolution::CubicConvolution(const ModeLattice& lattice, ConvolutionPath path)
    : modes_(lattice.size()), path_(path)
{
    if (path_ == ConvolutionPath::Auto)
        path_ = lattice.size() <= direct_limit ? ConvolutionPath::Direct : ConvolutionPath::Spectral;

    if (path_ == ConvolutionPath::Direct)
    {
        const std::size_t n = lattice.size();
        std::vector<std::vector<std::uint32_t>> per_target(n);
        std::vector<std::vector<double>> per_weight(n);
        for (std::size_t i1 = 0; i1 < n; ++i1)
            for (std::size_t i2 = i1; i2 < n; ++i2)
                for (std::size_t t = 0; t < n; ++t)
                {
                    ModeIndex n3{};
                    for (int d = 0; d < 3; ++d)
                        n3[d] = lattice.modes[i1][d] + lattice.modes[i2][d] - lattice.modes[t][d];
                    const auto i3 = lattice.find(n3);
                    if (i3 < 0) continue;
                    per_target[t].insert(per_target[t].end(), {static_cast<std::uint32_t>(i1),
                                                               static_cast<std::uint32_t>(i2),
                                                               static_cast<std::uint32_t>(i3)});
                    per_weight[t].push_back(i1 == i2 ? 1.0 : 2.0);
                }
        offsets_.push_back(0);
        for (std::size_t t = 0; t < n; ++t)
        {
            triads_.insert(triads_.end(), per_target[t].begin(), per_target[t].end());
            weights_.insert(weights_.end(), per_weight[t].begin(), per_weight[t].end());
            offsets_.push_back(static_cast<std::uint32_t>(weights_.size()));
        }
        return;
    }

    // |psi|^2 psi carries wavenumbers up to 3E; a grid of 4E + 2 points keeps every alias off the retained modes.
    const int extent = 4 * lattice.max_component() + 2;
    std::vector<std::size_t> positions;
    for (const auto& n : lattice.modes)
    {
        std::size_t pos = 0;
        for (int d = 0; d < lattice.dimension; ++d)
        {
            const int wrapped = ((n[d] % extent) + extent) % extent;
            pos = pos * extent + static_cast<std::size_t>(wrapped);
        }
        positions.push_back(pos);
    }
    spectral_ = std::make_unique<Spectral>(lattice.dimension, extent, std::move(positions));
}

CubicConvolution::~CubicConvolution() = default;

CubicConvolution::CubicConvolution(const CubicConvolution& other)
    : modes_(other.modes_), path_(other.path_), offsets_(other.offsets_), triads_(other.triads_),
      weights_(other.weights_)
{
    if (other.spectral_)
        spectral_ = std::make_unique<Spectral>(other.spectral_->rank, other.spectral_->extent,
                                               other.spectral_->positions);
}

void CubicConvolution::apply(std::span<const cplx> a, std::span<cplx> out) const
{
    if (path_ == ConvolutionPath::Direct)
    {
        for (std::size_t t = 0; t < modes_; ++t)
        {
            cplx acc{};
            for (std::uint32_t j = offsets_[t]; j < offsets_[t + 1]; ++j)
            {
                const std::uint32_t* tri = &triads_[3 * j];
                acc += weights_[j] * a[tri[0]] * a[tri[1]] * std::conj(a[tri[2]]);
            }
            out[t] = acc;
        }
        return;
    }

    Spectral& s = *spectral_;
    std::fill_n(&s.spectrum[0][0], 2 * s.points, 0.0);
    for (std::size_t i = 0; i < modes_; ++i)
    {
        s.spectrum[s.positions[i]][0] = a[i].real();
        s.spectrum[s.positions[i]][1] = a[i].imag();
    }
    fftw_execute(s.to_grid);
    for (std::size_t j = 0; j < s.points; ++j)
    {
        const double re = s.grid[j][0];
        const double im = s.grid[j][1];
        const double intensity = re * re + im * im;
        s.grid[j][0] = intensity * re;
        s.grid[j][1] = intensity * im;
    }
    fftw_execute(s.to_spectrum);
    const double norm = 1.0 / static_cast<double>(s.points);
    for (std::size_t i = 0; i < modes_; ++i)
        out[i] = cplx{s.spectrum[s.positions[i]][0], s.spectrum[s.positions[i]][1]} * norm;
}

// ---------------------------------------------------------------------------------------------------------------

LangevinModel::LangevinModel(ModeLattice lattice, ModelParams params, ConvolutionPath path)
    : lattice_(std::move(lattice)), params_(std::move(params)), convolution_(lattice_, path),
      scratch_(lattice_.size())
{
    params_.validate(lattice_);
}

double LangevinModel::hamiltonian(std::span<const cplx> a) const
{
    double kinetic = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) kinetic += lattice_.k_norm[i] * lattice_.k_norm[i] * std::norm(a[i]);
    if (params_.lambda == 0.0) return 0.5 * kinetic;
    convolution_.apply(a, scratch_);
    // int |psi|^4 = V sum_n conj(a_n) c_n, exact since psi only carries retained modes
    double quartic = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) quartic += (std::conj(a[i]) * scratch_[i]).real();
    return 0.5 * kinetic + 0.25 * params_.lambda * lattice_.volume() * quartic;
}

void LangevinModel::energy_gradient(std::span<const cplx> a, std::span<cplx> gradient) const
{
    if (params_.lambda != 0.0)
    {
        convolution_.apply(a, gradient);
        const double scale = params_.lambda * lattice_.volume();
        for (auto& g : gradient) g *= scale;
    }
    else
    {
        std::fill(gradient.begin(), gradient.end(), cplx{});
    }
    for (std::size_t i = 0; i < a.size(); ++i) gradient[i] += lattice_.k_norm[i] * lattice_.k_norm[i] * a[i];
}

void LangevinModel::drift(std::span<const cplx> a, std::span<cplx> out) const
{
    energy_gradient(a, out);
    const cplx minus_i{0.0, -1.0};
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        if (lattice_.pinned[i])
        {
            out[i] = 0.0;
            continue;
        }
        const cplx g = out[i];
        out[i] = minus_i * g - params_.nu_at(i) * (g + 0.5 * params_.mu * a[i]);
    }
}

double mass(std::span<const cplx> a)
{
    double s = 0.0;
    for (const auto& v : a) s += std::norm(v);
    return 0.25 * s;
}

double mass(const FieldState& state)
{
    return mass(std::span<const cplx>(state.amplitudes));
}

double hamiltonian(const FieldState& state, const ModelParams& params, const ModeLattice& lattice)
{
    return LangevinModel(lattice, params).hamiltonian(state.amplitudes);
}

std::vector<cplx> grad_energy(const FieldState& state, const ModelParams& params, const ModeLattice& lattice)
{
    std::vector<cplx> g(lattice.size());
    LangevinModel(lattice, params).energy_gradient(state.amplitudes, g);
    return g;
}

std::vector<cplx> drift(const FieldState& state, const ModelParams& params, const ModeLattice& lattice)
{
    std::vector<cplx> g(lattice.size());
    LangevinModel(lattice, params).drift(state.amplitudes, g);
    return g;
}

// ---------------------------------------------------------------------------------------------------------------

Rng make_stream(std::uint64_t master_seed, std::uint64_t stream)
{
    std::uint64_t x = master_seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(x)), static_cast<std::uint32_t>(splitmix64(x)),
                      static_cast<std::uint32_t>(splitmix64(x)), static_cast<std::uint32_t>(splitmix64(x))};
    return Rng(seq);
}

double max_stable_dt(const LangevinModel& model)
{
    const auto& lattice = model.lattice();
    double limit = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lattice.size(); ++i)
    {
        if (!lattice.is_active(i) || !std::isfinite(lattice.caps[i])) continue;
        const double amp = lattice.caps[i] / 10.0;
        limit = std::min(limit, amp * amp * model.params().beta / (2.0 * model.params().nu_at(i)));
    }
    return limit;
}

Stepper::Stepper(const LangevinModel& model, double dt, DriftScheme scheme, bool noise)
    : model_(&model), dt_(dt), scheme_(scheme), noise_(noise), kick_(model.size(), 0.0)
{
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be > 0");
    if (noise_ && !(dt < max_stable_dt(model)))
        throw std::invalid_argument("time step too large: need sqrt(2 nu dt / beta) < alpha / 10 on every mode");
    const auto& params = model.params();
    for (std::size_t i = 0; i < model.size(); ++i)
        kick_[i] = model.lattice().is_active(i) ? std::sqrt(2.0 * params.nu_at(i) / params.beta * dt) : 0.0;
    const std::size_t n = model.size();
    k1_.resize(n);
    k2_.resize(n);
    k3_.resize(n);
    k4_.resize(n);
    tmp_.resize(n);
}

void Stepper::deterministic(std::vector<cplx>& a)
{
    const std::size_t n = a.size();
    if (scheme_ == DriftScheme::Euler)
    {
        model_->drift(a, k1_);
        for (std::size_t i = 0; i < n; ++i) a[i] += dt_ * k1_[i];
        return;
    }
    const double h = dt_;
    model_->drift(a, k1_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = a[i] + 0.5 * h * k1_[i];
    model_->drift(tmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = a[i] + 0.5 * h * k2_[i];
    model_->drift(tmp_, k3_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = a[i] + h * k3_[i];
    model_->drift(tmp_, k4_);
    for (std::size_t i = 0; i < n; ++i) a[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
}

void Stepper::step(FieldState& state, Rng& rng, EventLog& events)
{
    auto& a = state.amplitudes;
    deterministic(a);
    const auto& lattice = model_->lattice();
    const bool reflect = model_->params().policy == BoundaryPolicy::Reflect;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        if (lattice.pinned[i])
        {
            a[i] = 0.0;
            continue;
        }
        if (noise_)
        {
            const double re = gauss_(rng);
            const double im = gauss_(rng);
            a[i] += kick_[i] * cplx{re, im};
        }
        const double cap = lattice.caps[i];
        const double r = std::abs(a[i]);
        if (reflect)
        {
            if (r > cap)
            {
                const double mirrored = 2.0 * cap - r;
                if (mirrored < 0.0)
                    throw StepTooLargeError("reflected radius left the disk; reduce the time step");
                a[i] *= mirrored / r;
                ++events.reflections[i];
            }
        }
        else if (r >= cap)
        {
            events.absorbed_mass[i] += r * r;
            ++events.breaks[i];
            a[i] = 0.0;
        }
    }
    state.time += dt_;
}

TrajectoryResult run_trajectory(const FieldState& initial, const LangevinModel& model, double dt,
                                std::uint64_t n_steps, std::uint64_t seed, std::span<const Observer> observers,
                                TrajectoryOptions options, std::uint64_t stream)
{
    if (initial.amplitudes.size() != model.size())
        throw std::invalid_argument("initial state does not match the lattice");
    TrajectoryResult result{initial, EventLog(model.size())};
    if (n_steps == 0) return result;
    Stepper stepper(model, dt, options.scheme, options.noise);
    Rng rng = make_stream(seed, stream);
    for (std::uint64_t s = 1; s <= n_steps; ++s)
    {
        stepper.step(result.final_state, rng, result.events);
        for (const auto& obs : observers)
            if (obs.stride > 0 && s % obs.stride == 0) obs.sample(result.final_state);
    }
    return result;
}

}  // namespace tsnlse
