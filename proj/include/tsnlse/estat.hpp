#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tsnlse/dynamics.hpp"
#include "tsnlse/lattice.hpp"

namespace tsnlse
{

/// Histogram bin width in units of beta^{1/2} |a_n|.
inline constexpr double kRadialBinWidth = 5e-3;

/// Raised when the doubling-window burn-in check never settles within the budget.
class NonStationaryError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the Metropolis proposal scale cannot be tuned into an acceptable acceptance window.
class TuningError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Normalized histogram of beta^{1/2} |a_n| on bins [m w, (m + 1) w).
struct RadialHistogram
{
    double bin_width = kRadialBinWidth;
    std::vector<double> mass;

    std::size_t bins() const { return mass.size(); }
    double left(std::size_t bin) const { return bin * bin_width; }
    double right(std::size_t bin) const { return (bin + 1) * bin_width; }
};

struct ModeEstimate
{
    RadialHistogram histogram;
    double mean_r2 = 0.0;  ///< <|a_n|^2>
    double mean_r4 = 0.0;  ///< <|a_n|^4>
    double stderr_r2 = 0.0;
    double stderr_r4 = 0.0;
};

struct StationaryEstimate
{
    std::vector<ModeEstimate> modes;
    std::uint64_t samples = 0;  ///< post-burn-in samples per mode
    double burn_in_time = 0.0;
    double dt = 0.0;
    double sqrt_beta = 1.0;
    std::size_t batches = 0;
    EventLog events;
    double simulated_time = 0.0;
};

/// Number of bins covering [0, beta^{1/2} alpha]; a single bin for pinned modes.
std::size_t radial_bin_count(double scaled_cap, double bin_width = kRadialBinWidth);

/// Per-block sample statistics. Blocks are consecutive, equal-length stretches of the sample sequence;
/// they serve both as burn-in windows and as batches for batch-means standard errors.
class BlockedSampler
{
public:
    BlockedSampler(const ModeLattice& lattice, double beta, std::size_t blocks, std::uint64_t samples_per_block,
                   double bin_width = kRadialBinWidth);

    void add(const FieldState& state);
    /// Sums block by block; both samplers must share the layout.
    void merge(const BlockedSampler& other);

    std::size_t blocks() const { return blocks_.size(); }
    std::size_t modes() const { return bins_.size(); }
    std::uint64_t samples_in(std::size_t block) const { return blocks_[block].count; }

    /// Smallest power-of-two block index b such that the windows [b, 2b) and [2b, 4b) agree within
    /// `tolerance` in total variation, compared on histograms re-binned to `coarse_bins` per mode.
    std::size_t select_burn_in(double tolerance = 0.02, std::size_t coarse_bins = 20) const;

    /// Estimate from blocks [first_block, blocks()).
    StationaryEstimate estimate(std::size_t first_block) const;

    /// Coarse histograms of one window, used by the burn-in rule and convergence diagnostics.
    std::vector<std::vector<double>> window_histograms(std::size_t begin, std::size_t end,
                                                       std::size_t coarse_bins) const;

private:
    struct Block
    {
        std::vector<std::vector<std::uint64_t>> counts;
        std::vector<double> sum_r2;
        std::vector<double> sum_r4;
        std::uint64_t count = 0;
    };

    double sqrt_beta_;
    double bin_width_;
    std::uint64_t per_block_;
    std::uint64_t added_ = 0;
    std::vector<std::size_t> bins_;
    std::vector<Block> blocks_;
};

struct SamplingBudget
{
    std::uint64_t n_steps = 0;  ///< steps per trajectory
    std::uint64_t stride = 10;  ///< steps between samples
    unsigned trajectories = 1;
    unsigned threads = 1;
    std::size_t blocks = 64;
    InitialCondition initial = InitialCondition::Zero;
    DriftScheme scheme = DriftScheme::RungeKutta4;
    double burn_in_tolerance = 0.02;
};

/// Runs the Langevin system, discards the automatically selected burn-in and estimates the stationary
/// radial distributions. Throws NonStationaryError if no burn-in passes the doubling check and
/// std::invalid_argument if the budget yields no samples.
StationaryEstimate estimate_stationary(const LangevinModel& model, double dt, std::uint64_t seed,
                                       const SamplingBudget& budget);

struct OracleOptions
{
    std::uint64_t thin = 5;  ///< sweeps between recorded samples
    std::uint64_t tuning_sweeps = 500;
    std::size_t max_tuning_rounds = 200;
    std::uint64_t burn_in_sweeps = 5000;
    std::size_t blocks = 64;
};

/// Single-site random-walk Metropolis sampler of exp(-beta [H + mu N]) on the cap polydisc. Per-mode
/// proposal scales are tuned to 20-40% acceptance before sampling. Reflect policy only.
StationaryEstimate gibbs_oracle(const LangevinModel& model, std::uint64_t seed, std::uint64_t n_samples,
                                const OracleOptions& options = {});

/// 1/2 sum |p_i - q_i| between the histograms of one mode. Throws std::invalid_argument on binning mismatch.
double tv_distance(const StationaryEstimate& e1, const StationaryEstimate& e2, std::size_t mode);
double tv_distance(const RadialHistogram& p, const RadialHistogram& q);

struct ConvergenceCurve
{
    std::vector<double> times;
    /// Largest per-mode TV distance between the two ensembles at each time.
    std::vector<double> tv;
};

/// Two ensembles of `trajectories` runs each, one started at a = 0 and one at 0.99 of the caps, compared on
/// cap-relative radial histograms with `coarse_bins` bins every `sample_stride` steps.
ConvergenceCurve ensemble_convergence(const LangevinModel& model, double dt, std::uint64_t seed,
                                      unsigned trajectories, std::uint64_t sample_stride, std::size_t samples,
                                      std::size_t coarse_bins = 10, unsigned threads = 1);

struct DecayFit
{
    double slope = 0.0;  ///< d ln TV / dt
    double r2 = 0.0;
    double floor = 0.0;  ///< median TV over the last third of the curve
    std::size_t points = 0;
};

/// Least-squares line through ln TV over the points between 0.9 and 3x the noise floor.
DecayFit fit_exponential_decay(const ConvergenceCurve& curve);

}  // namespace tsnlse
