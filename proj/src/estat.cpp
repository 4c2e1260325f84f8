#include "tsnlse/estat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace tsnlse
{

std::size_t radial_bin_count(double scaled_cap, double bin_width)
{
    if (!std::isfinite(scaled_cap)) throw std::invalid_argument("radial histograms need finite caps");
    if (scaled_cap <= 0.0) return 1;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(scaled_cap / bin_width - 1e-9)));
}

BlockedSampler::BlockedSampler(const ModeLattice& lattice, double beta, std::size_t blocks,
                               std::uint64_t samples_per_block, double bin_width)
    : sqrt_beta_(std::sqrt(beta)), bin_width_(bin_width), per_block_(samples_per_block)
{
    if (blocks == 0 || samples_per_block == 0)
        throw std::invalid_argument("sampling budget too small: histograms would be empty");
    for (std::size_t i = 0; i < lattice.size(); ++i)
        bins_.push_back(lattice.is_active(i) ? radial_bin_count(sqrt_beta_ * lattice.caps[i], bin_width) : 1);
    Block empty;
    for (std::size_t b : bins_) empty.counts.emplace_back(b, 0);
    empty.sum_r2.assign(bins_.size(), 0.0);
    empty.sum_r4.assign(bins_.size(), 0.0);
    blocks_.assign(blocks, empty);
}

void BlockedSampler::add(const FieldState& state)
{
    const std::uint64_t index = added_ / per_block_;
    ++added_;
    if (index >= blocks_.size()) return;
    Block& block = blocks_[index];
    for (std::size_t i = 0; i < bins_.size(); ++i)
    {
        const double r2 = std::norm(state.amplitudes[i]);
        const double scaled = std::sqrt(r2) * sqrt_beta_;
        const auto bin = std::min<std::size_t>(static_cast<std::size_t>(scaled / bin_width_), bins_[i] - 1);
        ++block.counts[i][bin];
        block.sum_r2[i] += r2;
        block.sum_r4[i] += r2 * r2;
    }
    ++block.count;
}

void BlockedSampler::merge(const BlockedSampler& other)
{
    if (other.bins_ != bins_ || other.blocks_.size() != blocks_.size())
        throw std::invalid_argument("cannot merge samplers with different layouts");
    for (std::size_t b = 0; b < blocks_.size(); ++b)
    {
        Block& mine = blocks_[b];
        const Block& theirs = other.blocks_[b];
        for (std::size_t i = 0; i < bins_.size(); ++i)
        {
            for (std::size_t j = 0; j < bins_[i]; ++j) mine.counts[i][j] += theirs.counts[i][j];
            mine.sum_r2[i] += theirs.sum_r2[i];
            mine.sum_r4[i] += theirs.sum_r4[i];
        }
        mine.count += theirs.count;
    }
    added_ += other.added_;
}

std::vector<std::vector<double>> BlockedSampler::window_histograms(std::size_t begin, std::size_t end,
                                                                   std::size_t coarse_bins) const
{
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < bins_.size(); ++i)
    {
        const std::size_t nb = std::min(coarse_bins, bins_[i]);
        std::vector<double> h(nb, 0.0);
        double total = 0.0;
        for (std::size_t b = begin; b < end; ++b)
            for (std::size_t j = 0; j < bins_[i]; ++j)
            {
                const double c = static_cast<double>(blocks_[b].counts[i][j]);
                h[j * nb / bins_[i]] += c;
                total += c;
            }
        if (total > 0.0)
            for (double& v : h) v /= total;
        out.push_back(std::move(h));
    }
    return out;
}

std::size_t BlockedSampler::select_burn_in(double tolerance, std::size_t coarse_bins) const
{
    const std::size_t nb = blocks_.size();
    for (std::size_t b = 1; 4 * b <= nb; b *= 2)
    {
        const auto early = window_histograms(b, 2 * b, coarse_bins);
        const auto late = window_histograms(2 * b, 4 * b, coarse_bins);
        double worst = 0.0;
        for (std::size_t i = 0; i < early.size(); ++i)
        {
            double tv = 0.0;
            for (std::size_t j = 0; j < early[i].size(); ++j) tv += std::abs(early[i][j] - late[i][j]);
            worst = std::max(worst, 0.5 * tv);
        }
        if (worst < tolerance) return b;
    }
    throw NonStationaryError("no burn-in passes the doubling-window check within the sampling budget");
}

StationaryEstimate BlockedSampler::estimate(std::size_t first_block) const
{
    if (first_block >= blocks_.size()) throw std::invalid_argument("burn-in covers every block");
    StationaryEstimate est;
    est.sqrt_beta = sqrt_beta_;
    est.batches = blocks_.size() - first_block;
    std::uint64_t total = 0;
    for (std::size_t b = first_block; b < blocks_.size(); ++b) total += blocks_[b].count;
    if (total == 0) throw std::invalid_argument("sampling budget too small: histograms would be empty");
    est.samples = total;

    for (std::size_t i = 0; i < bins_.size(); ++i)
    {
        ModeEstimate mode;
        mode.histogram.bin_width = bin_width_;
        mode.histogram.mass.assign(bins_[i], 0.0);
        double s2 = 0.0;
        double s4 = 0.0;
        std::vector<double> batch2;
        std::vector<double> batch4;
        for (std::size_t b = first_block; b < blocks_.size(); ++b)
        {
            const Block& block = blocks_[b];
            for (std::size_t j = 0; j < bins_[i]; ++j) mode.histogram.mass[j] += static_cast<double>(block.counts[i][j]);
            s2 += block.sum_r2[i];
            s4 += block.sum_r4[i];
            if (block.count > 0)
            {
                batch2.push_back(block.sum_r2[i] / static_cast<double>(block.count));
                batch4.push_back(block.sum_r4[i] / static_cast<double>(block.count));
            }
        }
        for (double& m : mode.histogram.mass) m /= static_cast<double>(total);
        mode.mean_r2 = s2 / static_cast<double>(total);
        mode.mean_r4 = s4 / static_cast<double>(total);
        auto standard_error = [](const std::vector<double>& xs) {
            const double n = static_cast<double>(xs.size());
            if (xs.size() < 2) return 0.0;
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= n;
            double var = 0.0;
            for (double x : xs) var += (x - mean) * (x - mean);
            return std::sqrt(var / (n - 1.0) / n);
        };
        mode.stderr_r2 = standard_error(batch2);
        mode.stderr_r4 = standard_error(batch4);
        est.modes.push_back(std::move(mode));
    }
    return est;
}

// ---------------------------------------------------------------------------------------------------------------

StationaryEstimate estimate_stationary(const LangevinModel& model, double dt, std::uint64_t seed,
                                       const SamplingBudget& budget)
{
    if (budget.stride == 0 || budget.trajectories == 0 || budget.blocks < 4)
        throw std::invalid_argument("sampling budget needs stride > 0, trajectories > 0 and at least 4 blocks");
    const std::uint64_t samples = budget.n_steps / budget.stride;
    const std::uint64_t per_block = samples / budget.blocks;
    if (per_block == 0)
        throw std::invalid_argument("sampling budget too small: histograms would be empty (n_steps / stride < blocks)");

    const double beta = model.params().beta;
    const FieldState start = initial_state(model.lattice(), budget.initial);
    std::vector<BlockedSampler> samplers(budget.trajectories,
                                         BlockedSampler(model.lattice(), beta, budget.blocks, per_block));
    std::vector<EventLog> logs(budget.trajectories);

    std::atomic<unsigned> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        const LangevinModel local(model);
        for (unsigned t = next++; t < budget.trajectories; t = next++)
        {
            try
            {
                BlockedSampler& sampler = samplers[t];
                const Observer obs{budget.stride, [&sampler](const FieldState& s) { sampler.add(s); }};
                TrajectoryOptions options;
                options.scheme = budget.scheme;
                auto result = run_trajectory(start, local, dt, budget.n_steps, seed, std::span(&obs, 1), options, t);
                logs[t] = std::move(result.events);
            }
            catch (...)
            {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min(budget.threads, budget.trajectories));
    if (threads == 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    // merge in trajectory order so the result does not depend on scheduling
    BlockedSampler merged = samplers.front();
    EventLog events = logs.front();
    for (unsigned t = 1; t < budget.trajectories; ++t)
    {
        merged.merge(samplers[t]);
        events.merge(logs[t]);
    }
    const std::size_t first = merged.select_burn_in(budget.burn_in_tolerance);
    StationaryEstimate est = merged.estimate(first);
    est.dt = dt;
    est.burn_in_time = static_cast<double>(first * per_block * budget.stride) * dt;
    est.events = std::move(events);
    est.simulated_time = static_cast<double>(budget.n_steps) * dt * budget.trajectories;
    return est;
}

// ---------------------------------------------------------------------------------------------------------------

StationaryEstimate gibbs_oracle(const LangevinModel& model, std::uint64_t seed, std::uint64_t n_samples,
                                const OracleOptions& options)
{
    if (model.params().policy != BoundaryPolicy::Reflect)
        throw std::invalid_argument("the Gibbs oracle applies to the reflecting policy only");
    if (options.thin == 0) throw std::invalid_argument("oracle thinning must be > 0");
    const auto& lattice = model.lattice();
    const auto& params = model.params();
    const std::size_t n = lattice.size();
    const double beta = params.beta;

    BlockedSampler sampler(lattice, beta, options.blocks, n_samples / options.blocks);

    Rng rng = make_stream(seed, 0xfeedULL);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> uniform;

    std::vector<cplx> a(n, cplx{});
    auto energy = [&](const std::vector<cplx>& x) { return beta * (model.hamiltonian(x) + params.mu * mass(x)); };
    double current = energy(a);

    std::vector<double> scale(n, 0.0);
    std::vector<double> max_scale(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
    {
        if (!lattice.is_active(i)) continue;
        const double thermal = 1.0 / std::sqrt(beta);
        const double cap = lattice.caps[i];
        scale[i] = 0.5 * (std::isfinite(cap) ? std::min(cap, thermal) : thermal);
        max_scale[i] = std::isfinite(cap) ? 2.0 * cap : 10.0 * thermal;
    }
    std::vector<std::uint64_t> accepted(n, 0);
    std::vector<std::uint64_t> proposed(n, 0);

    auto sweep = [&] {
        for (std::size_t i = 0; i < n; ++i)
        {
            if (!lattice.is_active(i)) continue;
            const cplx old = a[i];
            const cplx trial = old + scale[i] * cplx{gauss(rng), gauss(rng)};
            ++proposed[i];
            if (!(std::abs(trial) < lattice.caps[i])) continue;
            a[i] = trial;
            const double proposal = energy(a);
            if (std::log(uniform(rng)) < current - proposal)
            {
                current = proposal;
                ++accepted[i];
            }
            else
            {
                a[i] = old;
            }
        }
    };

    std::vector<double> rate(n, 0.0);
    bool tuned = false;
    for (std::size_t round = 0; round < options.max_tuning_rounds && !tuned; ++round)
    {
        std::fill(accepted.begin(), accepted.end(), 0);
        std::fill(proposed.begin(), proposed.end(), 0);
        for (std::uint64_t s = 0; s < options.tuning_sweeps; ++s) sweep();
        tuned = true;
        for (std::size_t i = 0; i < n; ++i)
        {
            if (!lattice.is_active(i)) continue;
            rate[i] = static_cast<double>(accepted[i]) / static_cast<double>(proposed[i]);
            if (rate[i] < 0.2)
            {
                scale[i] *= 0.7;
                tuned = false;
            }
            else if (rate[i] > 0.4 && scale[i] < max_scale[i])
            {
                scale[i] = std::min(1.4 * scale[i], max_scale[i]);
                tuned = false;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (lattice.is_active(i) && (rate[i] < 0.05 || rate[i] > 0.8))
            throw TuningError("Metropolis acceptance could not be tuned into [0.05, 0.8]");

    for (std::uint64_t s = 0; s < options.burn_in_sweeps; ++s) sweep();
    FieldState state;
    for (std::uint64_t k = 0; k < n_samples; ++k)
    {
        for (std::uint64_t s = 0; s < options.thin; ++s) sweep();
        state.amplitudes = a;
        sampler.add(state);
    }
    StationaryEstimate est = sampler.estimate(0);
    est.events = EventLog(n);
    return est;
}

ConvergenceCurve ensemble_convergence(const LangevinModel& model, double dt, std::uint64_t seed,
                                      unsigned trajectories, std::uint64_t sample_stride, std::size_t samples,
                                      std::size_t coarse_bins, unsigned threads)
{
    const auto& lattice = model.lattice();
    const std::size_t n = lattice.size();
    if (trajectories == 0 || sample_stride == 0 || samples == 0 || coarse_bins == 0)
        throw std::invalid_argument("ensemble convergence needs trajectories, stride, samples and bins > 0");
    for (std::size_t i = 0; i < n; ++i)
        if (lattice.is_active(i) && !std::isfinite(lattice.caps[i]))
            throw std::invalid_argument("ensemble convergence needs finite caps");

    // counts[ensemble][sample][mode * coarse_bins + bin]; integer counts keep the result thread-independent
    using Counts = std::vector<std::vector<std::uint64_t>>;
    std::vector<Counts> counts(2, Counts(samples, std::vector<std::uint64_t>(n * coarse_bins, 0)));
    std::mutex merge_mutex;
    std::atomic<unsigned> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
        const LangevinModel local(model);
        Counts mine(samples, std::vector<std::uint64_t>(n * coarse_bins, 0));
        for (unsigned job = next++; job < 2 * trajectories; job = next++)
        {
            const unsigned ensemble = job / trajectories;
            std::size_t index = 0;
            for (auto& row : mine) std::fill(row.begin(), row.end(), 0);
            const Observer obs{sample_stride, [&](const FieldState& s) {
                                   for (std::size_t i = 0; i < n; ++i)
                                   {
                                       const double frac = lattice.is_active(i) ? std::abs(s.amplitudes[i]) / lattice.caps[i] : 0.0;
                                       const auto bin = std::min<std::size_t>(static_cast<std::size_t>(frac * coarse_bins),
                                                                              coarse_bins - 1);
                                       ++mine[index][i * coarse_bins + bin];
                                   }
                                   ++index;
                               }};
            try
            {
                const FieldState start =
                    initial_state(lattice, ensemble == 0 ? InitialCondition::Zero : InitialCondition::NearCap);
                run_trajectory(start, local, dt, sample_stride * samples, seed, std::span(&obs, 1), {}, job);
            }
            catch (...)
            {
                std::lock_guard lock(merge_mutex);
                if (!failure) failure = std::current_exception();
                continue;
            }
            std::lock_guard lock(merge_mutex);
            for (std::size_t j = 0; j < samples; ++j)
                for (std::size_t b = 0; b < n * coarse_bins; ++b) counts[ensemble][j][b] += mine[j][b];
        }
    };
    if (threads <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    ConvergenceCurve curve;
    for (std::size_t j = 0; j < samples; ++j)
    {
        curve.times.push_back(static_cast<double>((j + 1) * sample_stride) * dt);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            if (!lattice.is_active(i)) continue;
            double tv = 0.0;
            for (std::size_t b = 0; b < coarse_bins; ++b)
                tv += std::abs(static_cast<double>(counts[0][j][i * coarse_bins + b]) -
                               static_cast<double>(counts[1][j][i * coarse_bins + b]));
            worst = std::max(worst, 0.5 * tv / trajectories);
        }
        curve.tv.push_back(worst);
    }
    return curve;
}

DecayFit fit_exponential_decay(const ConvergenceCurve& curve)
{
    DecayFit fit;
    const std::size_t n = curve.tv.size();
    if (n < 6) throw std::invalid_argument("decay fit needs at least six points");
    std::vector<double> tail(curve.tv.end() - static_cast<std::ptrdiff_t>(n / 3), curve.tv.end());
    std::nth_element(tail.begin(), tail.begin() + tail.size() / 2, tail.end());
    fit.floor = tail[tail.size() / 2];

    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t j = 0; j < n; ++j)
    {
        if (curve.tv[j] > 0.9) continue;
        if (curve.tv[j] <= 3.0 * fit.floor) break;
        xs.push_back(curve.times[j]);
        ys.push_back(std::log(curve.tv[j]));
    }
    fit.points = xs.size();
    if (fit.points < 3) return fit;
    const double m = static_cast<double>(fit.points);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 0.0;
    return fit;
}

double tv_distance(const RadialHistogram& p, const RadialHistogram& q)
{
    if (p.bins() != q.bins() || std::abs(p.bin_width - q.bin_width) > 1e-15)
        throw std::invalid_argument("tv_distance: histograms use different binnings");
    double s = 0.0;
    for (std::size_t i = 0; i < p.bins(); ++i) s += std::abs(p.mass[i] - q.mass[i]);
    return 0.5 * s;
}

double tv_distance(const StationaryEstimate& e1, const StationaryEstimate& e2, std::size_t mode)
{
    if (mode >= e1.modes.size() || mode >= e2.modes.size()) throw std::out_of_range("tv_distance: no such mode");
    return tv_distance(e1.modes[mode].histogram, e2.modes[mode].histogram);
}

}  // namespace tsnlse
