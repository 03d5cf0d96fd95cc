// Monte-Carlo lifetime and reliability at a given stress.
//
// Each path q draws its own drift a_q ~ N(mu_a, sigma_a^2) and an independent
// standard FBM, both from the substream (master_seed, q). Paths are split
// into contiguous blocks across worker threads and gathered by index, so the
// result does not depend on the worker count.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "fbmadt/adt_model.hpp"
#include "fbmadt/errors.hpp"
#include "fbmadt/fgn_fbm.hpp"
#include "fbmadt/random.hpp"

namespace fbmadt {

struct McConfig {
    std::size_t n_paths = 10000;
    TimeGrid grid;                 // uniform, starts at 0
    double x_th = 1.0;             // failure threshold
    std::uint64_t master_seed = 0;
    unsigned workers = 1;
    bool truncate_negative_drift = false;

    /// Grid {0, h/n_steps, ..., h}.
    static TimeGrid horizon_grid(double horizon, std::size_t n_steps = 2000) {
        if (!(horizon > 0.0) || n_steps < 1) throw InvalidGridError("horizon and step count must be positive");
        return TimeGrid::uniform(horizon / static_cast<double>(n_steps), n_steps);
    }

    void validate() const {
        if (n_paths < 1) throw InvalidArgumentError("Monte-Carlo needs at least one path");
        if (!grid.is_uniform_from_zero()) throw InvalidGridError("Monte-Carlo grid must be uniform and start at 0");
    }
};

struct ReliabilityCurve {
    TimeGrid times;
    std::vector<double> r_values;
    std::size_t n_paths = 0;
    double censored_fraction = 0.0;
    bool horizon_warning = false;
};

namespace detail {

inline double draw_drift(const Theta& theta, Rng& rng, bool truncate) {
    if (theta.sigma_a2 <= 0.0) return theta.mu_a;
    std::normal_distribution<double> nd(theta.mu_a, theta.sigma_a());
    double a = nd(rng);
    if (truncate)
        for (int k = 0; a < 0.0 && k < 1000; ++k) a = nd(rng);
    return a;
}

/// Runs body(q, sampler, increments, path) for every path q; each thread owns
/// its sampler copy and scratch buffers.
template <typename Body>
void for_each_path(const Theta& theta, const McConfig& cfg, Body&& body) {
    const std::size_t n_steps = cfg.grid.size() - 1;
    const FgnSampler proto(n_steps, cfg.grid[1], theta.h);
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(cfg.n_paths)));

    auto run_block = [&](std::size_t begin, std::size_t end) {
        FgnSampler sampler = proto;
        std::vector<double> inc(n_steps), path(n_steps + 1);
        for (std::size_t q = begin; q < end; ++q) body(q, sampler, inc, path);
    };
    if (workers == 1) {
        run_block(0, cfg.n_paths);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.n_paths + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk, e = std::min(cfg.n_paths, b + chunk);
        if (b < e) pool.emplace_back(run_block, b, e);
    }
    for (auto& t : pool) t.join();
}

/// Fills `path` (grid length) for path index q.
inline void build_path(const Theta& theta, double s_star, const McConfig& cfg, std::size_t q,
                       const FgnSampler& sampler, std::vector<double>& inc, std::vector<double>& path,
                       const std::vector<double>& tau) {
    Rng rng = make_stream(cfg.master_seed, {q});
    const double a = draw_drift(theta, rng, cfg.truncate_negative_drift);
    sampler.sample(rng, inc);
    const double rate = a * std::exp(theta.alpha1 * s_star);
    const double sigma = theta.sigma();
    double b = 0.0;
    path[0] = 0.0;
    for (std::size_t j = 1; j < path.size(); ++j) {
        b += inc[j - 1];
        path[j] = rate * tau[j] + sigma * b;
    }
}

inline std::vector<double> time_powers(const TimeGrid& grid, double beta) {
    std::vector<double> tau(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) tau[j] = std::pow(grid[j], beta);
    return tau;
}

}  // namespace detail

/// All N paths on cfg.grid, row q = path q. Memory is N x grid size.
inline std::vector<std::vector<double>> simulate_degradation_paths(const Theta& theta, double s_star,
                                                                   const McConfig& cfg) {
    cfg.validate();
    theta.validate(true);
    const auto tau = detail::time_powers(cfg.grid, theta.beta);
    std::vector<std::vector<double>> paths(cfg.n_paths, std::vector<double>(cfg.grid.size()));
    detail::for_each_path(theta, cfg, [&](std::size_t q, const FgnSampler& s, std::vector<double>& inc,
                                          std::vector<double>&) {
        detail::build_path(theta, s_star, cfg, q, s, inc, paths[q], tau);
    });
    return paths;
}

/// Index of the first grid point where the path reaches x_th, if any.
inline std::optional<std::size_t> first_passage_index(std::span<const double> path, double x_th) {
    for (std::size_t j = 0; j < path.size(); ++j)
        if (path[j] >= x_th) return j;
    return std::nullopt;
}

/// First grid time with path >= x_th; nullopt when censored.
inline std::optional<double> first_passage(std::span<const double> path, const TimeGrid& grid, double x_th) {
    if (path.size() != grid.size()) throw InvalidArgumentError("path and grid differ in length");
    const auto j = first_passage_index(path, x_th);
    if (!j) return std::nullopt;
    return grid[*j];
}

/// First-passage times of all N paths (nullopt = censored at the horizon).
inline std::vector<std::optional<double>> first_passage_times(const Theta& theta, double s_star, const McConfig& cfg) {
    cfg.validate();
    theta.validate(true);
    const auto tau = detail::time_powers(cfg.grid, theta.beta);
    std::vector<std::optional<double>> out(cfg.n_paths);
    detail::for_each_path(theta, cfg, [&](std::size_t q, const FgnSampler& s, std::vector<double>& inc,
                                          std::vector<double>& path) {
        detail::build_path(theta, s_star, cfg, q, s, inc, path, tau);
        const auto j = first_passage_index(path, cfg.x_th);
        if (j) out[q] = cfg.grid[*j];
    });
    return out;
}

/// R(t) = 1 - F(t) from the empirical CDF of first-passage times over `eval_times`
/// (defaults to the simulation grid). Censored paths survive every evaluation time.
inline ReliabilityCurve reliability_curve(const Theta& theta, double s_star, const McConfig& cfg,
                                          std::optional<TimeGrid> eval_times = std::nullopt) {
    const TimeGrid times = eval_times ? *eval_times : cfg.grid;
    if (times.empty()) throw InvalidGridError("no evaluation times");
    if (times.back() > cfg.grid.back() * (1.0 + 1e-12))
        throw InvalidGridError("evaluation times extend beyond the simulation horizon");

    const auto fpt = first_passage_times(theta, s_star, cfg);
    std::vector<double> failed;
    failed.reserve(fpt.size());
    for (const auto& t : fpt)
        if (t) failed.push_back(*t);
    std::sort(failed.begin(), failed.end());

    ReliabilityCurve c;
    c.times = times;
    c.n_paths = cfg.n_paths;
    const double n = static_cast<double>(cfg.n_paths);
    for (double t : times) {
        const auto k = std::upper_bound(failed.begin(), failed.end(), t) - failed.begin();
        c.r_values.push_back(1.0 - static_cast<double>(k) / n);
    }
    c.censored_fraction = 1.0 - static_cast<double>(failed.size()) / n;
    c.horizon_warning = c.censored_fraction > 0.5;
    return c;
}

/// Largest curve time with R(t) >= r_target.
inline double time_at_reliability(const ReliabilityCurve& curve, double r_target) {
    if (!(r_target > 0.0 && r_target < 1.0)) throw DomainError("target reliability must lie in (0, 1)");
    if (curve.r_values.empty() || curve.r_values.size() != curve.times.size())
        throw InvalidArgumentError("degenerate reliability curve");
    for (std::size_t j = 0; j < curve.r_values.size(); ++j) {
        if (curve.r_values[j] < r_target) {
            if (j == 0) throw DomainError("reliability is already below the target at the first curve time");
            return curve.times[j - 1];
        }
    }
    throw HorizonExceededError("reliability stays above " + std::to_string(r_target) + " up to the horizon " +
                               std::to_string(curve.times.back()));
}

/// Exact (Cholesky) simulation of n_paths degradation values on a positive,
/// possibly irregular grid. Path q uses substream (master_seed, q).
inline std::vector<std::vector<double>> simulate_paths_exact(const Theta& theta, double s_star, const TimeGrid& grid,
                                                             std::size_t n_paths, std::uint64_t master_seed,
                                                             bool truncate_negative_drift = false) {
    theta.validate(true);
    const Eigen::MatrixXd lower = jittered_cholesky(fbm_covariance(grid, theta.h).matrix).lower();
    const auto psi = basis_vector(theta, s_star, grid);
    const double sigma = theta.sigma();
    std::vector<std::vector<double>> out(n_paths, std::vector<double>(grid.size()));
    for (std::size_t q = 0; q < n_paths; ++q) {
        Rng rng = make_stream(master_seed, {q});
        const double a = detail::draw_drift(theta, rng, truncate_negative_drift);
        const auto b = sample_fbm_exact(lower, rng);
        for (std::size_t j = 0; j < grid.size(); ++j) out[q][j] = a * psi[j] + sigma * b[j];
    }
    return out;
}

/// Type-7 (linear interpolation) sample quantile; `v` is reordered.
inline double quantile_inplace(std::vector<double>& v, double p) {
    if (v.empty()) throw InvalidArgumentError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Pointwise mean and (q, 1-q) quantile bands of a path ensemble.
struct PathBands {
    std::vector<double> mean, lower, upper;
};

inline PathBands path_bands(const std::vector<std::vector<double>>& paths, double q = 0.05) {
    if (paths.empty()) throw InvalidArgumentError("empty path ensemble");
    const std::size_t m = paths.front().size();
    PathBands b;
    std::vector<double> col(paths.size());
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < paths.size(); ++k) {
            col[k] = paths[k][j];
            s += col[k];
        }
        b.mean.push_back(s / static_cast<double>(paths.size()));
        b.lower.push_back(quantile_inplace(col, q));
        b.upper.push_back(quantile_inplace(col, 1.0 - q));
    }
    return b;
}

}  // namespace fbmadt
