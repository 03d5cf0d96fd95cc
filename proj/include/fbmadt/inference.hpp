// Parameter estimation for the FBM degradation model with random drift.
//
// Every likelihood in this file reduces, per unit, to four numbers under a
// candidate (alpha1, beta, H):
//
//     x' S^-1 x,   x' S^-1 psi,   psi' S^-1 psi,   log|S|
//
// where S is the unit-variance FBM covariance on the unit's grid and
// psi = exp(alpha1 s*) t^beta. S only depends on (grid, H) and psi on alpha1
// through a per-level scalar, so FormCache keeps Cholesky factors per
// distinct grid and re-solves only what a parameter change invalidates.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fbmadt/adt_model.hpp"
#include "fbmadt/dataset.hpp"
#include "fbmadt/errors.hpp"
#include "fbmadt/fgn_fbm.hpp"
#include "fbmadt/optimize.hpp"

namespace fbmadt {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)

/// Posterior N(mu, sigma2) of one unit's drift a_li.
struct DriftPosterior {
    double mu = 0.0;
    double sigma2 = 0.0;
};

/// Indexed [level][unit], same layout as AdtDataset.
using Posteriors = std::vector<std::vector<DriftPosterior>>;

enum class FitMethod { Em, TwoStep, MleFixed };

inline std::string_view to_string(FitMethod m) {
    switch (m) {
        case FitMethod::Em: return "em";
        case FitMethod::TwoStep: return "two_step";
        case FitMethod::MleFixed: return "mle_fixed";
    }
    return "?";
}

inline FitMethod parse_fit_method(std::string_view s) {
    if (s == "em") return FitMethod::Em;
    if (s == "two_step" || s == "two-step") return FitMethod::TwoStep;
    if (s == "mle_fixed" || s == "mle") return FitMethod::MleFixed;
    throw InvalidArgumentError("unknown fit method '" + std::string(s) + "'");
}

/// Search box for (alpha1, beta, H) and the coarse-grid resolution.
struct ProfileBounds {
    double alpha1_lo = -20.0, alpha1_hi = 20.0;
    double beta_lo = 0.01, beta_hi = 5.0;
    double h_lo = Hurst::kMin, h_hi = Hurst::kMax;
    std::size_t alpha1_points = 9;
    double beta_step = 0.25;
    double h_step = 0.05;

    void validate() const {
        if (!(alpha1_lo < alpha1_hi) || !(beta_lo > 0.0 && beta_lo < beta_hi) ||
            !(h_lo >= Hurst::kMin && h_hi <= Hurst::kMax && h_lo < h_hi) || alpha1_points < 1 ||
            !(beta_step > 0.0) || !(h_step > 0.0))
            throw InvalidArgumentError("invalid profile search bounds");
    }

    friend bool operator==(const ProfileBounds&, const ProfileBounds&) = default;
};

struct TraceEntry {
    Theta theta;
    double loglik = 0.0;
};

struct FitResult {
    Theta theta_hat;
    double l_max = 0.0;
    double aic = 0.0;
    int iterations = 0;
    bool converged = false;
    bool optimizer_warning = false;
    FitMethod method = FitMethod::Em;
    std::vector<TraceEntry> trace;
};

/// -2 l_max + 2 n_params
inline double aic(double l_max, int n_params) { return -2.0 * l_max + 2.0 * static_cast<double>(n_params); }

namespace detail {

struct UnitForms {
    double xSx = 0.0;
    double xSpsi = 0.0;
    double psiSpsi = 0.0;
    double logdet = 0.0;
    double m = 0.0;
};

class FormCache {
public:
    explicit FormCache(const AdtDataset& data) {
        data.validate();
        std::map<std::vector<double>, std::size_t> grid_index;
        for (std::size_t l = 0; l < data.levels.size(); ++l) {
            level_s_star_.push_back(data.s_star(l));
            for (const auto& u : data.levels[l].units) {
                auto [it, inserted] = grid_index.try_emplace(u.times.values(), grids_.size());
                if (inserted) grids_.push_back(Group{u.times});
                Unit unit;
                unit.level = l;
                unit.group = it->second;
                unit.x = Eigen::Map<const Eigen::VectorXd>(u.values.data(), static_cast<Eigen::Index>(u.size()));
                units_.push_back(std::move(unit));
            }
        }
    }

    std::size_t n_units() const noexcept { return units_.size(); }
    std::size_t level_of(std::size_t u) const { return units_[u].level; }
    double s_star(std::size_t level) const { return level_s_star_[level]; }
    std::size_t n_levels() const noexcept { return level_s_star_.size(); }

    void prepare(double beta, Hurst h) {
        if (!h_ready_ || h.value() != h_.value()) {
            h_ = h;
            for (auto& g : grids_) {
                const auto chol = jittered_cholesky(fbm_covariance(g.grid, h).matrix);
                g.lower = chol.lower();
                g.logdet = chol.log_det();
            }
            for (auto& u : units_) {
                u.zx = grids_[u.group].lower.triangularView<Eigen::Lower>().solve(u.x);
                u.xSx = u.zx.squaredNorm();
            }
            h_ready_ = true;
            beta_ready_ = false;
        }
        if (!beta_ready_ || beta != beta_) {
            beta_ = beta;
            for (auto& g : grids_) {
                Eigen::VectorXd tau(static_cast<Eigen::Index>(g.grid.size()));
                for (std::size_t j = 0; j < g.grid.size(); ++j) tau(static_cast<Eigen::Index>(j)) = std::pow(g.grid[j], beta);
                g.ztau = g.lower.triangularView<Eigen::Lower>().solve(tau);
                g.tauStau = g.ztau.squaredNorm();
            }
            for (auto& u : units_) u.xStau = u.zx.dot(grids_[u.group].ztau);
            beta_ready_ = true;
        }
    }

    UnitForms forms(std::size_t u, double alpha1) const {
        const auto& unit = units_[u];
        const auto& g = grids_[unit.group];
        const double e = std::exp(alpha1 * level_s_star_[unit.level]);
        return {unit.xSx, e * unit.xStau, e * e * g.tauStau, g.logdet, static_cast<double>(unit.x.size())};
    }

    /// Rate estimate x'S^-1 tau / tau'S^-1 tau and its weighted residual sum of squares.
    std::pair<double, double> rate_and_rss(std::size_t u) const {
        const auto& unit = units_[u];
        const auto& g = grids_[unit.group];
        const double rate = unit.xStau / g.tauStau;
        return {rate, std::max(unit.xSx - unit.xStau * rate, 0.0)};
    }

private:
    struct Group {
        TimeGrid grid;
        Eigen::MatrixXd lower{};
        double logdet = 0.0;
        Eigen::VectorXd ztau{};
        double tauStau = 0.0;
    };
    struct Unit {
        std::size_t level = 0;
        std::size_t group = 0;
        Eigen::VectorXd x;
        Eigen::VectorXd zx;
        double xSx = 0.0;
        double xStau = 0.0;
    };

    std::vector<double> level_s_star_;
    std::vector<Group> grids_;
    std::vector<Unit> units_;
    Hurst h_{};
    double beta_ = 0.0;
    bool h_ready_ = false;
    bool beta_ready_ = false;
};

inline DriftPosterior posterior_from_forms(const Theta& theta, const UnitForms& f) {
    const double denom = f.psiSpsi * theta.sigma_a2 + theta.sigma2;
    return {(f.xSpsi * theta.sigma_a2 + theta.mu_a * theta.sigma2) / denom, theta.sigma2 * theta.sigma_a2 / denom};
}

/// Marginal log-density of one unit: x ~ N(mu_a psi, sigma2 S + sigma_a2 psi psi').
inline double unit_marginal_loglik(const Theta& theta, const UnitForms& f) {
    const double rSr = f.xSx - 2.0 * theta.mu_a * f.xSpsi + theta.mu_a * theta.mu_a * f.psiSpsi;
    const double rSpsi = f.xSpsi - theta.mu_a * f.psiSpsi;
    const double denom = theta.sigma2 + theta.sigma_a2 * f.psiSpsi;
    const double logdet = f.m * std::log(theta.sigma2) + f.logdet + std::log(denom / theta.sigma2);
    const double quad = (rSr - theta.sigma_a2 * rSpsi * rSpsi / denom) / theta.sigma2;
    return -0.5 * (f.m * kLog2Pi + logdet + quad);
}

inline std::vector<DriftPosterior> flatten(const Posteriors& p) {
    std::vector<DriftPosterior> out;
    for (const auto& lvl : p) out.insert(out.end(), lvl.begin(), lvl.end());
    return out;
}

inline void check_layout(const Posteriors& p, const AdtDataset& data) {
    if (p.size() != data.levels.size())
        throw InvalidArgumentError("posterior layout does not match dataset levels");
    for (std::size_t l = 0; l < p.size(); ++l)
        if (p[l].size() != data.levels[l].units.size())
            throw InvalidArgumentError("posterior layout does not match units of level " + std::to_string(l));
}

struct ProfileValue {
    double sigma2;
    double value;  // -1/2 sum log|S| - N/2 ln sigma2 (constant terms omitted)
};

/// Profile of the expected complete-data log-likelihood over sigma2 for fixed (alpha1, beta, H).
inline ProfileValue em_profile(FormCache& cache, const std::vector<DriftPosterior>& post, double alpha1,
                               double beta, Hurst h) {
    cache.prepare(beta, h);
    double ss = 0.0, logdet = 0.0, n = 0.0;
    for (std::size_t u = 0; u < cache.n_units(); ++u) {
        const auto f = cache.forms(u, alpha1);
        const double ea2 = post[u].mu * post[u].mu + post[u].sigma2;
        ss += f.xSx - 2.0 * post[u].mu * f.xSpsi + ea2 * f.psiSpsi;
        logdet += f.logdet;
        n += f.m;
    }
    const double s2 = ss / n;
    if (!(s2 > 0.0)) return {s2, -std::numeric_limits<double>::infinity()};
    return {s2, -0.5 * logdet - 0.5 * n * std::log(s2)};
}

inline double relative_change(const Theta& a, const Theta& b) {
    const auto x = a.as_array(), y = b.as_array();
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
        worst = std::max(worst, std::abs(y[j] - x[j]) / (std::abs(x[j]) + 1e-12));
    return worst;
}

inline optim::NelderMeadOptions polish_options(const ProfileBounds& b, std::size_t dims, bool with_alpha) {
    optim::NelderMeadOptions o;
    o.initial_step.clear();
    if (with_alpha) o.initial_step.push_back(0.5 * (b.alpha1_hi - b.alpha1_lo) / std::max<double>(1.0, double(b.alpha1_points - 1)));
    o.initial_step.push_back(0.5 * b.beta_step);
    if (dims > o.initial_step.size()) o.initial_step.push_back(0.5 * b.h_step);
    o.f_tol = 1e-11;
    o.max_evals = 3000;
    o.restarts = 2;
    return o;
}

inline std::vector<double> h_axis(const ProfileBounds& b) {
    auto axis = optim::linspace_step(b.h_step, b.h_hi, b.h_step);
    std::erase_if(axis, [&](double v) { return v < b.h_lo || v > b.h_hi || v >= 1.0 - 1e-9; });
    if (axis.empty()) axis.push_back(0.5 * (b.h_lo + b.h_hi));
    return axis;
}

inline std::vector<double> beta_axis(const ProfileBounds& b) {
    auto axis = optim::linspace_step(b.beta_step, b.beta_hi, b.beta_step);
    std::erase_if(axis, [&](double v) { return v < b.beta_lo; });
    if (axis.empty()) axis.push_back(0.5 * (b.beta_lo + b.beta_hi));
    return axis;
}

/// Coarse grid over the free coordinates, then Nelder-Mead from the best grid
/// point and from each extra start; the overall best is returned.
/// Coordinates are ordered (alpha1?, beta, H?) and the grid axes (H, beta, alpha1)
/// so consecutive evaluations reuse the Cholesky factors.
struct SearchOutcome {
    optim::Point x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
};

inline SearchOutcome profile_minimize(const optim::Objective& f, bool with_alpha, bool with_h,
                                      const ProfileBounds& b, const std::vector<optim::Point>& extra_starts) {
    std::vector<std::vector<double>> axes;
    if (with_h) axes.push_back(h_axis(b));
    axes.push_back(beta_axis(b));
    if (with_alpha) axes.push_back(optim::linspace(b.alpha1_lo, b.alpha1_hi, b.alpha1_points));

    // grid order (H?, beta, alpha1?) -> point order (alpha1?, beta, H?)
    auto to_point = [&](const optim::Point& g) {
        optim::Point p(g.rbegin(), g.rend());
        return p;
    };
    auto grid_f = [&](const optim::Point& g) { return f(to_point(g)); };
    const auto coarse = optim::grid_scan(grid_f, axes);

    optim::Box box;
    if (with_alpha) {
        box.lower.push_back(b.alpha1_lo);
        box.upper.push_back(b.alpha1_hi);
    }
    box.lower.push_back(b.beta_lo);
    box.upper.push_back(b.beta_hi);
    if (with_h) {
        box.lower.push_back(b.h_lo);
        box.upper.push_back(b.h_hi);
    }
    const auto opts = polish_options(b, box.lower.size(), with_alpha);

    SearchOutcome best;
    std::vector<optim::Point> starts;
    if (!coarse.x.empty()) starts.push_back(to_point(coarse.x));
    for (const auto& s : extra_starts) starts.push_back(box.project(s));
    for (const auto& s : starts) {
        const double f0 = f(s);
        if (f0 < best.f) best = {s, f0, false};
        const auto m = optim::nelder_mead(f, s, box, opts);
        if (m.f < best.f || (m.f == best.f && !best.converged)) best = {m.x, m.f, m.converged};
    }
    return best;
}

}  // namespace detail

/// Posterior of the drift of one unit (x observed on `grid`) given theta.
inline DriftPosterior posterior_drift(const Theta& theta, std::span<const double> x, const TimeGrid& grid,
                                      double s_star) {
    if (x.size() != grid.size()) throw InvalidArgumentError("unit values and grid differ in length");
    const auto chol = jittered_cholesky(fbm_covariance(grid, theta.h).matrix);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const auto psi_std = basis_vector(theta, s_star, grid);
    const Eigen::Map<const Eigen::VectorXd> psi(psi_std.data(), static_cast<Eigen::Index>(psi_std.size()));
    const Eigen::VectorXd spsi = chol.llt.solve(psi);
    detail::UnitForms f;
    f.xSpsi = xv.dot(spsi);
    f.psiSpsi = psi.dot(spsi);
    return detail::posterior_from_forms(theta, f);
}

/// E-step: posterior of every unit's drift under theta.
inline Posteriors e_step(const Theta& theta, const AdtDataset& data) {
    detail::FormCache cache(data);
    cache.prepare(theta.beta, theta.h);
    Posteriors out(data.levels.size());
    std::size_t u = 0;
    for (std::size_t l = 0; l < data.levels.size(); ++l)
        for (std::size_t i = 0; i < data.levels[l].units.size(); ++i, ++u)
            out[l].push_back(detail::posterior_from_forms(theta, cache.forms(u, theta.alpha1)));
    return out;
}

/// Observed-data log-likelihood with the drifts integrated out.
inline double observed_loglik(const Theta& theta, const AdtDataset& data) {
    theta.validate();
    detail::FormCache cache(data);
    cache.prepare(theta.beta, theta.h);
    double ll = 0.0;
    for (std::size_t u = 0; u < cache.n_units(); ++u) ll += detail::unit_marginal_loglik(theta, cache.forms(u, theta.alpha1));
    return ll;
}

/// Complete-data log-likelihood at given drifts a[level][unit]. Requires sigma_a2 > 0.
inline double complete_data_loglik(const Theta& theta, const std::vector<std::vector<double>>& a,
                                   const AdtDataset& data) {
    if (!(theta.sigma_a2 > 0.0)) throw DomainError("complete-data likelihood needs sigma_a^2 > 0");
    detail::FormCache cache(data);
    cache.prepare(theta.beta, theta.h);
    double ll = 0.0;
    std::size_t u = 0;
    for (std::size_t l = 0; l < data.levels.size(); ++l)
        for (std::size_t i = 0; i < data.levels[l].units.size(); ++i, ++u) {
            const auto f = cache.forms(u, theta.alpha1);
            const double ai = a.at(l).at(i);
            const double quad_x = f.xSx - 2.0 * ai * f.xSpsi + ai * ai * f.psiSpsi;
            ll += -0.5 * ((f.m + 1.0) * kLog2Pi + std::log(theta.sigma_a2) + f.m * std::log(theta.sigma2) + f.logdet +
                          quad_x / theta.sigma2 + (ai - theta.mu_a) * (ai - theta.mu_a) / theta.sigma_a2);
        }
    return ll;
}

/// Expected complete-data log-likelihood E[ln L(theta | x, a)] under the given posteriors.
inline double q_function(const Theta& theta, const Posteriors& posteriors, const AdtDataset& data) {
    if (!(theta.sigma_a2 > 0.0)) throw DomainError("q_function needs sigma_a^2 > 0");
    detail::check_layout(posteriors, data);
    const auto post = detail::flatten(posteriors);
    detail::FormCache cache(data);
    cache.prepare(theta.beta, theta.h);
    double q = 0.0;
    for (std::size_t u = 0; u < cache.n_units(); ++u) {
        const auto f = cache.forms(u, theta.alpha1);
        const double mu = post[u].mu;
        const double ea2 = mu * mu + post[u].sigma2;
        const double drift_part = (ea2 - 2.0 * mu * theta.mu_a + theta.mu_a * theta.mu_a) / theta.sigma_a2;
        const double obs_part = (f.xSx - 2.0 * mu * f.xSpsi + ea2 * f.psiSpsi) / theta.sigma2;
        q += -0.5 * ((f.m + 1.0) * kLog2Pi + std::log(theta.sigma_a2) + f.m * std::log(theta.sigma2) + f.logdet +
                     drift_part + obs_part);
    }
    return q;
}

struct MStepClosed {
    double mu_a;
    double sigma_a2;
    double sigma2;
};

/// Closed-form maximizers of q over (mu_a, sigma_a2, sigma2) for fixed (alpha1, beta, H).
inline MStepClosed m_step_closed(const Posteriors& posteriors, const AdtDataset& data, double alpha1, double beta,
                                 Hurst h) {
    detail::check_layout(posteriors, data);
    const auto post = detail::flatten(posteriors);
    const double n = static_cast<double>(post.size());
    double mu_a = 0.0;
    for (const auto& p : post) mu_a += p.mu;
    mu_a /= n;
    double var = 0.0;
    for (const auto& p : post) var += p.mu * p.mu + p.sigma2 - 2.0 * p.mu * mu_a + mu_a * mu_a;
    var /= n;
    if (!(var >= -1e-12 * mu_a * mu_a)) throw ConditioningError("negative drift variance in M-step");
    detail::FormCache cache(data);
    const auto prof = detail::em_profile(cache, post, alpha1, beta, h);
    return {mu_a, std::max(var, 0.0), prof.sigma2};
}

struct ProfileResult {
    double alpha1 = 0.0;
    double beta = 1.0;
    Hurst h{};
    double sigma2 = 1.0;
    double profile_value = 0.0;
    bool converged = false;
};

/// Maximizes the sigma2-profiled q over (alpha1, beta, H). With `pin_h` the
/// search is two-dimensional at H = 0.5. `start` adds a polish start point.
inline ProfileResult profile_search(const AdtDataset& data, const Posteriors& posteriors,
                                    const ProfileBounds& bounds = {}, bool pin_h = false,
                                    const std::optional<Theta>& start = std::nullopt) {
    bounds.validate();
    detail::check_layout(posteriors, data);
    const auto post = detail::flatten(posteriors);
    detail::FormCache cache(data);

    auto unpack = [&](const optim::Point& p) {
        return std::tuple{p[0], p[1], pin_h ? Hurst(0.5) : Hurst::clamped(p[2])};
    };
    auto objective = [&](const optim::Point& p) {
        auto [a1, b, h] = unpack(p);
        return -detail::em_profile(cache, post, a1, b, h).value;
    };
    std::vector<optim::Point> extra;
    if (start) {
        optim::Point s{start->alpha1, start->beta};
        if (!pin_h) s.push_back(start->h.value());
        extra.push_back(s);
    }
    const auto best = detail::profile_minimize(objective, true, !pin_h, bounds, extra);
    if (best.x.empty()) throw ConditioningError("profile search found no finite objective value");
    auto [a1, b, h] = unpack(best.x);
    const auto prof = detail::em_profile(cache, post, a1, b, h);
    return {a1, b, h, prof.sigma2, prof.value, best.converged};
}

struct EmOptions {
    double epsilon = 0.01;
    int max_iter = 500;
    ProfileBounds bounds{};
};

struct TwoStepOptions {
    ProfileBounds bounds{};
};

/// Two-step baseline. Step 1 fits per-unit degradation rates with a common
/// (beta, H, sigma2); step 2 fits the drift distribution and alpha1 to the
/// rates e_li ~ N(mu_a exp(alpha1 s*), sigma_a2 exp(2 alpha1 s*)).
inline FitResult two_step_mle(const AdtDataset& data, Variant variant, const TwoStepOptions& opt = {}) {
    data.validate();
    opt.bounds.validate();
    for (const auto& l : data.levels)
        for (const auto& u : l.units)
            if (u.size() < 2) throw InvalidArgumentError("two-step MLE needs at least 2 measurements per unit ('" + u.id + "')");
    const bool random = has_random_drift(variant);
    if (random && data.n_units() < 2) throw InvalidArgumentError("drift variance is undefined with fewer than 2 units");

    const bool pin_h = !has_memory(variant);
    detail::FormCache cache(data);
    const double n_obs = static_cast<double>(data.n_observations());

    auto step1 = [&](const optim::Point& p) {
        const double beta = p[0];
        const Hurst h = pin_h ? Hurst(0.5) : Hurst::clamped(p[1]);
        cache.prepare(beta, h);
        double rss = 0.0, logdet = 0.0;
        for (std::size_t u = 0; u < cache.n_units(); ++u) {
            rss += cache.rate_and_rss(u).second;
            logdet += cache.forms(u, 0.0).logdet;
        }
        const double s2 = std::max(rss / n_obs, std::numeric_limits<double>::min());
        return 0.5 * (n_obs * kLog2Pi + logdet + n_obs * std::log(s2) + n_obs);
    };
    const auto s1 = detail::profile_minimize(step1, false, !pin_h, opt.bounds, {});
    if (s1.x.empty()) throw ConditioningError("two-step MLE: no finite likelihood in step 1");

    const double beta = s1.x[0];
    const Hurst h = pin_h ? Hurst(0.5) : Hurst::clamped(s1.x[1]);
    cache.prepare(beta, h);
    std::vector<double> rates(cache.n_units()), s_star(cache.n_units());
    double rss = 0.0;
    for (std::size_t u = 0; u < cache.n_units(); ++u) {
        const auto [rate, r] = cache.rate_and_rss(u);
        rates[u] = rate;
        rss += r;
        s_star[u] = cache.s_star(cache.level_of(u));
    }
    const double sigma2 = std::max(rss / n_obs, std::numeric_limits<double>::min());
    const double n = static_cast<double>(rates.size());

    auto moments = [&](double alpha1) {
        double mean = 0.0;
        for (std::size_t u = 0; u < rates.size(); ++u) mean += rates[u] * std::exp(-alpha1 * s_star[u]);
        mean /= n;
        double var = 0.0;
        for (std::size_t u = 0; u < rates.size(); ++u) {
            const double d = rates[u] * std::exp(-alpha1 * s_star[u]) - mean;
            var += d * d;
        }
        return std::pair{mean, var / n};
    };
    double sum_s = 0.0;
    for (double s : s_star) sum_s += s;
    // negative log-likelihood of the rates, profiled over (mu_a, sigma_a2)
    auto step2 = [&](const optim::Point& p) {
        const double var = std::max(moments(p[0]).second, std::numeric_limits<double>::min());
        return 0.5 * n * std::log(var) + p[0] * sum_s;
    };
    const auto& b = opt.bounds;
    const auto a_axis = optim::linspace(b.alpha1_lo, b.alpha1_hi, std::max<std::size_t>(b.alpha1_points * 10, 41));
    const auto coarse = optim::grid_scan(step2, {a_axis});
    optim::NelderMeadOptions nm;
    nm.initial_step = {0.5 * (a_axis[1] - a_axis[0])};
    nm.f_tol = 1e-12;
    nm.restarts = 2;
    const auto s2 = optim::nelder_mead(step2, coarse.x, optim::Box{{b.alpha1_lo}, {b.alpha1_hi}}, nm);
    const double alpha1 = s2.x[0];
    const auto [mu_a, var_a] = moments(alpha1);

    Theta theta{mu_a, random ? var_a : 0.0, alpha1, beta, sigma2, h, variant};
    FitResult r;
    r.method = FitMethod::TwoStep;
    r.theta_hat = theta;
    r.l_max = observed_loglik(theta, data);
    r.aic = aic(r.l_max, n_params(variant));
    r.iterations = 1;
    r.converged = s1.converged && s2.converged;
    r.optimizer_warning = !r.converged;
    r.trace.push_back({theta, r.l_max});
    return r;
}

/// EM estimation for the random-drift variants M0 and M2.
inline FitResult em_fit(const AdtDataset& data, const Theta& theta0, const EmOptions& opt = {}) {
    data.validate();
    opt.bounds.validate();
    if (!has_random_drift(theta0.variant)) throw InvalidArgumentError("EM applies to variants M0 and M2 only");
    if (!(opt.epsilon > 0.0)) throw InvalidArgumentError("EM tolerance must be positive");
    const bool pin_h = !has_memory(theta0.variant);

    Theta theta = theta0.enforce_variant();
    const double var_floor = 1e-300;
    theta.sigma_a2 = std::max(theta.sigma_a2, var_floor);
    theta.validate();

    FitResult r;
    r.method = FitMethod::Em;
    double ll = observed_loglik(theta, data);
    r.trace.push_back({theta, ll});

    for (int it = 1; it <= opt.max_iter; ++it) {
        const auto post = e_step(theta, data);
        const auto closed = m_step_closed(post, data, theta.alpha1, theta.beta, theta.h);
        const auto prof = profile_search(data, post, opt.bounds, pin_h, theta);

        Theta next = theta;
        next.mu_a = closed.mu_a;
        next.sigma_a2 = std::max(closed.sigma_a2, var_floor);
        next.alpha1 = prof.alpha1;
        next.beta = prof.beta;
        next.h = prof.h;
        next.sigma2 = prof.sigma2;
        r.optimizer_warning = r.optimizer_warning || !prof.converged;

        const double change = detail::relative_change(theta, next);
        theta = next;
        ll = observed_loglik(theta, data);
        r.trace.push_back({theta, ll});
        r.iterations = it;
        if (change <= opt.epsilon) {
            r.converged = true;
            break;
        }
    }
    r.theta_hat = theta;
    r.l_max = ll;
    r.aic = aic(r.l_max, n_params(theta.variant));
    return r;
}

/// EM started from the two-step estimate.
inline FitResult em_fit(const AdtDataset& data, Variant variant, const EmOptions& opt = {}) {
    TwoStepOptions ts;
    ts.bounds = opt.bounds;
    const auto init = two_step_mle(data, variant, ts);
    return em_fit(data, init.theta_hat, opt);
}

/// Direct maximum likelihood for the constant-drift variants M1 and M3.
/// mu_a and sigma2 are concentrated out in closed form; (alpha1, beta, H) are searched.
inline FitResult mle_fixed(const AdtDataset& data, Variant variant, const ProfileBounds& bounds = {}) {
    data.validate();
    bounds.validate();
    if (has_random_drift(variant)) throw InvalidArgumentError("mle_fixed applies to variants M1 and M3 only");
    const bool pin_h = !has_memory(variant);
    detail::FormCache cache(data);
    const double n_obs = static_cast<double>(data.n_observations());

    struct Concentrated {
        double mu_a, sigma2, nll;
    };
    auto concentrate = [&](double alpha1, double beta, Hurst h) -> Concentrated {
        cache.prepare(beta, h);
        double sxp = 0.0, spp = 0.0, sxx = 0.0, logdet = 0.0;
        for (std::size_t u = 0; u < cache.n_units(); ++u) {
            const auto f = cache.forms(u, alpha1);
            sxp += f.xSpsi;
            spp += f.psiSpsi;
            sxx += f.xSx;
            logdet += f.logdet;
        }
        const double mu = sxp / spp;
        const double s2 = (sxx - mu * sxp) / n_obs;
        if (!(s2 > 0.0)) return {mu, s2, std::numeric_limits<double>::infinity()};
        return {mu, s2, 0.5 * (n_obs * kLog2Pi + logdet + n_obs * std::log(s2) + n_obs)};
    };
    auto unpack = [&](const optim::Point& p) {
        return std::tuple{p[0], p[1], pin_h ? Hurst(0.5) : Hurst::clamped(p[2])};
    };
    auto objective = [&](const optim::Point& p) {
        auto [a1, b, h] = unpack(p);
        return concentrate(a1, b, h).nll;
    };
    const auto best = detail::profile_minimize(objective, true, !pin_h, bounds, {});
    if (best.x.empty()) throw ConditioningError("fixed-effect MLE found no finite likelihood");
    auto [a1, b, h] = unpack(best.x);
    const auto c = concentrate(a1, b, h);

    FitResult r;
    r.method = FitMethod::MleFixed;
    r.theta_hat = Theta{c.mu_a, 0.0, a1, b, c.sigma2, h, variant};
    r.l_max = observed_loglik(r.theta_hat, data);
    r.aic = aic(r.l_max, n_params(variant));
    r.iterations = 1;
    r.converged = best.converged;
    r.optimizer_warning = !best.converged;
    r.trace.push_back({r.theta_hat, r.l_max});
    return r;
}

/// Default estimator per variant: EM (from two-step) for M0/M2, direct MLE for M1/M3.
inline FitResult fit_variant(const AdtDataset& data, Variant variant, const EmOptions& opt = {}) {
    if (has_random_drift(variant)) return em_fit(data, variant, opt);
    return mle_fixed(data, variant, opt.bounds);
}

/// Fit with an explicitly chosen method.
inline FitResult fit(const AdtDataset& data, Variant variant, FitMethod method, const EmOptions& opt = {}) {
    switch (method) {
        case FitMethod::Em:
            if (!has_random_drift(variant)) return mle_fixed(data, variant, opt.bounds);
            return em_fit(data, variant, opt);
        case FitMethod::TwoStep: {
            TwoStepOptions ts;
            ts.bounds = opt.bounds;
            return two_step_mle(data, variant, ts);
        }
        case FitMethod::MleFixed:
            return mle_fixed(data, variant, opt.bounds);
    }
    throw InvalidArgumentError("unknown fit method");
}

}  // namespace fbmadt
