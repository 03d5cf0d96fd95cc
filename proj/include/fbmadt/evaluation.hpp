// Fit-quality metrics: relative estimation error, AIC, the ER trend/band
// indices, and hold-out-level cross-validation.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fbmadt/adt_model.hpp"
#include "fbmadt/dataset.hpp"
#include "fbmadt/errors.hpp"
#include "fbmadt/inference.hpp"
#include "fbmadt/reliability.hpp"

namespace fbmadt {

/// Sum over the variant's free parameters of |hat - true| / |true|, with
/// sigma_a and sigma on the standard-deviation scale.
inline double relative_error(const Theta& hat, const Theta& truth) {
    if (hat.variant != truth.variant) throw InvalidArgumentError("relative error needs matching variants");
    std::vector<std::pair<double, double>> terms{{hat.mu_a, truth.mu_a},
                                                 {hat.alpha1, truth.alpha1},
                                                 {hat.beta, truth.beta},
                                                 {hat.sigma(), truth.sigma()}};
    if (has_random_drift(truth.variant)) terms.emplace_back(hat.sigma_a(), truth.sigma_a());
    if (has_memory(truth.variant)) terms.emplace_back(hat.h.value(), truth.h.value());
    double re = 0.0;
    for (const auto& [e, t] : terms) {
        if (t == 0.0) throw DomainError("relative error is undefined for a zero true component");
        re += std::abs((e - t) / t);
    }
    return re;
}

struct LevelEr {
    double stress = 0.0;
    double er_mean = 0.0;
    double er_upper = 0.0;
    double er_lower = 0.0;
    std::size_t skipped = 0;  // (time, index) terms dropped for a near-zero observed reference
};

struct ErReport {
    std::vector<LevelEr> levels;
    double er_mean = 0.0;
    double er_upper = 0.0;
    double er_lower = 0.0;
    std::size_t skipped = 0;
};

/// Simulated values per level: sims[l][path][j] at the level's common grid.
using LevelEnsembles = std::vector<std::vector<std::vector<double>>>;

/// Grid shared by every unit of a level.
inline const TimeGrid& common_grid(const StressLevel& level) {
    const auto& g = level.units.front().times;
    for (const auto& u : level.units)
        if (!(u.times == g))
            throw GridAlignmentError("units at stress " + std::to_string(level.stress) +
                                     " do not share a measurement grid");
    return g;
}

/// Trend and band indices: per time, observed cross-unit mean/max/min against the
/// ensemble mean and upper/lower `quantile_level` quantiles; averaged over times, then levels.
inline ErReport er_indices(const AdtDataset& data, const LevelEnsembles& sims, double quantile_level = 0.05) {
    if (sims.size() != data.levels.size()) throw InvalidArgumentError("one simulated ensemble per level is required");
    if (!(quantile_level > 0.0 && quantile_level < 0.5)) throw DomainError("quantile level must lie in (0, 0.5)");
    constexpr double kTiny = 1e-9;

    ErReport rep;
    for (std::size_t l = 0; l < data.levels.size(); ++l) {
        const auto& level = data.levels[l];
        const auto& grid = common_grid(level);
        const auto& ens = sims[l];
        if (ens.empty()) throw InvalidArgumentError("empty simulated ensemble");
        for (const auto& p : ens)
            if (p.size() != grid.size()) throw GridAlignmentError("simulated paths do not match the level grid");
        const auto bands = path_bands(ens, quantile_level);

        LevelEr le;
        le.stress = level.stress;
        double sm = 0.0, su = 0.0, sl = 0.0;
        std::size_t nm = 0, nu = 0, nl = 0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            double mean = 0.0, hi = level.units.front().values[j], lo = hi;
            for (const auto& u : level.units) {
                mean += u.values[j];
                hi = std::max(hi, u.values[j]);
                lo = std::min(lo, u.values[j]);
            }
            mean /= static_cast<double>(level.units.size());
            auto term = [&](double pred, double obs, double& sum, std::size_t& n) {
                if (std::abs(obs) < kTiny) {
                    ++le.skipped;
                    return;
                }
                sum += std::abs(pred - obs) / std::abs(obs);
                ++n;
            };
            term(bands.mean[j], mean, sm, nm);
            term(bands.upper[j], hi, su, nu);
            term(bands.lower[j], lo, sl, nl);
        }
        le.er_mean = nm ? sm / static_cast<double>(nm) : 0.0;
        le.er_upper = nu ? su / static_cast<double>(nu) : 0.0;
        le.er_lower = nl ? sl / static_cast<double>(nl) : 0.0;
        rep.er_mean += le.er_mean;
        rep.er_upper += le.er_upper;
        rep.er_lower += le.er_lower;
        rep.skipped += le.skipped;
        rep.levels.push_back(le);
    }
    const double k = static_cast<double>(rep.levels.size());
    rep.er_mean /= k;
    rep.er_upper /= k;
    rep.er_lower /= k;
    return rep;
}

/// Simulates `n_paths` exact paths on each level's grid; level l uses substream (seed, l).
inline LevelEnsembles simulate_level_ensembles(const Theta& theta, const AdtDataset& data, std::size_t n_paths,
                                               std::uint64_t seed) {
    LevelEnsembles out;
    for (std::size_t l = 0; l < data.levels.size(); ++l)
        out.push_back(simulate_paths_exact(theta, data.s_star(l), common_grid(data.levels[l]), n_paths,
                                           substream_seed(seed, {l})));
    return out;
}

struct ResidualRow {
    double stress = 0.0;
    std::string unit;
    double time = 0.0;
    double value = 0.0;
    double fitted = 0.0;    // posterior-mean drift times psi
    double residual = 0.0;  // value - fitted
    double whitened = 0.0;  // i.i.d. N(0, 1) under the fitted marginal model
};

/// Per-observation residuals. `whitened` applies the inverse Cholesky factor of the
/// marginal covariance sigma2 S + sigma_a2 psi psi' to x - mu_a psi.
inline std::vector<ResidualRow> residual_diagnostics(const Theta& theta, const AdtDataset& data) {
    data.validate();
    theta.validate();
    std::vector<ResidualRow> rows;
    for (std::size_t l = 0; l < data.levels.size(); ++l) {
        const double s_star = data.s_star(l);
        for (const auto& u : data.levels[l].units) {
            const auto psi = basis_vector(theta, s_star, u.times);
            const auto post = posterior_drift(theta, u.values, u.times, s_star);
            const auto n = static_cast<Eigen::Index>(u.size());
            Eigen::MatrixXd c = theta.sigma2 * fbm_covariance(u.times, theta.h).matrix;
            const Eigen::Map<const Eigen::VectorXd> p(psi.data(), n);
            c.noalias() += theta.sigma_a2 * p * p.transpose();
            Eigen::VectorXd d(n);
            for (Eigen::Index j = 0; j < n; ++j) d(j) = u.values[j] - theta.mu_a * psi[j];
            const Eigen::MatrixXd lower = jittered_cholesky(c).lower();
            const Eigen::VectorXd w = lower.triangularView<Eigen::Lower>().solve(d);
            for (std::size_t j = 0; j < u.size(); ++j) {
                ResidualRow r;
                r.stress = data.levels[l].stress;
                r.unit = u.id;
                r.time = u.times[j];
                r.value = u.values[j];
                r.fitted = post.mu * psi[j];
                r.residual = r.value - r.fitted;
                r.whitened = w(static_cast<Eigen::Index>(j));
                rows.push_back(std::move(r));
            }
        }
    }
    return rows;
}

enum class HeldOut { LowestStress, HighestStress };

inline std::string_view to_string(HeldOut h) { return h == HeldOut::LowestStress ? "lowest_stress" : "highest_stress"; }

inline HeldOut parse_held_out(std::string_view s) {
    if (s == "lowest_stress" || s == "lowest") return HeldOut::LowestStress;
    if (s == "highest_stress" || s == "highest") return HeldOut::HighestStress;
    throw InvalidArgumentError("unknown held-out level '" + std::string(s) + "'");
}

struct CrossValPlan {
    HeldOut held_out = HeldOut::LowestStress;
    std::vector<std::size_t> training;
    std::size_t testing = 0;

    static CrossValPlan make(const AdtDataset& data, HeldOut h) {
        if (data.levels.size() < 2) throw InvalidArgumentError("cross-validation needs at least two stress levels");
        CrossValPlan p;
        p.held_out = h;
        p.testing = 0;
        for (std::size_t l = 1; l < data.levels.size(); ++l) {
            const bool better = h == HeldOut::LowestStress ? data.levels[l].stress < data.levels[p.testing].stress
                                                           : data.levels[l].stress > data.levels[p.testing].stress;
            if (better) p.testing = l;
        }
        for (std::size_t l = 0; l < data.levels.size(); ++l)
            if (l != p.testing) p.training.push_back(l);
        return p;
    }
};

struct CrossValResult {
    CrossValPlan plan;
    double test_stress = 0.0;
    FitResult fit;
    ErReport report;  // held-out level only
};

/// Fits on the training levels and scores the held-out level. The stress
/// normalization keeps the full-design spec, so the held-out s* is unchanged.
inline CrossValResult cross_validate(const AdtDataset& data, HeldOut held_out, Variant variant, FitMethod method,
                                     const EmOptions& opt, std::size_t n_paths, std::uint64_t seed) {
    data.validate();
    CrossValResult r;
    r.plan = CrossValPlan::make(data, held_out);
    const AdtDataset train = data.subset(r.plan.training);
    const AdtDataset test = data.subset({r.plan.testing});
    r.test_stress = test.levels.front().stress;
    r.fit = fit(train, variant, method, opt);
    r.report = er_indices(test, simulate_level_ensembles(r.fit.theta_hat, test, n_paths, seed));
    return r;
}

}  // namespace fbmadt
