// Synthetic constant-stress ADT datasets from a ground-truth parameter vector.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbmadt/adt_model.hpp"
#include "fbmadt/dataset.hpp"
#include "fbmadt/errors.hpp"
#include "fbmadt/fgn_fbm.hpp"
#include "fbmadt/random.hpp"

namespace fbmadt {

struct SimDesign {
    std::vector<double> stress_levels;
    double normal_stress = 0.0;
    std::optional<double> highest_stress;  // defaults to the largest test stress
    AccelerationKind acceleration = AccelerationKind::Arrhenius;
    std::size_t n_units_per_level = 1;
    std::size_t n_measurements = 1;
    double inspection_interval = 1.0;  // hours
    Theta theta_true{};
    std::uint64_t master_seed = 0;
    bool truncate_negative_drift = false;

    /// Temperatures 80/100/120 C, normal 40 C, Arrhenius, 100 h interval and
    /// (mu_a, sigma_a, alpha1, beta, sigma, H) = (1e-5, 2e-6, 2.5, 1.5, 0.1, 0.1).
    static SimDesign reference(std::size_t n_units, std::size_t n_measurements, std::uint64_t seed,
                               Variant variant = Variant::M0) {
        SimDesign d;
        d.stress_levels = {80.0, 100.0, 120.0};
        d.normal_stress = 40.0;
        d.acceleration = AccelerationKind::Arrhenius;
        d.n_units_per_level = n_units;
        d.n_measurements = n_measurements;
        d.inspection_interval = 100.0;
        d.theta_true = reference_theta(variant);
        d.master_seed = seed;
        return d;
    }

    static Theta reference_theta(Variant variant = Variant::M0) {
        return Theta::from_sd(1e-5, 2e-6, 2.5, 1.5, 0.1, 0.1, variant);
    }

    /// Failure threshold that accompanies the reference design.
    static constexpr double kReferenceThreshold = 5.0;

    StressSpec stress_spec() const {
        if (stress_levels.empty()) throw InvalidArgumentError("design has no stress levels");
        double hi = stress_levels.front();
        for (double s : stress_levels) hi = std::max(hi, s);
        return StressSpec{acceleration, normal_stress, highest_stress.value_or(hi)};
    }

    void validate() const {
        if (stress_levels.empty()) throw InvalidArgumentError("design has no stress levels");
        if (n_units_per_level < 1 || n_measurements < 1) throw InvalidArgumentError("design needs N >= 1 and M >= 1");
        if (!(inspection_interval > 0.0)) throw InvalidArgumentError("inspection interval must be positive");
        stress_spec().validate();
        theta_true.validate(true);
    }
};

/// Unit i of level l gets substream (master_seed, l, i): first its drift, then the FBM values.
inline AdtDataset generate_dataset(const SimDesign& design) {
    design.validate();
    const Theta& th = design.theta_true;

    std::vector<double> t(design.n_measurements);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = design.inspection_interval * static_cast<double>(j + 1);
    const TimeGrid grid(std::move(t));
    const Eigen::MatrixXd lower = jittered_cholesky(fbm_covariance(grid, th.h).matrix).lower();

    AdtDataset data;
    data.stress_spec = design.stress_spec();
    for (std::size_t l = 0; l < design.stress_levels.size(); ++l) {
        StressLevel level;
        level.stress = design.stress_levels[l];
        const double s_star = normalize_stress(level.stress, data.stress_spec);
        const auto psi = basis_vector(th, s_star, grid);
        for (std::size_t i = 0; i < design.n_units_per_level; ++i) {
            Rng rng = make_stream(design.master_seed, {l, i});
            double a = th.mu_a;
            if (th.sigma_a2 > 0.0) {
                std::normal_distribution<double> nd(th.mu_a, th.sigma_a());
                a = nd(rng);
                if (design.truncate_negative_drift)
                    for (int k = 0; a < 0.0 && k < 1000; ++k) a = nd(rng);
            }
            const auto b = sample_fbm_exact(lower, rng);
            UnitSeries u;
            u.id = "u" + std::to_string(i + 1);
            u.times = grid;
            u.values.resize(grid.size());
            for (std::size_t j = 0; j < grid.size(); ++j) u.values[j] = a * psi[j] + th.sigma() * b[j];
            level.units.push_back(std::move(u));
        }
        data.levels.push_back(std::move(level));
    }
    return data;
}

}  // namespace fbmadt
