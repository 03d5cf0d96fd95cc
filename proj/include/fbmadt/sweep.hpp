// Estimator study over a list of (N, M) designs: generate, fit with each
// method, score against the truth.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbmadt/evaluation.hpp"
#include "fbmadt/inference.hpp"
#include "fbmadt/random.hpp"
#include "fbmadt/simulator.hpp"

namespace fbmadt {

struct DesignSize {
    std::size_t n_units = 1;
    std::size_t n_measurements = 1;
    friend bool operator==(const DesignSize&, const DesignSize&) = default;
};

struct SweepRow {
    DesignSize design;
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    FitMethod method = FitMethod::Em;
    std::optional<FitResult> fit;  // empty when the fit failed
    double re = 0.0;
    std::string error;             // "kind: message" of a failed fit
};

struct SweepSummary {
    DesignSize design;
    FitMethod method = FitMethod::Em;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    double median_re = 0.0;
    double median_l_max = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summaries;
    // Filled only when both EM and two-step were requested.
    std::size_t em_l_max_wins = 0;    // replications with l_max(EM) >= l_max(two-step) - 1e-6
    std::size_t paired_runs = 0;
    std::size_t em_re_design_wins = 0;  // designs with median RE(EM) < median RE(two-step)
    std::size_t designs_compared = 0;
};

struct SweepOptions {
    Theta theta_true = SimDesign::reference_theta();
    std::uint64_t base_seed = 0;
    EmOptions em{};
    double l_max_slack = 1e-6;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

/// Replication r of design (N, M) uses dataset seed substream(base_seed, N, M, r).
/// When EM and two-step are both requested, EM starts from that run's two-step fit.
inline SweepReport run_design_sweep(const std::vector<DesignSize>& designs, std::size_t replications,
                                    const std::vector<FitMethod>& methods, const SweepOptions& opt = {}) {
    if (replications < 1) throw InvalidArgumentError("sweep needs at least one replication");
    if (designs.empty() || methods.empty()) throw InvalidArgumentError("sweep needs designs and methods");
    const Variant variant = opt.theta_true.variant;
    const bool paired = std::ranges::count(methods, FitMethod::Em) > 0 &&
                        std::ranges::count(methods, FitMethod::TwoStep) > 0 && has_random_drift(variant);

    SweepReport rep;
    for (const auto& d : designs) {
        for (std::size_t r = 0; r < replications; ++r) {
            const std::uint64_t seed = substream_seed(opt.base_seed, {d.n_units, d.n_measurements, r});
            SimDesign sd = SimDesign::reference(d.n_units, d.n_measurements, seed, variant);
            sd.theta_true = opt.theta_true;
            const AdtDataset data = generate_dataset(sd);

            std::optional<FitResult> two_step;
            for (FitMethod m : methods) {
                SweepRow row{d, r, seed, m, std::nullopt, 0.0, {}};
                try {
                    if (m == FitMethod::Em && paired && two_step)
                        row.fit = em_fit(data, two_step->theta_hat, opt.em);
                    else
                        row.fit = fit(data, variant, m, opt.em);
                    if (m == FitMethod::TwoStep) two_step = row.fit;
                    row.re = relative_error(row.fit->theta_hat, opt.theta_true);
                } catch (const Error& e) {
                    row.fit.reset();
                    row.error = std::string(e.kind()) + ": " + e.what();
                }
                rep.rows.push_back(std::move(row));
            }
        }
    }

    auto rows_of = [&](const DesignSize& d, FitMethod m) {
        std::vector<const SweepRow*> out;
        for (const auto& row : rep.rows)
            if (row.design == d && row.method == m) out.push_back(&row);
        return out;
    };
    for (const auto& d : designs) {
        for (FitMethod m : methods) {
            SweepSummary s{d, m, 0, 0, 0.0, 0.0};
            std::vector<double> re, ll;
            for (const auto* row : rows_of(d, m)) {
                if (!row->fit) {
                    ++s.n_failed;
                    continue;
                }
                ++s.n_ok;
                re.push_back(row->re);
                ll.push_back(row->fit->l_max);
            }
            s.median_re = median_of(re);
            s.median_l_max = median_of(ll);
            rep.summaries.push_back(s);
        }
        if (!paired) continue;
        const auto em = rows_of(d, FitMethod::Em), ts = rows_of(d, FitMethod::TwoStep);
        for (std::size_t r = 0; r < em.size(); ++r) {
            ++rep.paired_runs;
            if (em[r]->fit && ts[r]->fit && em[r]->fit->l_max >= ts[r]->fit->l_max - opt.l_max_slack)
                ++rep.em_l_max_wins;
        }
        double med_em = 0.0, med_ts = 0.0;
        for (const auto& s : rep.summaries) {
            if (!(s.design == d)) continue;
            if (s.method == FitMethod::Em) med_em = s.median_re;
            if (s.method == FitMethod::TwoStep) med_ts = s.median_re;
        }
        ++rep.designs_compared;
        if (med_em < med_ts) ++rep.em_re_design_wins;
    }
    return rep;
}

}  // namespace fbmadt
