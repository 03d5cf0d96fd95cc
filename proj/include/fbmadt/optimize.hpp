// Box-constrained Nelder-Mead and a tensor grid scan.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace fbmadt::optim {

using Point = std::vector<double>;
using Objective = std::function<double(const Point&)>;

struct Box {
    Point lower;
    Point upper;

    Point project(Point x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
        return x;
    }
};

struct NelderMeadOptions {
    Point initial_step;            // per-coordinate simplex edge
    double f_tol = 1e-10;          // absolute spread of simplex values
    double x_tol = 1e-9;           // simplex diameter relative to box width
    std::size_t max_evals = 4000;
    std::size_t restarts = 1;      // re-seed the simplex around the optimum
};

struct Minimum {
    Point x;
    double f = std::numeric_limits<double>::infinity();
    std::size_t evals = 0;
    bool converged = false;
};

/// Minimizes f over the box. Trial points are projected onto the box, so the
/// result always satisfies the bounds. Non-finite values count as +inf.
inline Minimum nelder_mead(const Objective& f, Point x0, const Box& box, const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    Minimum best;
    best.x = box.project(std::move(x0));

    auto eval = [&](const Point& x) {
        ++best.evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    best.f = eval(best.x);

    for (std::size_t round = 0; round <= opt.restarts; ++round) {
        std::vector<Point> simplex(n + 1, best.x);
        std::vector<double> fv(n + 1, best.f);
        for (std::size_t i = 0; i < n; ++i) {
            Point p = best.x;
            double step = opt.initial_step[i];
            if (p[i] + step > box.upper[i]) step = -step;
            p[i] = std::clamp(p[i] + step, box.lower[i], box.upper[i]);
            simplex[i + 1] = p;
            fv[i + 1] = eval(p);
        }

        std::vector<std::size_t> order(n + 1);
        bool converged = false;
        while (best.evals < opt.max_evals) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
            const auto lo = order.front(), hi = order.back(), second = order[n - 1];

            double diam = 0.0;
            for (std::size_t k = 1; k <= n; ++k)
                for (std::size_t i = 0; i < n; ++i) {
                    const double w = std::max(box.upper[i] - box.lower[i], 1e-300);
                    diam = std::max(diam, std::abs(simplex[order[k]][i] - simplex[lo][i]) / w);
                }
            const bool flat = std::isfinite(fv[hi]) && fv[hi] - fv[lo] <= opt.f_tol;
            if (flat || diam <= opt.x_tol) {
                converged = true;
                break;
            }

            Point centroid(n, 0.0);
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[order[k]][i] / static_cast<double>(n);

            auto along = [&](double coef) {
                Point p(n);
                for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + coef * (simplex[hi][i] - centroid[i]);
                return box.project(std::move(p));
            };

            Point xr = along(-1.0);
            const double fr = eval(xr);
            if (fr < fv[lo]) {
                Point xe = along(-2.0);
                const double fe = eval(xe);
                if (fe < fr) {
                    simplex[hi] = std::move(xe);
                    fv[hi] = fe;
                } else {
                    simplex[hi] = std::move(xr);
                    fv[hi] = fr;
                }
            } else if (fr < fv[second]) {
                simplex[hi] = std::move(xr);
                fv[hi] = fr;
            } else {
                const bool outside = fr < fv[hi];
                Point xc = along(outside ? -0.5 : 0.5);
                const double fc = eval(xc);
                if (fc < std::min(fr, fv[hi])) {
                    simplex[hi] = std::move(xc);
                    fv[hi] = fc;
                } else {
                    for (std::size_t k = 1; k <= n; ++k) {
                        auto& p = simplex[order[k]];
                        for (std::size_t i = 0; i < n; ++i) p[i] = simplex[lo][i] + 0.5 * (p[i] - simplex[lo][i]);
                        p = box.project(std::move(p));
                        fv[order[k]] = eval(p);
                    }
                }
            }
        }

        const auto it = std::min_element(fv.begin(), fv.end());
        if (*it < best.f) {
            best.f = *it;
            best.x = simplex[static_cast<std::size_t>(it - fv.begin())];
        }
        best.converged = converged;
        if (best.evals >= opt.max_evals) break;
    }
    return best;
}

/// Evaluates f at every point of the tensor product of `axes`; returns the best.
inline Minimum grid_scan(const Objective& f, const std::vector<std::vector<double>>& axes) {
    Minimum best;
    Point x(axes.size());
    std::vector<std::size_t> idx(axes.size(), 0);
    for (const auto& a : axes)
        if (a.empty()) return best;
    while (true) {
        for (std::size_t i = 0; i < axes.size(); ++i) x[i] = axes[i][idx[i]];
        const double v = f(x);
        ++best.evals;
        if (std::isfinite(v) && v < best.f) {
            best.f = v;
            best.x = x;
        }
        std::size_t d = axes.size();
        while (d > 0) {
            --d;
            if (++idx[d] < axes[d].size()) break;
            idx[d] = 0;
            if (d == 0) return best;
        }
        if (axes.empty()) return best;
    }
}

/// lo, lo+step, ..., up to hi (inclusive within 1e-12).
inline std::vector<double> linspace_step(double lo, double hi, double step) {
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(std::min(v, hi));
    return out;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = 0.5 * (lo + hi);
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

}  // namespace fbmadt::optim
