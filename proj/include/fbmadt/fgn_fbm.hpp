// Fractional Brownian motion: exact covariance on arbitrary grids and
// fractional Gaussian noise sampling by circulant embedding.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "fbmadt/errors.hpp"
#include "fbmadt/random.hpp"

namespace fbmadt {

/// Hurst exponent, stored in [kMin, kMax].
class Hurst {
public:
    static constexpr double kMin = 1e-8;
    static constexpr double kMax = 1.0 - 1e-8;

    constexpr Hurst() = default;
    explicit Hurst(double h) : h_(h) {
        if (!(h > 0.0 && h < 1.0))
            throw DomainError("Hurst exponent must lie in (0, 1), got " + std::to_string(h));
        h_ = std::clamp(h, kMin, kMax);
    }

    /// Projects any real onto the admissible range.
    static Hurst clamped(double h) {
        Hurst out;
        out.h_ = std::isnan(h) ? 0.5 : std::clamp(h, kMin, kMax);
        return out;
    }

    constexpr double value() const noexcept { return h_; }
    friend constexpr bool operator==(Hurst, Hurst) = default;

private:
    double h_ = 0.5;
};

/// Strictly increasing, non-negative sequence of times (hours).
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> times) : t_(std::move(times)) {
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (!(t_[i] >= 0.0) || !std::isfinite(t_[i]))
                throw InvalidGridError("time grid entry " + std::to_string(i) + " is negative or not finite");
            if (i > 0 && !(t_[i] > t_[i - 1]))
                throw InvalidGridError("time grid is not strictly increasing at index " + std::to_string(i));
        }
    }

    /// {0, step, 2*step, ..., n_steps*step}
    static TimeGrid uniform(double step, std::size_t n_steps) {
        if (!(step > 0.0)) throw InvalidGridError("uniform grid step must be positive");
        std::vector<double> t(n_steps + 1);
        for (std::size_t i = 0; i <= n_steps; ++i) t[i] = step * static_cast<double>(i);
        return TimeGrid(std::move(t));
    }

    std::size_t size() const noexcept { return t_.size(); }
    bool empty() const noexcept { return t_.empty(); }
    double operator[](std::size_t i) const { return t_[i]; }
    double front() const { return t_.front(); }
    double back() const { return t_.back(); }
    const std::vector<double>& values() const noexcept { return t_; }
    auto begin() const noexcept { return t_.begin(); }
    auto end() const noexcept { return t_.end(); }

    /// True when the grid starts at 0 and has a constant step (relative tolerance 1e-9).
    bool is_uniform_from_zero() const {
        if (t_.size() < 2 || t_[0] != 0.0) return false;
        const double step = t_[1];
        for (std::size_t i = 1; i < t_.size(); ++i)
            if (std::abs(t_[i] - step * static_cast<double>(i)) > 1e-9 * std::max(1.0, t_[i])) return false;
        return true;
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::vector<double> t_;
};

/// Covariance of sigma * B_H on a grid.
struct FbmCovariance {
    Eigen::MatrixXd matrix;
    TimeGrid grid;
    Hurst h;
    double sigma2 = 1.0;
};

/// Cholesky factor with the jitter that was needed to obtain it.
struct CholeskyFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;

    Eigen::MatrixXd lower() const { return llt.matrixL(); }

    double log_det() const {
        const auto& l = llt.matrixLLT();
        double s = 0.0;
        for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
        return 2.0 * s;
    }
};

/// LLT with a jitter ladder of 0, 1e-12, 1e-10, 1e-8 times the mean diagonal.
inline CholeskyFactor jittered_cholesky(const Eigen::MatrixXd& a) {
    const double mean_diag = a.diagonal().mean();
    for (double rel : {0.0, 1e-12, 1e-10, 1e-8}) {
        CholeskyFactor f;
        f.jitter = rel * mean_diag;
        if (rel == 0.0) {
            f.llt.compute(a);
        } else {
            Eigen::MatrixXd b = a;
            b.diagonal().array() += f.jitter;
            f.llt.compute(b);
        }
        if (f.llt.info() == Eigen::Success) {
            const auto& l = f.llt.matrixLLT();
            bool ok = true;
            for (Eigen::Index i = 0; i < l.rows() && ok; ++i) ok = l(i, i) > 0.0 && std::isfinite(l(i, i));
            if (ok) return f;
        }
    }
    throw ConditioningError("Cholesky factorization failed after maximum jitter (matrix size " +
                            std::to_string(a.rows()) + ")");
}

/// Entry (u,v) = (sigma2/2)(t_u^{2H} + t_v^{2H} - |t_u - t_v|^{2H}).
inline FbmCovariance fbm_covariance(const TimeGrid& grid, Hurst h, double sigma2 = 1.0) {
    if (grid.empty()) throw InvalidGridError("covariance requested on an empty grid");
    if (!(grid.front() > 0.0)) throw InvalidGridError("observation grid times must be > 0");
    if (!(sigma2 > 0.0)) throw DomainError("diffusion variance must be positive");

    const auto m = static_cast<Eigen::Index>(grid.size());
    const double two_h = 2.0 * h.value();
    std::vector<double> pw(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) pw[i] = std::pow(grid[i], two_h);

    Eigen::MatrixXd q(m, m);
    for (Eigen::Index u = 0; u < m; ++u) {
        q(u, u) = sigma2 * pw[u];
        for (Eigen::Index v = 0; v < u; ++v) {
            const double lag = std::pow(grid[u] - grid[v], two_h);
            q(u, v) = q(v, u) = 0.5 * sigma2 * (pw[u] + pw[v] - lag);
        }
    }
    return FbmCovariance{std::move(q), grid, h, sigma2};
}

/// Autocovariance of unit-step fGn scaled to step dt: (dt^{2H}/2)(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}).
inline double fgn_autocovariance(std::size_t k, double dt, Hurst h) {
    const double two_h = 2.0 * h.value();
    const double kk = static_cast<double>(k);
    const double lagged = k == 0 ? 1.0 : std::pow(kk - 1.0, two_h);
    const double g = 0.5 * (std::pow(kk + 1.0, two_h) - 2.0 * std::pow(kk, two_h) + lagged);
    return std::pow(dt, two_h) * g;
}

/// Reusable Davies-Harte sampler for a fixed (n_steps, dt, H).
///
/// The first row of the covariance is embedded into a circulant of size
/// M = 2N (N = next power of two >= n_steps); its eigenvalues come from one
/// FFT. A draw fills a Hermitian-symmetric spectrum with M real normals and
/// takes one real inverse FFT. Eigenvalues below -1e-10 * max make exact
/// embedding impossible and the sampler switches to Cholesky sampling of
/// the Toeplitz covariance.
class FgnSampler {
public:
    FgnSampler(std::size_t n_steps, double dt, Hurst h) : n_(n_steps), dt_(dt), h_(h) {
        if (n_steps < 1) throw InvalidArgumentError("fGn needs at least one step");
        if (!(dt > 0.0)) throw InvalidGridError("fGn step must be positive");

        std::size_t half = 1;
        while (half < n_) half <<= 1;
        m_ = 2 * half;

        std::vector<std::complex<double>> row(m_);
        for (std::size_t k = 0; k <= half; ++k) row[k] = fgn_autocovariance(k, dt_, h_);
        for (std::size_t k = half + 1; k < m_; ++k) row[k] = row[m_ - k];

        std::vector<std::complex<double>> eig;
        fft_.fwd(eig, row);

        double max_eig = 0.0;
        for (const auto& e : eig) max_eig = std::max(max_eig, e.real());
        const double m = static_cast<double>(m_);
        scale_.resize(half + 1);
        for (std::size_t k = 0; k <= half; ++k) {
            double lam = eig[k].real();
            if (lam < -1e-10 * max_eig) {
                use_cholesky_ = true;
                break;
            }
            lam = std::max(lam, 0.0);
            const bool edge = k == 0 || k == half;
            scale_[k] = std::sqrt(lam / (edge ? m : 2.0 * m));
        }
        if (use_cholesky_) build_cholesky();
        fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    }

    std::size_t n_steps() const noexcept { return n_; }
    bool uses_cholesky_fallback() const noexcept { return use_cholesky_; }

    /// Draws n_steps increments into `out`.
    void sample(Rng& rng, std::span<double> out) const {
        if (out.size() != n_) throw InvalidArgumentError("fGn output span has the wrong length");
        std::normal_distribution<double> nd(0.0, 1.0);
        if (use_cholesky_) {
            Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
            for (auto& v : z) v = nd(rng);
            Eigen::VectorXd y = chol_lower_ * z;
            for (std::size_t i = 0; i < n_; ++i) out[i] = y(static_cast<Eigen::Index>(i));
            return;
        }
        const std::size_t half = m_ / 2;
        spectrum_.resize(half + 1);
        real_out_.resize(m_);
        spectrum_[0] = scale_[0] * nd(rng);
        spectrum_[half] = scale_[half] * nd(rng);
        for (std::size_t k = 1; k < half; ++k) {
            const double re = nd(rng);
            const double im = nd(rng);
            spectrum_[k] = scale_[k] * std::complex<double>(re, im);
        }
        fft_.inv(real_out_.data(), spectrum_.data(), static_cast<Eigen::Index>(m_));
        std::copy_n(real_out_.begin(), n_, out.begin());
    }

    std::vector<double> sample(Rng& rng) const {
        std::vector<double> out(n_);
        sample(rng, out);
        return out;
    }

private:
    void build_cholesky() {
        const auto n = static_cast<Eigen::Index>(n_);
        Eigen::MatrixXd c(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                c(i, j) = fgn_autocovariance(static_cast<std::size_t>(std::abs(i - j)), dt_, h_);
        chol_lower_ = jittered_cholesky(c).lower();
    }

    std::size_t n_;
    double dt_;
    Hurst h_;
    std::size_t m_ = 0;
    std::vector<double> scale_;
    bool use_cholesky_ = false;
    Eigen::MatrixXd chol_lower_;
    mutable Eigen::FFT<double> fft_;
    mutable std::vector<std::complex<double>> spectrum_;
    mutable std::vector<double> real_out_;
};

/// n_steps zero-mean fGn increments with step dt.
inline std::vector<double> simulate_fgn(std::size_t n_steps, double dt, Hurst h, Rng& rng) {
    return FgnSampler(n_steps, dt, h).sample(rng);
}

/// Standard FBM on a uniform grid starting at 0; path[0] == 0.
inline std::vector<double> simulate_fbm_path(const TimeGrid& grid, Hurst h, Rng& rng) {
    if (!grid.is_uniform_from_zero())
        throw InvalidGridError("FFT path simulation needs a uniform grid starting at 0; "
                               "use sample_fbm_exact for irregular grids");
    const auto inc = simulate_fgn(grid.size() - 1, grid[1], h, rng);
    std::vector<double> path(grid.size(), 0.0);
    std::partial_sum(inc.begin(), inc.end(), path.begin() + 1);
    return path;
}

/// Exact standard FBM values on an arbitrary positive grid via Cholesky.
inline std::vector<double> sample_fbm_exact(const Eigen::MatrixXd& chol_lower, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd z(chol_lower.rows());
    for (auto& v : z) v = nd(rng);
    Eigen::VectorXd y = chol_lower.triangularView<Eigen::Lower>() * z;
    return {y.begin(), y.end()};
}

inline std::vector<double> sample_fbm_exact(const TimeGrid& grid, Hurst h, Rng& rng) {
    return sample_fbm_exact(jittered_cholesky(fbm_covariance(grid, h).matrix).lower(), rng);
}

}  // namespace fbmadt
