// Degradation model X(s,t) = a exp(alpha1 s*) t^beta + sigma B_H(t),
// a ~ N(mu_a, sigma_a^2), with its three degenerate variants and the
// acceleration-model stress normalization.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "fbmadt/errors.hpp"
#include "fbmadt/fgn_fbm.hpp"

namespace fbmadt {

enum class AccelerationKind { Arrhenius, PowerLaw, Exponential };

inline constexpr double kCelsiusToKelvin = 273.15;

inline std::string_view to_string(AccelerationKind k) {
    switch (k) {
        case AccelerationKind::Arrhenius: return "arrhenius";
        case AccelerationKind::PowerLaw: return "power_law";
        case AccelerationKind::Exponential: return "exponential";
    }
    return "?";
}

inline AccelerationKind parse_acceleration_kind(std::string_view s) {
    if (s == "arrhenius") return AccelerationKind::Arrhenius;
    if (s == "power_law" || s == "powerlaw") return AccelerationKind::PowerLaw;
    if (s == "exponential") return AccelerationKind::Exponential;
    throw InvalidArgumentError("unknown acceleration model '" + std::string(s) + "'");
}

/// Acceleration model plus the normal (s0) and highest (sH) stress, native units.
/// Arrhenius stresses are given in degrees Celsius.
struct StressSpec {
    AccelerationKind kind = AccelerationKind::Arrhenius;
    double s0 = 0.0;
    double s_high = 1.0;

    void validate() const {
        if (s0 == s_high) throw DomainError("normal and highest stress must differ");
        if (kind == AccelerationKind::Arrhenius) {
            if (!(s0 + kCelsiusToKelvin > 0.0) || !(s_high + kCelsiusToKelvin > 0.0))
                throw DomainError("Arrhenius stresses must be above absolute zero");
        } else if (kind == AccelerationKind::PowerLaw) {
            if (!(s0 > 0.0) || !(s_high > 0.0)) throw DomainError("power-law stresses must be positive");
        }
    }

    friend bool operator==(const StressSpec&, const StressSpec&) = default;
};

/// Standardized stress s*: 0 at s0, 1 at sH.
inline double normalize_stress(double s, const StressSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case AccelerationKind::Arrhenius: {
            const double k = s + kCelsiusToKelvin;
            if (!(k > 0.0)) throw DomainError("Arrhenius stress below absolute zero: " + std::to_string(s));
            const double k0 = spec.s0 + kCelsiusToKelvin;
            const double kh = spec.s_high + kCelsiusToKelvin;
            if (s == spec.s0) return 0.0;
            if (s == spec.s_high) return 1.0;
            return (1.0 / k0 - 1.0 / k) / (1.0 / k0 - 1.0 / kh);
        }
        case AccelerationKind::PowerLaw: {
            if (!(s > 0.0)) throw DomainError("power-law stress must be positive: " + std::to_string(s));
            if (s == spec.s0) return 0.0;
            if (s == spec.s_high) return 1.0;
            return (std::log(s) - std::log(spec.s0)) / (std::log(spec.s_high) - std::log(spec.s0));
        }
        case AccelerationKind::Exponential:
            if (s == spec.s0) return 0.0;
            if (s == spec.s_high) return 1.0;
            return (s - spec.s0) / (spec.s_high - spec.s0);
    }
    return 0.0;
}

/// M0 full model; M1 constant drift; M2 Brownian (H = 0.5); M3 both.
enum class Variant { M0, M1, M2, M3 };

inline constexpr bool has_random_drift(Variant v) { return v == Variant::M0 || v == Variant::M2; }
inline constexpr bool has_memory(Variant v) { return v == Variant::M0 || v == Variant::M1; }

/// Number of free parameters.
inline constexpr int n_params(Variant v) {
    switch (v) {
        case Variant::M0: return 6;
        case Variant::M1: return 5;
        case Variant::M2: return 5;
        case Variant::M3: return 4;
    }
    return 0;
}

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::M0: return "M0";
        case Variant::M1: return "M1";
        case Variant::M2: return "M2";
        case Variant::M3: return "M3";
    }
    return "?";
}

inline Variant parse_variant(std::string_view s) {
    if (s == "M0" || s == "m0") return Variant::M0;
    if (s == "M1" || s == "m1") return Variant::M1;
    if (s == "M2" || s == "m2") return Variant::M2;
    if (s == "M3" || s == "m3") return Variant::M3;
    throw InvalidArgumentError("unknown model variant '" + std::string(s) + "'");
}

/// Parameter vector [mu_a, sigma_a^2, alpha1, beta, sigma^2, H] and its variant.
struct Theta {
    double mu_a = 1.0;
    double sigma_a2 = 0.0;
    double alpha1 = 0.0;
    double beta = 1.0;
    double sigma2 = 1.0;
    Hurst h{};
    Variant variant = Variant::M0;

    /// Builds a Theta from standard-deviation-scale inputs, as parameter tables list them.
    static Theta from_sd(double mu_a, double sigma_a, double alpha1, double beta, double sigma, double h,
                         Variant v = Variant::M0) {
        Theta t{mu_a, sigma_a * sigma_a, alpha1, beta, sigma * sigma, Hurst::clamped(h), v};
        return t.enforce_variant();
    }

    double sigma_a() const { return std::sqrt(sigma_a2); }
    double sigma() const { return std::sqrt(sigma2); }

    /// Applies the variant masks: no UtUV => sigma_a2 = 0; no memory => H = 0.5.
    Theta enforce_variant() const {
        Theta t = *this;
        if (!has_random_drift(variant)) t.sigma_a2 = 0.0;
        if (!has_memory(variant)) t.h = Hurst(0.5);
        return t;
    }

    /// Simulation accepts sigma^2 = 0 (deterministic trend); likelihood work does not.
    void validate(bool allow_zero_noise = false) const {
        if (!std::isfinite(mu_a) || !std::isfinite(alpha1)) throw DomainError("theta has non-finite entries");
        if (!(sigma_a2 >= 0.0)) throw DomainError("sigma_a^2 must be non-negative");
        if (!(beta > 0.0)) throw DomainError("beta must be positive");
        if (!(sigma2 > 0.0 || (allow_zero_noise && sigma2 == 0.0))) throw DomainError("sigma^2 must be positive");
        if (!has_random_drift(variant) && sigma_a2 != 0.0)
            throw DomainError("variant " + std::string(to_string(variant)) + " requires sigma_a^2 = 0");
        if (!has_memory(variant) && h.value() != 0.5)
            throw DomainError("variant " + std::string(to_string(variant)) + " requires H = 0.5");
    }

    /// [mu_a, sigma_a2, alpha1, beta, sigma2, H]
    std::array<double, 6> as_array() const { return {mu_a, sigma_a2, alpha1, beta, sigma2, h.value()}; }

    friend bool operator==(const Theta&, const Theta&) = default;
};

struct DriftDistribution {
    double mu_e;
    double sigma_e;
};

/// Distribution of the degradation rate e(s) = a exp(alpha1 s*).
inline DriftDistribution drift_distribution(const Theta& theta, double s_star) {
    const double g = std::exp(theta.alpha1 * s_star);
    return {theta.mu_a * g, theta.sigma_a() * g};
}

/// Deterministic trend E[X(s,t)] = mu_e(s) t^beta.
inline double trend(const Theta& theta, double s_star, double t) {
    if (t < 0.0) throw DomainError("trend evaluated at negative time");
    return theta.mu_a * std::exp(theta.alpha1 * s_star) * std::pow(t, theta.beta);
}

/// psi_j = exp(alpha1 s*) t_j^beta
inline std::vector<double> basis_vector(double alpha1, double beta, double s_star, const TimeGrid& grid) {
    const double g = std::exp(alpha1 * s_star);
    std::vector<double> psi(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) psi[j] = g * std::pow(grid[j], beta);
    return psi;
}

inline std::vector<double> basis_vector(const Theta& theta, double s_star, const TimeGrid& grid) {
    return basis_vector(theta.alpha1, theta.beta, s_star, grid);
}

}  // namespace fbmadt
