// Constant-stress ADT observations grouped by stress level and unit.
#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "fbmadt/adt_model.hpp"
#include "fbmadt/errors.hpp"
#include "fbmadt/fgn_fbm.hpp"

namespace fbmadt {

struct UnitSeries {
    std::string id;
    TimeGrid times;  // hours, > 0
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const UnitSeries&, const UnitSeries&) = default;
};

struct StressLevel {
    double stress = 0.0;  // native units (degrees C for Arrhenius)
    std::vector<UnitSeries> units;
    friend bool operator==(const StressLevel&, const StressLevel&) = default;
};

struct AdtDataset {
    std::vector<StressLevel> levels;
    StressSpec stress_spec;

    void validate() const {
        if (levels.empty()) throw InvalidArgumentError("dataset has no stress levels");
        stress_spec.validate();
        for (const auto& lvl : levels) {
            if (lvl.units.empty())
                throw InvalidArgumentError("stress level " + std::to_string(lvl.stress) + " has no units");
            for (const auto& u : lvl.units) {
                if (u.values.empty()) throw InvalidArgumentError("unit '" + u.id + "' has no observations");
                if (u.values.size() != u.times.size())
                    throw InvalidArgumentError("unit '" + u.id + "' has mismatched time/value lengths");
                if (!(u.times.front() > 0.0))
                    throw InvalidGridError("unit '" + u.id + "' has a measurement at t <= 0");
            }
        }
    }

    std::size_t n_units() const {
        std::size_t n = 0;
        for (const auto& l : levels) n += l.units.size();
        return n;
    }

    std::size_t n_observations() const {
        std::size_t n = 0;
        for (const auto& l : levels)
            for (const auto& u : l.units) n += u.size();
        return n;
    }

    double s_star(std::size_t level) const { return normalize_stress(levels.at(level).stress, stress_spec); }

    /// Copy restricted to the given level indices; keeps the stress spec.
    AdtDataset subset(const std::vector<std::size_t>& level_idx) const {
        AdtDataset out;
        out.stress_spec = stress_spec;
        for (auto i : level_idx) out.levels.push_back(levels.at(i));
        return out;
    }

    friend bool operator==(const AdtDataset&, const AdtDataset&) = default;
};

/// Highest stress present in the levels.
inline double max_stress(const std::vector<StressLevel>& levels) {
    if (levels.empty()) throw InvalidArgumentError("no stress levels");
    double m = levels.front().stress;
    for (const auto& l : levels) m = std::max(m, l.stress);
    return m;
}

}  // namespace fbmadt
