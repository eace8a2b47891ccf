#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpbigan/data.hpp"
#include "cpbigan/errors.hpp"
#include "cpbigan/rng.hpp"

namespace cpbigan {

enum class Mechanism { mcar, mar, mnar };

inline const char* mechanism_name(Mechanism m) {
    switch (m) {
    case Mechanism::mcar: return "MCAR";
    case Mechanism::mar: return "MAR";
    case Mechanism::mnar: return "MNAR";
    }
    return "?";
}

inline Mechanism parse_mechanism(const std::string& s) {
    if (s == "MCAR" || s == "mcar") return Mechanism::mcar;
    if (s == "MAR" || s == "mar") return Mechanism::mar;
    if (s == "MNAR" || s == "mnar") return Mechanism::mnar;
    throw ConfigError("unknown missingness mechanism '" + s + "'");
}

struct MechanismSpec {
    Mechanism kind = Mechanism::mcar;
    double rate = 0.0;
    std::optional<int> driver_index; // MAR only
    double slope = 0.0;
    std::uint64_t seed = 0;
    /// Factor indices eligible for masking; empty means all (minus the MAR driver).
    std::vector<int> targets;

    void validate() const {
        if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("missingness rate must be in [0,1]");
        if (kind == Mechanism::mar) {
            if (!driver_index) throw ConfigError("MAR mechanism requires driver_index");
            if (*driver_index < 0 || *driver_index >= kNumFactors)
                throw ConfigError("MAR driver_index " + std::to_string(*driver_index) + " out of range");
        }
        for (int t : targets)
            if (t < 0 || t >= kNumFactors) throw ConfigError("missingness target index out of range");
    }
};

inline MechanismSpec mcar_spec(double rate, std::uint64_t seed = 0) {
    MechanismSpec s;
    s.rate = rate;
    s.seed = seed;
    return s;
}

/// The in-house style MNAR preset: report-derived factors (size, spiculation,
/// lobe) go missing preferentially, larger values more often.
inline MechanismSpec inhouse_mnar_preset(double rate, std::uint64_t seed) {
    MechanismSpec s;
    s.kind = Mechanism::mnar;
    s.rate = rate;
    s.slope = 2.0;
    s.seed = seed;
    s.targets = {kSizeFactor, kSpiculationFactor, kLobeFactor};
    return s;
}

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Intercept b with mean_i logistic(slope*v_i + b) = rate, by bisection to
/// 1e-3 in expected fraction or better.
inline double calibrate_intercept(std::span<const double> values, double slope, double rate) {
    if (values.empty()) return 0.0;
    if (rate <= 0.0) return -INFINITY;
    if (rate >= 1.0) return INFINITY;
    auto expected = [&](double b) {
        double s = 0;
        for (double v : values) s += logistic(slope * v + b);
        return s / static_cast<double>(values.size());
    };
    double lo = -50.0, hi = 50.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double e = expected(mid);
        if (std::abs(e - rate) < 1e-7) return mid;
        (e < rate ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Each entry independently 0 with probability `rate`.
inline MissingMask mcar_mask(std::size_t size, double rate, std::uint64_t seed, std::uint64_t stream = 0) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("mcar_mask: rate must be in [0,1]");
    Philox rng(seed, stream);
    MissingMask m(size);
    for (auto& b : m) b = rng.bernoulli(rate) ? 0 : 1;
    return m;
}

namespace detail {

inline bool is_target(const MechanismSpec& spec, int j) {
    if (spec.kind == Mechanism::mar && spec.driver_index && *spec.driver_index == j) return false;
    if (spec.targets.empty()) return true;
    for (int t : spec.targets)
        if (t == j) return true;
    return false;
}

/// Per-record uniform stream so masks do not depend on record order.
inline Philox record_stream(const MechanismSpec& spec, const MultiModalRecord& r) {
    return Philox(derive_seed(spec.seed, {"factor-mask"}), r.id);
}

} // namespace detail

/// Intercept for a MAR/MNAR spec calibrated on a cohort; slope acts on the
/// driver value (MAR) or on each entry's own value (MNAR).
inline double fit_intercept(std::span<const MultiModalRecord> cohort, const MechanismSpec& spec) {
    spec.validate();
    std::vector<double> vals;
    for (const auto& r : cohort) {
        for (int j = 0; j < kNumFactors; ++j) {
            if (!detail::is_target(spec, j)) continue;
            if (spec.kind == Mechanism::mar) vals.push_back(r.factors.values[static_cast<std::size_t>(*spec.driver_index)]);
            else if (spec.kind == Mechanism::mnar) vals.push_back(r.factors.values[static_cast<std::size_t>(j)]);
            else vals.push_back(0.0);
        }
    }
    return calibrate_intercept(vals, spec.kind == Mechanism::mcar ? 0.0 : spec.slope, spec.rate);
}

/// Mask for one record given an already-calibrated intercept. Entries that
/// are already missing stay missing.
inline MissingMask factor_mask(const MultiModalRecord& r, const MechanismSpec& spec, double intercept) {
    auto rng = detail::record_stream(spec, r);
    MissingMask m = r.factors.mask;
    for (int j = 0; j < kNumFactors; ++j) {
        const double u = rng.uniform(); // drawn for every entry to keep streams aligned
        if (!detail::is_target(spec, j)) continue;
        double p = spec.rate;
        if (spec.kind == Mechanism::mar)
            p = logistic(spec.slope * r.factors.values[static_cast<std::size_t>(*spec.driver_index)] + intercept);
        else if (spec.kind == Mechanism::mnar)
            p = logistic(spec.slope * r.factors.values[static_cast<std::size_t>(j)] + intercept);
        if (u < p) m[static_cast<std::size_t>(j)] = 0;
    }
    return m;
}

inline MissingMask mar_mask(const MultiModalRecord& r, const MechanismSpec& spec, double intercept) {
    if (spec.kind != Mechanism::mar) throw ConfigError("mar_mask: spec is not MAR");
    spec.validate();
    return factor_mask(r, spec, intercept);
}

inline MissingMask mnar_mask(const MultiModalRecord& r, const MechanismSpec& spec, double intercept) {
    if (spec.kind != Mechanism::mnar) throw ConfigError("mnar_mask: spec is not MNAR");
    spec.validate();
    return factor_mask(r, spec, intercept);
}

/// Applies the factor mechanism to a whole cohort (intercept calibrated on it).
inline std::vector<MultiModalRecord> corrupt_factors(std::span<const MultiModalRecord> cohort, const MechanismSpec& spec) {
    spec.validate();
    const double b = spec.kind == Mechanism::mcar ? 0.0 : fit_intercept(cohort, spec);
    std::vector<MultiModalRecord> out(cohort.begin(), cohort.end());
    for (auto& r : out) r.factors.mask = factor_mask(r, spec, b);
    return out;
}

/// Whole-image removal of the current timepoint with probability `rate`.
inline MultiModalRecord drop_tp1(double rate, std::uint64_t seed, const MultiModalRecord& r) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("drop_tp1: rate must be in [0,1]");
    MultiModalRecord out = r;
    Philox rng(derive_seed(seed, {"tp1-drop"}), r.id);
    if (rng.bernoulli(rate)) out.images.tp1_present = false;
    return out;
}

/// Masks for the adversarial fake branch. Entry-wise Bernoulli at the
/// mechanism's marginal rate, which is exact for MCAR.
inline MissingMask sample_fake_mask(const MechanismSpec& spec, std::size_t size, std::uint64_t seed,
                                    std::uint64_t stream = 0) {
    return mcar_mask(size, spec.rate, derive_seed(seed, {"fake-mask"}), stream);
}

} // namespace cpbigan
