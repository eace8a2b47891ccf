#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cpbigan/data.hpp"
#include "cpbigan/errors.hpp"
#include "cpbigan/rng.hpp"

// Synthetic paired-modality cohort.
//
// Generative story (all constants below are artifact choices):
//   y            ~ Bernoulli(class_balance)
//   u            ~ N(0,1), subject-level severity shared by size and spiculation
//   nodule_size  = 6 + 4*s*y + 4*k*(0.8u + 0.6e1)       [mm]
//   spiculation  = 2 + 1.5*s*y + 1.5*k*(0.8u + 0.6e2)   [ordinal-ish, 1..5]
//   pack_years   = 30 + 25*U(0,1) + 4*s*y
//   growth       = 0.5*y + 0.75*k*|e3|                  [mm, tp0 size = size - growth]
// with s = signal_strength, k = noise_scale. The other eleven factors are
// nuisance draws independent of y. Pack-years is never rendered, so the
// factor vector holds signal the images lack.
//
// Images: seeded value-noise background (identical for tp0 and tp1) plus a
// centred blob whose radius follows the reference-normalised size, whose
// boundary carries a 7-lobed sinusoidal perturbation scaled by spiculation,
// and whose contrast is slightly higher for y = 1. Each timepoint then gets
// independent acquisition noise of std 0.03*k.

namespace cpbigan {

struct GeneratorConfig {
    int n = 1000;
    double class_balance = 0.5;
    double noise_scale = 1.0;
    double signal_strength = 1.4;
    std::uint64_t seed = 1;

    void validate() const {
        if (n < 1) throw ConfigError("generator.n must be >= 1");
        if (!(class_balance > 0 && class_balance < 1)) throw ConfigError("generator.class_balance must be in (0,1)");
        if (!(noise_scale >= 0) || !std::isfinite(noise_scale)) throw ConfigError("generator.noise_scale must be >= 0");
        if (!(signal_strength >= 0) || !std::isfinite(signal_strength))
            throw ConfigError("generator.signal_strength must be >= 0");
    }
};

/// Rendering constants for the nodule phantom.
struct RenderConfig {
    double min_radius = 2.0;  // px, at reference-normalised size 0
    double max_radius = 7.0;  // px, at reference-normalised size 1
    double lobe_amplitude = 0.25; // relative radius modulation at spiculation 1
    int lobes = 7;
    double edge_softness = 0.5; // px
    double contrast = 0.55;
    double contrast_malignant = 0.02; // added when y = 1
    double background_level = 0.15;
    double background_amplitude = 0.2;
    double growth_noise = 0.75; // mm, scaled by noise_scale
    double noise_scale = 1.0;
};

enum class Timepoint { tp0, tp1 };

/// Reference ranges used to scale raw factors before rendering. Independent of
/// any split so images can be rendered before the cohort is split.
inline const NormalizationStats& reference_stats() {
    static const NormalizationStats s = [] {
        NormalizationStats r;
        r.min = {55, 0, 1, 15, 0, 0, 0, 10, 0, 0, 0, 2, 1, 0};
        r.max = {75, 1, 7, 40, 5, 15, 1, 60, 1, 1, 1, 16, 5, 1};
        r.mean.resize(kNumFactors);
        for (int j = 0; j < kNumFactors; ++j) r.mean[j] = 0.5 * (r.min[j] + r.max[j]);
        return r;
    }();
    return s;
}

inline double size_formula(double signal, int y, double noise_scale, double u, double e) {
    return 6.0 + 4.0 * signal * y + 4.0 * noise_scale * (0.8 * u + 0.6 * e);
}

inline double spiculation_formula(double signal, int y, double noise_scale, double u, double e) {
    return 2.0 + 1.5 * signal * y + 1.5 * noise_scale * (0.8 * u + 0.6 * e);
}

namespace detail {

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Two-octave value noise in [0, 1] on the 32x32 grid.
inline std::vector<double> value_noise(std::uint64_t seed) {
    std::vector<double> out(kImagePixels, 0.0);
    double total = 0;
    const std::array<int, 2> cells = {4, 8};
    const std::array<double, 2> weights = {0.65, 0.35};
    for (int o = 0; o < 2; ++o) {
        const int g = cells[o] + 1;
        Philox rng(seed, static_cast<std::uint64_t>(o));
        std::vector<double> lattice(static_cast<std::size_t>(g * g));
        for (auto& v : lattice) v = rng.uniform();
        const double step = static_cast<double>(kImageSide) / cells[o];
        for (int r = 0; r < kImageSide; ++r) {
            for (int c = 0; c < kImageSide; ++c) {
                const double fy = (r + 0.5) / step, fx = (c + 0.5) / step;
                const int iy = std::min(static_cast<int>(fy), cells[o] - 1), ix = std::min(static_cast<int>(fx), cells[o] - 1);
                const double ty = smoothstep(fy - iy), tx = smoothstep(fx - ix);
                auto L = [&](int a, int b) { return lattice[static_cast<std::size_t>(a * g + b)]; };
                const double top = L(iy, ix) * (1 - tx) + L(iy, ix + 1) * tx;
                const double bot = L(iy + 1, ix) * (1 - tx) + L(iy + 1, ix + 1) * tx;
                out[static_cast<std::size_t>(r * kImageSide + c)] += weights[o] * (top * (1 - ty) + bot * ty);
            }
        }
        total += weights[o];
    }
    for (auto& v : out) v /= total;
    return out;
}

/// Non-class growth jitter, a deterministic function of the background seed.
inline double growth_jitter(std::uint64_t background_seed) {
    Philox rng(background_seed, 7);
    return std::abs(rng.normal());
}

} // namespace detail

/// Blob radius in pixels for a reference-normalised size in [0, 1].
inline double blob_radius(double size_norm, const RenderConfig& rc = {}) {
    return rc.min_radius + (rc.max_radius - rc.min_radius) * std::clamp(size_norm, 0.0, 1.0);
}

/// Renders one timepoint. `factors` must be reference-normalised (see
/// reference_stats); the tp0 nodule is the tp1 nodule shrunk by the growth.
inline ImagePatch render_nodule(const FactorVector& factors, int y, std::uint64_t background_seed, Timepoint tp,
                                const RenderConfig& rc = {}) {
    const auto& ref = reference_stats();
    const double size_range = ref.max[kSizeFactor] - ref.min[kSizeFactor];
    double size_norm = std::clamp(static_cast<double>(factors.values[kSizeFactor]), 0.0, 1.0);
    if (tp == Timepoint::tp0) {
        const double growth_mm = 0.5 * y + rc.growth_noise * rc.noise_scale * detail::growth_jitter(background_seed);
        size_norm = std::max(0.0, size_norm - growth_mm / size_range);
    }
    const double radius = blob_radius(size_norm, rc);
    const double spic = std::clamp(static_cast<double>(factors.values[kSpiculationFactor]), 0.0, 1.0);
    const double phase = 2.0 * std::numbers::pi * Philox(background_seed, 3).uniform();
    const double contrast = rc.contrast + rc.contrast_malignant * y;

    const auto bg = detail::value_noise(background_seed);
    ImagePatch p;
    const double centre = (kImageSide - 1) / 2.0;
    for (int r = 0; r < kImageSide; ++r) {
        for (int c = 0; c < kImageSide; ++c) {
            const double dy = r - centre, dx = c - centre;
            const double d = std::sqrt(dx * dx + dy * dy);
            const double theta = std::atan2(dy, dx);
            const double edge = radius * (1.0 + rc.lobe_amplitude * spic * std::sin(rc.lobes * theta + phase));
            const double blob = 1.0 / (1.0 + std::exp(-(edge - d) / rc.edge_softness));
            const double v = rc.background_level + rc.background_amplitude * bg[static_cast<std::size_t>(r * kImageSide + c)] +
                             contrast * blob;
            p.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return p;
}

struct RawRecord {
    std::vector<double> factors; // raw units
    int label = 0;
    std::uint64_t background_seed = 0;
};

inline RawRecord generate_raw(const GeneratorConfig& cfg, int index) {
    if (index < 0 || index >= cfg.n) throw ConfigError("generate_record: index out of range");
    Philox rng(derive_seed(cfg.seed, {"record"}), static_cast<std::uint64_t>(index));
    RawRecord raw;
    raw.label = rng.bernoulli(cfg.class_balance) ? 1 : 0;
    const int y = raw.label;
    const double u = rng.normal();
    auto& f = raw.factors;
    f.resize(kNumFactors);
    f[0] = 55.0 + 20.0 * rng.uniform();                 // age
    f[1] = rng.bernoulli(0.6) ? 1.0 : 0.0;              // sex
    f[2] = 1.0 + static_cast<double>(rng.index(7));     // education
    f[3] = 27.0 + 4.0 * rng.normal();                   // bmi
    f[4] = static_cast<double>(rng.index(6));           // race
    f[5] = 15.0 * rng.uniform();                        // quit time
    f[6] = rng.bernoulli(0.5) ? 1.0 : 0.0;              // smoke status
    f[7] = 30.0 + 25.0 * rng.uniform() + 4.0 * cfg.signal_strength * y; // pack-years
    f[8] = rng.bernoulli(0.2) ? 1.0 : 0.0;              // copd
    f[9] = rng.bernoulli(0.05) ? 1.0 : 0.0;             // personal cancer history
    f[10] = rng.bernoulli(0.2) ? 1.0 : 0.0;             // family history
    f[kSizeFactor] = size_formula(cfg.signal_strength, y, cfg.noise_scale, u, rng.normal());
    f[kSpiculationFactor] = spiculation_formula(cfg.signal_strength, y, cfg.noise_scale, u, rng.normal());
    f[kLobeFactor] = rng.bernoulli(0.55) ? 1.0 : 0.0;   // upper lobe
    raw.background_seed = rng.next_u64();
    return raw;
}

inline LongitudinalImage render_pair(const RawRecord& raw, const GeneratorConfig& cfg) {
    RenderConfig rc;
    rc.noise_scale = cfg.noise_scale;
    const auto ref_norm = normalize_factors(raw.factors, reference_stats());
    LongitudinalImage img;
    img.tp0 = render_nodule(ref_norm, raw.label, raw.background_seed, Timepoint::tp0, rc);
    img.tp1 = render_nodule(ref_norm, raw.label, raw.background_seed, Timepoint::tp1, rc);
    if (cfg.noise_scale > 0) {
        Philox rng(raw.background_seed, 11);
        for (auto* p : {&img.tp0, &img.tp1})
            for (auto& v : p->pixels)
                v = static_cast<float>(std::clamp(v + 0.03 * cfg.noise_scale * rng.normal(), 0.0, 1.0));
    }
    return img;
}

/// One record with factors scaled by the reference ranges.
inline MultiModalRecord generate_record(const GeneratorConfig& cfg, int index) {
    const auto raw = generate_raw(cfg, index);
    MultiModalRecord r;
    r.id = static_cast<std::uint64_t>(index);
    r.label = raw.label;
    r.factors = normalize_factors(raw.factors, reference_stats());
    r.images = render_pair(raw, cfg);
    return r;
}

struct DatasetSplits {
    Dataset train, validation, test;
};

/// 60/20/20 split; factors min-max scaled with train-split statistics.
inline DatasetSplits make_dataset(const GeneratorConfig& cfg) {
    cfg.validate();
    if (cfg.n < 10) throw ConfigError("make_dataset: n=" + std::to_string(cfg.n) + " is too small to populate all splits (need >= 10)");
    const int n_train = static_cast<int>(std::lround(0.6 * cfg.n));
    const int n_val = static_cast<int>(std::lround(0.2 * cfg.n));

    std::vector<int> order(static_cast<std::size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) order[static_cast<std::size_t>(i)] = i;
    Philox rng(derive_seed(cfg.seed, {"split"}));
    rng.shuffle(order);

    std::vector<RawRecord> raws(static_cast<std::size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) raws[static_cast<std::size_t>(i)] = generate_raw(cfg, i);

    std::vector<std::vector<double>> train_rows;
    for (int k = 0; k < n_train; ++k) train_rows.push_back(raws[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])].factors);
    const auto stats = compute_stats(train_rows);

    DatasetSplits out;
    out.train.split = Split::train;
    out.validation.split = Split::validation;
    out.test.split = Split::test;
    for (int k = 0; k < cfg.n; ++k) {
        const int idx = order[static_cast<std::size_t>(k)];
        const auto& raw = raws[static_cast<std::size_t>(idx)];
        MultiModalRecord r;
        r.id = static_cast<std::uint64_t>(idx);
        r.label = raw.label;
        r.factors = normalize_factors(raw.factors, stats);
        r.images = render_pair(raw, cfg);
        Dataset& dst = k < n_train ? out.train : (k < n_train + n_val ? out.validation : out.test);
        dst.records.push_back(std::move(r));
    }
    for (auto* d : {&out.train, &out.validation, &out.test}) d->stats = stats;
    return out;
}

} // namespace cpbigan
