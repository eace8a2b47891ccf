#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cpbigan/errors.hpp"

namespace cpbigan {

inline constexpr int kNumFactors = 14;
inline constexpr int kImageSide = 32;
inline constexpr int kImagePixels = kImageSide * kImageSide;
/// Side of the central window masked out of the "TP0 background".
inline constexpr int kCenterWindow = 16;

/// Risk-factor names in canonical order.
inline constexpr std::array<const char*, kNumFactors> kFactorNames = {
    "age",  "sex",        "education", "bmi",           "race",           "quit_time",   "smoke_status",
    "pack_years", "copd", "personal_cancer", "family_cancer", "nodule_size", "spiculation", "upper_lobe"};

/// Where a factor was recorded in the screening workflow. Drives the MNAR preset.
enum class FactorGroup { emr, sdm, report };

inline FactorGroup factor_group(int index) {
    if (index < 2) return FactorGroup::emr;
    if (index < 11) return FactorGroup::sdm;
    return FactorGroup::report;
}

inline constexpr int kSizeFactor = 11;
inline constexpr int kSpiculationFactor = 12;
inline constexpr int kLobeFactor = 13;

using MissingMask = std::vector<std::uint8_t>;

struct FactorVector {
    std::vector<float> values;
    MissingMask mask; // 1 = observed

    FactorVector() : values(kNumFactors, 0.0f), mask(kNumFactors, 1) {}
    FactorVector(std::vector<float> v, MissingMask m) : values(std::move(v)), mask(std::move(m)) {
        if (values.size() != mask.size())
            throw DataError("FactorVector: mask length " + std::to_string(mask.size()) +
                            " != values length " + std::to_string(values.size()));
    }

    bool complete() const { return std::all_of(mask.begin(), mask.end(), [](auto b) { return b == 1; }); }
    bool operator==(const FactorVector&) const = default;
};

/// 1x32x32 patch, row-major, intensities in [0, 1].
struct ImagePatch {
    std::vector<float> pixels = std::vector<float>(kImagePixels, 0.0f);

    float& at(int row, int col) { return pixels[static_cast<std::size_t>(row * kImageSide + col)]; }
    float at(int row, int col) const { return pixels[static_cast<std::size_t>(row * kImageSide + col)]; }
    bool operator==(const ImagePatch&) const = default;
};

inline bool in_center_window(int row, int col) {
    constexpr int lo = (kImageSide - kCenterWindow) / 2;
    constexpr int hi = lo + kCenterWindow;
    return row >= lo && row < hi && col >= lo && col < hi;
}

/// 1 outside the central window, 0 inside.
inline const std::vector<float>& background_mask() {
    static const std::vector<float> mask = [] {
        std::vector<float> m(kImagePixels);
        for (int r = 0; r < kImageSide; ++r)
            for (int c = 0; c < kImageSide; ++c) m[static_cast<std::size_t>(r * kImageSide + c)] = in_center_window(r, c) ? 0.f : 1.f;
        return m;
    }();
    return mask;
}

inline ImagePatch mask_center(const ImagePatch& p) {
    ImagePatch out = p;
    const auto& bg = background_mask();
    for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] *= bg[i];
    return out;
}

inline double central_mean(const ImagePatch& p) {
    double s = 0;
    int n = 0;
    for (int r = 0; r < kImageSide; ++r)
        for (int c = 0; c < kImageSide; ++c)
            if (in_center_window(r, c)) {
                s += p.at(r, c);
                ++n;
            }
    return s / n;
}

struct LongitudinalImage {
    ImagePatch tp0;
    ImagePatch tp1;
    bool tp0_present = true;
    bool tp1_present = true;
    bool operator==(const LongitudinalImage&) const = default;
};

struct MultiModalRecord {
    std::uint64_t id = 0;
    FactorVector factors;
    LongitudinalImage images;
    int label = 0;
    bool operator==(const MultiModalRecord&) const = default;
};

enum class Split { train, validation, test };

inline const char* split_name(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

struct NormalizationStats {
    std::vector<double> mean, min, max;
    bool operator==(const NormalizationStats&) const = default;
};

struct Dataset {
    std::vector<MultiModalRecord> records;
    Split split = Split::train;
    NormalizationStats stats;
    bool operator==(const Dataset&) const = default;
};

enum class Origin : std::uint8_t { observed, imputed, generated };

struct Provenance {
    std::vector<Origin> factors = std::vector<Origin>(kNumFactors, Origin::observed);
    Origin tp0 = Origin::observed;
    Origin tp1 = Origin::observed;
};

struct ImputationResult {
    MultiModalRecord record;
    Provenance provenance;
};

/// x~ = m*x + (1-m)*x_hat, as a select so observed entries are bit-identical.
template <class T>
std::vector<T> merge_observed(std::span<const T> x, std::span<const T> x_hat, std::span<const std::uint8_t> m) {
    if (x.size() != x_hat.size() || x.size() != m.size()) {
        std::ostringstream os;
        os << "merge_observed: shape mismatch (x=" << x.size() << ", x_hat=" << x_hat.size() << ", m=" << m.size()
           << ")";
        throw DataError(os.str());
    }
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (m[i] > 1) throw DataError("merge_observed: mask entry " + std::to_string(i) + " is not binary");
        out[i] = m[i] ? x[i] : x_hat[i];
    }
    return out;
}

template <class T>
std::vector<T> merge_observed(const std::vector<T>& x, const std::vector<T>& x_hat, const MissingMask& m) {
    return merge_observed<T>(std::span<const T>(x), std::span<const T>(x_hat), std::span<const std::uint8_t>(m));
}

/// Per-factor mean/min/max over a (complete) set of raw factor rows.
inline NormalizationStats compute_stats(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw DataError("compute_stats: no rows");
    const std::size_t f = rows.front().size();
    NormalizationStats s{std::vector<double>(f, 0.0), std::vector<double>(f, INFINITY),
                         std::vector<double>(f, -INFINITY)};
    for (const auto& r : rows) {
        if (r.size() != f) throw DataError("compute_stats: ragged rows");
        for (std::size_t j = 0; j < f; ++j) {
            s.mean[j] += r[j];
            s.min[j] = std::min(s.min[j], r[j]);
            s.max[j] = std::max(s.max[j], r[j]);
        }
    }
    for (auto& m : s.mean) m /= static_cast<double>(rows.size());
    return s;
}

/// Min-max scaling to [0, 1]; constant factors map to 0.5, values outside the
/// train range are clipped.
inline FactorVector normalize_factors(std::span<const double> raw, const NormalizationStats& stats) {
    if (raw.size() != stats.min.size() || raw.size() != stats.max.size())
        throw DataError("normalize_factors: raw length does not match stats");
    FactorVector out(std::vector<float>(raw.size()), MissingMask(raw.size(), 1));
    for (std::size_t j = 0; j < raw.size(); ++j) {
        if (!std::isfinite(raw[j])) throw DataError("normalize_factors: non-finite value at factor " + std::to_string(j));
        if (!std::isfinite(stats.min[j]) || !std::isfinite(stats.max[j]))
            throw DataError("normalize_factors: non-finite stats at factor " + std::to_string(j));
        const double range = stats.max[j] - stats.min[j];
        const double v = range > 0 ? (raw[j] - stats.min[j]) / range : 0.5;
        out.values[j] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

} // namespace cpbigan
