#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "cpbigan/errors.hpp"
#include "cpbigan/rng.hpp"

namespace cpbigan::downstream {

/// Wilcoxon-Mann-Whitney AUC via average ranks; ties count one half.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DataError("auc: scores/labels length mismatch");
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("auc: labels must be 0/1");
        pos += static_cast<std::size_t>(y);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("auc: both classes must be present");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j - 1) + 1.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum - p * (p + 1) / 2) / (p * n);
}

struct BootstrapResult {
    double p_value = 1.0;
    double delta_auc = 0.0; // AUC(a) - AUC(b) on the full sample
    int redraws = 0;
};

/// Paired bootstrap over subjects; two-tailed p = 2 * min(P(d <= 0), P(d >= 0)).
inline BootstrapResult bootstrap_test(std::span<const double> a, std::span<const double> b, std::span<const int> labels,
                                      int n_boot = 2000, std::uint64_t seed = 0, int max_redraws = 10000) {
    if (a.size() != b.size() || a.size() != labels.size()) throw DataError("bootstrap_pvalue: inputs must be paired");
    if (n_boot < 1) throw ConfigError("bootstrap_pvalue: n must be >= 1");
    BootstrapResult res;
    res.delta_auc = auc(a, labels) - auc(b, labels);
    const std::size_t n = labels.size();
    std::vector<double> ra(n), rb(n);
    std::vector<int> rl(n);
    std::size_t le = 0, ge = 0;
    for (int it = 0; it < n_boot; ++it) {
        Philox rng(derive_seed(seed, {"bootstrap"}), static_cast<std::uint64_t>(it));
        for (;;) {
            int pos = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = rng.index(n);
                ra[i] = a[k];
                rb[i] = b[k];
                rl[i] = labels[k];
                pos += rl[i];
            }
            if (pos > 0 && static_cast<std::size_t>(pos) < n) break;
            if (++res.redraws > max_redraws) throw DataError("bootstrap_pvalue: too many single-class resamples");
        }
        const double d = auc(ra, rl) - auc(rb, rl);
        if (d <= 0) ++le;
        if (d >= 0) ++ge;
    }
    res.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / n_boot);
    return res;
}

inline double bootstrap_pvalue(std::span<const double> a, std::span<const double> b, std::span<const int> labels,
                               int n_boot = 2000, std::uint64_t seed = 0) {
    return bootstrap_test(a, b, labels, n_boot, seed).p_value;
}

/// L2-regularised logistic regression on standardised features, fit by
/// full-batch gradient descent. Used as a cheap probe.
struct LogisticProbe {
    std::vector<double> mean, scale, weights;
    double bias = 0;

    double score(std::span<const double> x) const {
        double s = bias;
        for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * (x[j] - mean[j]) / scale[j];
        return s;
    }
};

inline LogisticProbe fit_logistic(const std::vector<std::vector<double>>& X, std::span<const int> y, double l2 = 1e-2,
                                  int iterations = 300, double lr = 0.5) {
    if (X.empty() || X.size() != y.size()) throw DataError("fit_logistic: bad inputs");
    const std::size_t d = X.front().size(), n = X.size();
    LogisticProbe p;
    p.mean.assign(d, 0.0);
    p.scale.assign(d, 0.0);
    p.weights.assign(d, 0.0);
    for (const auto& r : X)
        for (std::size_t j = 0; j < d; ++j) p.mean[j] += r[j] / n;
    for (const auto& r : X)
        for (std::size_t j = 0; j < d; ++j) p.scale[j] += (r[j] - p.mean[j]) * (r[j] - p.mean[j]) / n;
    for (auto& s : p.scale) s = std::sqrt(s) + 1e-6;
    std::vector<double> g(d);
    for (int it = 0; it < iterations; ++it) {
        std::fill(g.begin(), g.end(), 0.0);
        double gb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pr = 1.0 / (1.0 + std::exp(-p.score(X[i])));
            const double e = pr - y[i];
            for (std::size_t j = 0; j < d; ++j) g[j] += e * (X[i][j] - p.mean[j]) / p.scale[j];
            gb += e;
        }
        for (std::size_t j = 0; j < d; ++j) p.weights[j] -= lr * (g[j] / n + l2 * p.weights[j]);
        p.bias -= lr * gb / n;
    }
    return p;
}

/// Fit on (X_train, y_train), AUC on (X_eval, y_eval).
inline double probe_auc(const std::vector<std::vector<double>>& X_train, std::span<const int> y_train,
                        const std::vector<std::vector<double>>& X_eval, std::span<const int> y_eval) {
    const auto p = fit_logistic(X_train, y_train);
    std::vector<double> s;
    s.reserve(X_eval.size());
    for (const auto& r : X_eval) s.push_back(p.score(r));
    return auc(s, y_eval);
}

struct TwoSampleTest {
    double mean_a = 0, mean_b = 0;
    double t = 0;
    double p_value = 1;   // one-sided, H1: mean_a > mean_b (normal approximation)
    double effect_size = 0; // Cohen's d with pooled standard deviation
};

/// Welch statistic with a normal tail; fine for the group sizes used here (n > 30).
inline TwoSampleTest welch_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DataError("welch_test: need at least 2 samples per group");
    auto moments = [](std::span<const double> v) {
        double m = 0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return std::pair{m, s / static_cast<double>(v.size() - 1)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    TwoSampleTest r;
    r.mean_a = ma;
    r.mean_b = mb;
    const double se = std::sqrt(va / a.size() + vb / b.size());
    r.t = se > 0 ? (ma - mb) / se : (ma > mb ? INFINITY : 0.0);
    r.p_value = 0.5 * std::erfc(r.t / std::sqrt(2.0));
    const double pooled = std::sqrt(((a.size() - 1) * va + (b.size() - 1) * vb) / (a.size() + b.size() - 2));
    r.effect_size = pooled > 0 ? (ma - mb) / pooled : 0.0;
    return r;
}

} // namespace cpbigan::downstream
