#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <span>
#include <vector>

#include "cpbigan/data.hpp"
#include "cpbigan/errors.hpp"

namespace cpbigan {

/// Column means over observed train entries only.
inline std::vector<double> observed_means(std::span<const MultiModalRecord> train) {
    std::vector<double> sum(kNumFactors, 0.0), count(kNumFactors, 0.0);
    for (const auto& r : train)
        for (int j = 0; j < kNumFactors; ++j)
            if (r.factors.mask[static_cast<std::size_t>(j)]) {
                sum[static_cast<std::size_t>(j)] += r.factors.values[static_cast<std::size_t>(j)];
                count[static_cast<std::size_t>(j)] += 1;
            }
    for (int j = 0; j < kNumFactors; ++j) {
        if (count[static_cast<std::size_t>(j)] == 0)
            throw DataError(std::string("mean_impute: factor '") + kFactorNames[static_cast<std::size_t>(j)] +
                            "' is never observed in train");
        sum[static_cast<std::size_t>(j)] /= count[static_cast<std::size_t>(j)];
    }
    return sum;
}

inline ImputationResult mean_impute(std::span<const double> train_means, const MultiModalRecord& record) {
    if (train_means.size() != record.factors.values.size()) throw DataError("mean_impute: means length mismatch");
    std::vector<float> fill(train_means.size());
    for (std::size_t j = 0; j < fill.size(); ++j) {
        if (!std::isfinite(train_means[j])) throw DataError("mean_impute: no mean for factor " + std::to_string(j));
        fill[j] = static_cast<float>(train_means[j]);
    }
    ImputationResult res{record, {}};
    res.record.factors.values = merge_observed(record.factors.values, fill, record.factors.mask);
    for (std::size_t j = 0; j < fill.size(); ++j)
        if (!record.factors.mask[j]) {
            res.record.factors.mask[j] = 1;
            res.provenance.factors[j] = Origin::imputed;
        }
    return res;
}

/// Last observation carried forward; a missing tp0 borrows tp1 as well.
inline ImputationResult locf_images(const MultiModalRecord& record) {
    const auto& im = record.images;
    if (!im.tp0_present && !im.tp1_present) throw DataError("locf_images: record " + std::to_string(record.id) + " has no image timepoint");
    ImputationResult res{record, {}};
    if (!im.tp1_present) {
        res.record.images.tp1 = im.tp0;
        res.record.images.tp1_present = true;
        res.provenance.tp1 = Origin::imputed;
    }
    if (!im.tp0_present) {
        res.record.images.tp0 = im.tp1;
        res.record.images.tp0_present = true;
        res.provenance.tp0 = Origin::imputed;
    }
    return res;
}

/// Singular-value soft-thresholding.
inline Eigen::MatrixXd svt(const Eigen::MatrixXd& X, double lambda) {
    if (!X.allFinite()) throw DataError("svt: non-finite input");
    if (lambda == 0.0 || X.size() == 0) return X;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = (svd.singularValues().array() - lambda).cwiseMax(0.0);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

inline double nuclear_norm(const Eigen::MatrixXd& X) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues().sum();
}

struct SoftImputeConfig {
    double lambda = 0.1;
    double tol = 1e-5;
    int max_iter = 500;

    void validate() const {
        if (!(lambda >= 0)) throw ConfigError("soft_impute.lambda must be >= 0");
        if (!(tol > 0)) throw ConfigError("soft_impute.tol must be > 0");
        if (max_iter < 1) throw ConfigError("soft_impute.max_iter must be >= 1");
    }
};

struct SoftImputeResult {
    Eigen::MatrixXd completed; // observed entries restored from M
    Eigen::MatrixXd low_rank;  // final iterate X
    std::vector<double> objective;
    int iterations = 0;
};

/// 0.5*||mask*(X-M)||_F^2 + lambda*||X||_*
inline double soft_impute_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M, const Eigen::MatrixXd& mask,
                                    double lambda) {
    return 0.5 * (mask.array() * (X - M).array()).matrix().squaredNorm() + lambda * nuclear_norm(X);
}

/// Iterates X <- svt(mask*M + (1-mask)*X, lambda) from X = 0, or from
/// `initial` when given (warm start along a decreasing lambda path).
inline SoftImputeResult soft_impute(const Eigen::MatrixXd& M, const Eigen::MatrixXd& mask, const SoftImputeConfig& cfg,
                                    bool track_objective = false, const Eigen::MatrixXd* initial = nullptr) {
    cfg.validate();
    if (M.rows() != mask.rows() || M.cols() != mask.cols()) throw DataError("soft_impute: mask shape mismatch");
    if ((mask.array() != 0.0 && mask.array() != 1.0).any()) throw DataError("soft_impute: mask must be binary");
    if (mask.sum() == 0) throw DataError("soft_impute: matrix has no observed entries");
    const Eigen::MatrixXd Mobs = (mask.array() * M.array()).matrix();
    if (!Mobs.allFinite()) throw DataError("soft_impute: non-finite observed entries");
    const Eigen::MatrixXd unobs = (1.0 - mask.array()).matrix();

    SoftImputeResult res;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(M.rows(), M.cols());
    if (initial) {
        if (initial->rows() != M.rows() || initial->cols() != M.cols()) throw DataError("soft_impute: warm start shape mismatch");
        X = *initial;
    }
    if (track_objective) res.objective.push_back(soft_impute_objective(X, Mobs, mask, cfg.lambda));
    for (int it = 1; it <= cfg.max_iter; ++it) {
        Eigen::MatrixXd next = svt(Mobs + (unobs.array() * X.array()).matrix(), cfg.lambda);
        const double denom = std::max(X.squaredNorm(), 1e-300);
        const double change = (next - X).squaredNorm() / denom;
        X = std::move(next);
        res.iterations = it;
        if (track_objective) res.objective.push_back(soft_impute_objective(X, Mobs, mask, cfg.lambda));
        if (change < cfg.tol * cfg.tol) break;
    }
    res.low_rank = X;
    res.completed = (Mobs + (unobs.array() * X.array()).matrix());
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            if (mask(i, j) == 1.0) res.completed(i, j) = M(i, j);
    return res;
}

inline int numerical_rank(const Eigen::MatrixXd& X, double rel_tol = 1e-8) {
    const auto s = Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues();
    if (s.size() == 0 || s(0) == 0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) ++r;
    return r;
}

/// Soft-impute over a cohort's factor matrix (all splits jointly, labels
/// excluded). Observed factor values are returned bit-identical.
inline std::vector<ImputationResult> soft_impute_records(std::span<const MultiModalRecord> records,
                                                         const SoftImputeConfig& cfg) {
    const auto n = static_cast<Eigen::Index>(records.size());
    Eigen::MatrixXd M(n, kNumFactors), mask(n, kNumFactors);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < kNumFactors; ++j) {
            const auto& f = records[static_cast<std::size_t>(i)].factors;
            const bool obs = f.mask[static_cast<std::size_t>(j)] != 0;
            mask(i, j) = obs ? 1.0 : 0.0;
            M(i, j) = obs ? f.values[static_cast<std::size_t>(j)] : 0.0;
        }
    const auto sol = soft_impute(M, mask, cfg);
    std::vector<ImputationResult> out;
    out.reserve(records.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        std::vector<float> fill(kNumFactors);
        for (int j = 0; j < kNumFactors; ++j)
            fill[static_cast<std::size_t>(j)] = static_cast<float>(std::clamp(sol.low_rank(i, j), 0.0, 1.0));
        ImputationResult res{r, {}};
        res.record.factors.values = merge_observed(r.factors.values, fill, r.factors.mask);
        for (int j = 0; j < kNumFactors; ++j)
            if (!r.factors.mask[static_cast<std::size_t>(j)]) {
                res.record.factors.mask[static_cast<std::size_t>(j)] = 1;
                res.provenance.factors[static_cast<std::size_t>(j)] = Origin::imputed;
            }
        out.push_back(std::move(res));
    }
    return out;
}

} // namespace cpbigan
