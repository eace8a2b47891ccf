#pragma once

#include <cmath>
#include <future>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpbigan/adversarial/trainer.hpp"
#include "cpbigan/baselines.hpp"
#include "cpbigan/downstream/metrics.hpp"
#include "cpbigan/downstream/mlm.hpp"
#include "cpbigan/harness/config.hpp"
#include "cpbigan/log.hpp"
#include "cpbigan/missingness.hpp"
#include "cpbigan/synthgen.hpp"

namespace cpbigan::harness {

struct MetricsRow {
    std::string kind = "grid"; // grid | sweep
    std::string image_imputer, factor_imputer;
    std::string mechanism;
    double factor_rate = 0, tp1_rate = 0;
    int seed = 0;
    double auc = std::numeric_limits<double>::quiet_NaN();
    double validation_auc = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> p_value;
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
    bool operator==(const MetricsRow& o) const {
        auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
        return kind == o.kind && image_imputer == o.image_imputer && factor_imputer == o.factor_imputer &&
               mechanism == o.mechanism && factor_rate == o.factor_rate && tp1_rate == o.tp1_rate && seed == o.seed &&
               same(auc, o.auc) && same(validation_auc, o.validation_auc) && p_value == o.p_value && status == o.status;
    }
};

struct NamedCurve {
    std::string name;
    int seed = 0;
    std::vector<adversarial::CurvePoint> curve;
};

/// Test-set scores of one evaluated cell.
struct CellOutcome {
    MetricsRow row;
    std::vector<double> scores;
    std::vector<int> labels;
};

/// Everything derived from one (config, seed index, rates) triple: the true
/// and corrupted cohort plus memoised imputations. Deterministic, so any
/// subset of cells can be recomputed in isolation.
class SeedRun {
  public:
    SeedRun(const ExperimentConfig& cfg, int seed_index, double factor_rate, double tp1_rate)
        : cfg_(cfg), seed_index_(seed_index), factor_rate_(factor_rate), tp1_rate_(tp1_rate) {
        GeneratorConfig g = cfg.generator;
        g.seed = derive_seed(cfg.seed, {"data", seed_index});
        auto splits = make_dataset(g);
        MechanismSpec spec = cfg.factor_missing;
        spec.rate = factor_rate;
        spec.seed = derive_seed(cfg.seed, {"corrupt", seed_index});
        const auto drop_seed = derive_seed(cfg.seed, {"tp1", seed_index});
        for (auto* d : {&splits.train, &splits.validation, &splits.test}) {
            auto corrupted = corrupt_factors(d->records, spec);
            for (std::size_t i = 0; i < corrupted.size(); ++i) {
                truth_.push_back(d->records[i]);
                corrupted_.push_back(drop_tp1(tp1_rate, drop_seed, corrupted[i]));
            }
        }
        n_train_ = splits.train.records.size();
        n_val_ = splits.validation.records.size();
    }

    std::span<const MultiModalRecord> truth() const { return truth_; }
    std::span<const MultiModalRecord> corrupted() const { return corrupted_; }
    std::size_t n_train() const { return n_train_; }
    std::size_t n_validation() const { return n_val_; }
    std::size_t n_test() const { return truth_.size() - n_train_ - n_val_; }
    bool is_test(std::size_t i) const { return i >= n_train_ + n_val_; }
    int seed_index() const { return seed_index_; }
    const std::vector<NamedCurve>& curves() const { return curves_; }

    std::uint64_t imputer_seed(const std::string& name) const {
        return derive_seed(cfg_.seed, {"imputer", std::string_view(name), seed_index_});
    }

    /// Completed factor vectors for every record (train, validation, test order).
    const std::vector<std::vector<float>>& factors(const std::string& imputer) {
        if (auto it = factor_cache_.find(imputer); it != factor_cache_.end()) return it->second;
        auto v = compute_factors(imputer);
        return factor_cache_.emplace(imputer, std::move(v)).first->second;
    }

    /// Completed tp1 pixels for every record; `conditioning` names the factor
    /// completion used by conditional imputers.
    const std::vector<std::vector<float>>& tp1(const std::string& imputer, const std::string& conditioning) {
        const std::string key = imputer + "|" + conditioning;
        if (auto it = image_cache_.find(key); it != image_cache_.end()) return it->second;
        auto v = compute_tp1(imputer, conditioning);
        return image_cache_.emplace(key, std::move(v)).first->second;
    }

    /// Records as the downstream model sees them for a given pair of options.
    std::vector<MultiModalRecord> completed(const std::string& image_imputer, const std::string& factor_imputer) {
        const std::string fac = factor_imputer == "image-only" ? "cpbigan" : factor_imputer;
        const std::string img = image_imputer == "factor-only" ? "locf" : image_imputer;
        const auto& f = factors(fac);
        const auto& p = tp1(img, fac);
        std::vector<MultiModalRecord> out = corrupted_;
        for (std::size_t i = 0; i < out.size(); ++i) {
            auto& r = out[i];
            r.factors.values = f[i];
            std::fill(r.factors.mask.begin(), r.factors.mask.end(), 1);
            if (!r.images.tp0_present) {
                r.images.tp0 = r.images.tp1;
                r.images.tp0_present = true;
            }
            r.images.tp1.pixels = p[i];
            r.images.tp1_present = true;
        }
        return out;
    }

    /// Trained image bundle (cached); exposed for inspection of imputed patches.
    adversarial::AdversarialBundle<float>& image_bundle(const std::string& mode_name) {
        if (auto it = image_bundles_.find(mode_name); it != image_bundles_.end()) return it->second;
        return image_bundles_.emplace(mode_name, train_image_bundle(mode_name)).first->second;
    }

  private:
    bool any_factor_missing() const {
        for (const auto& r : corrupted_)
            for (auto m : r.factors.mask)
                if (!m) return true;
        return false;
    }

    std::vector<std::vector<float>> observed_factors() const {
        std::vector<std::vector<float>> out;
        for (const auto& r : corrupted_) out.push_back(r.factors.values);
        return out;
    }

    /// Logistic probe on completed factors: fit on train, AUC on validation.
    double factor_probe(const std::vector<std::vector<float>>& completed) const {
        std::vector<std::vector<double>> xt, xv;
        std::vector<int> yt, yv;
        for (std::size_t i = 0; i < n_train_ + n_val_; ++i) {
            std::vector<double> x(completed[i].begin(), completed[i].end());
            (i < n_train_ ? xt : xv).push_back(std::move(x));
            (i < n_train_ ? yt : yv).push_back(corrupted_[i].label);
        }
        try {
            return downstream::probe_auc(xt, yt, xv, yv);
        } catch (const DataError&) {
            return 0.5;
        }
    }

    std::vector<std::vector<float>> compute_factors(const std::string& imputer) {
        if (imputer == "fully-observed") {
            std::vector<std::vector<float>> out;
            for (const auto& r : truth_) out.push_back(r.factors.values);
            return out;
        }
        if (!any_factor_missing()) return observed_factors();
        if (imputer == "mean") {
            const auto means = observed_means(std::span<const MultiModalRecord>(corrupted_).first(n_train_));
            std::vector<std::vector<float>> out;
            for (const auto& r : corrupted_) out.push_back(mean_impute(means, r).record.factors.values);
            return out;
        }
        if (imputer == "soft-impute") {
            std::vector<std::vector<float>> best;
            double best_auc = -1;
            for (double lambda : cfg_.soft_impute_lambdas) {
                SoftImputeConfig sc = cfg_.soft_impute;
                sc.lambda = lambda;
                std::vector<std::vector<float>> cand;
                for (auto& res : soft_impute_records(corrupted_, sc)) cand.push_back(std::move(res.record.factors.values));
                const double a = factor_probe(cand);
                if (a > best_auc) {
                    best_auc = a;
                    best = std::move(cand);
                }
            }
            return best;
        }
        if (imputer == "pbigan" || imputer == "cpbigan") return adversarial_factors(adversarial::parse_mode(imputer));
        if (imputer == "image-only") return factors("cpbigan");
        throw ConfigError("unknown factor imputer '" + imputer + "'");
    }

    /// Trains one factor imputer on the train records selected by `fit`.
    adversarial::TrainResult fit_factor_model(adversarial::Mode mode, const std::string& name, const std::vector<bool>& fit) {
        using namespace adversarial;
        BundleConfig bc = cfg_.adversarial.bundle;
        bc.target = Target::factors;
        bc.mode = mode;
        bc.lambda_rec = cfg_.adversarial.factor_lambda_rec;
        bc.seed = imputer_seed(name);
        TrainConfig tc = cfg_.adversarial.train;
        tc.adam.max_epochs = cfg_.adversarial.factor_epochs;
        tc.seed = derive_seed(bc.seed, {"train"});
        std::vector<AdversarialSample> samples;
        double missing = 0, total = 0;
        for (std::size_t i = 0; i < n_train_; ++i) {
            if (!fit[i]) continue;
            samples.push_back(factor_sample(corrupted_[i], bc.conditioned()));
            for (auto m : corrupted_[i].factors.mask) {
                missing += m ? 0 : 1;
                total += 1;
            }
        }
        const std::span<const MultiModalRecord> probe_set = std::span<const MultiModalRecord>(corrupted_).first(n_train_ + n_val_);
        Probe probe = [&](AdversarialBundle<float>& b) {
            std::vector<std::vector<float>> vals;
            for (auto& r : impute_factors(b, probe_set)) vals.push_back(std::move(r.record.factors.values));
            vals.resize(corrupted_.size()); // probe reads train + validation only
            return factor_probe(vals);
        };
        auto res = Trainer(bc, tc).run(samples, missing / std::max(total, 1.0), probe);
        curves_.push_back({name, seed_index_, res.curve});
        return res;
    }

    /// Validation and test records are completed by a model fit on the whole
    /// train split. With cross-fitting, each train fold is completed by a
    /// model fit on the remaining folds.
    std::vector<std::vector<float>> adversarial_factors(adversarial::Mode mode) {
        using namespace adversarial;
        const std::string name = std::string(mode_name(mode)) + "-factors";
        auto full = fit_factor_model(mode, name, std::vector<bool>(n_train_, true));
        std::vector<std::vector<float>> out;
        for (auto& r : impute_factors(full.bundle, std::span<const MultiModalRecord>(corrupted_)))
            out.push_back(std::move(r.record.factors.values));
        const int folds = cfg_.adversarial.cross_fit_folds;
        if (folds < 2) return out;
        for (int f = 0; f < folds; ++f) {
            std::vector<bool> fit(n_train_);
            for (std::size_t i = 0; i < n_train_; ++i) fit[i] = static_cast<int>(i % static_cast<std::size_t>(folds)) != f;
            auto model = fit_factor_model(mode, name + "-fold" + std::to_string(f + 1), fit);
            std::vector<MultiModalRecord> held;
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < n_train_; ++i)
                if (!fit[i]) {
                    held.push_back(corrupted_[i]);
                    idx.push_back(i);
                }
            auto imp = impute_factors(model.bundle, std::span<const MultiModalRecord>(held));
            for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = std::move(imp[k].record.factors.values);
        }
        return out;
    }

    /// Features of a generated tp1: the central window pooled to 4x4 plus its mean.
    static std::vector<double> patch_features(const std::vector<float>& px) {
        std::vector<double> f(17, 0.0);
        constexpr int lo = (kImageSide - kCenterWindow) / 2;
        for (int r = 0; r < kCenterWindow; ++r)
            for (int c = 0; c < kCenterWindow; ++c) {
                const double v = px[static_cast<std::size_t>((lo + r) * kImageSide + lo + c)];
                f[static_cast<std::size_t>((r / 4) * 4 + c / 4)] += v / 16.0;
                f[16] += v / (kCenterWindow * kCenterWindow);
            }
        return f;
    }

    adversarial::AdversarialBundle<float> train_image_bundle(const std::string& mode_s) {
        using namespace adversarial;
        BundleConfig bc = cfg_.adversarial.bundle;
        bc.target = Target::image;
        bc.mode = parse_mode(mode_s);
        bc.lambda_rec = cfg_.adversarial.image_lambda_rec;
        const std::string name = mode_s + "-image";
        bc.seed = imputer_seed(name);
        TrainConfig tc = cfg_.adversarial.train;
        tc.adam.max_epochs = cfg_.adversarial.image_epochs;
        tc.seed = derive_seed(bc.seed, {"train"});
        const auto& cond = factors(bc.conditioned() ? "cpbigan" : "fully-observed");
        std::vector<AdversarialSample> samples;
        for (std::size_t i = 0; i < n_train_; ++i)
            if (corrupted_[i].images.tp1_present) samples.push_back(image_train_sample(corrupted_[i], cond[i], bc));
        if (samples.empty()) throw DataError("no complete tp1 images in train to fit the " + name + " imputer");

        // Probe: generated tp1 of records missing it, logistic on patch features.
        std::vector<std::size_t> probe_idx;
        for (std::size_t i = 0; i < n_train_ + n_val_; ++i)
            if (!corrupted_[i].images.tp1_present && corrupted_[i].images.tp0_present) probe_idx.push_back(i);
        std::vector<MultiModalRecord> probe_recs;
        std::vector<std::vector<float>> probe_cond;
        for (auto i : probe_idx) {
            probe_recs.push_back(corrupted_[i]);
            probe_cond.push_back(cond[i]);
        }
        Probe probe = [&](AdversarialBundle<float>& b) {
            if (probe_recs.empty()) return 0.0;
            auto imp = impute_image_tp1(b, std::span<const MultiModalRecord>(probe_recs),
                                        std::span<const std::vector<float>>(probe_cond));
            std::vector<std::vector<double>> xt, xv;
            std::vector<int> yt, yv;
            for (std::size_t k = 0; k < probe_idx.size(); ++k) {
                const bool train = probe_idx[k] < n_train_;
                (train ? xt : xv).push_back(patch_features(imp[k].record.images.tp1.pixels));
                (train ? yt : yv).push_back(probe_recs[k].label);
            }
            try {
                return downstream::probe_auc(xt, yt, xv, yv);
            } catch (const DataError&) {
                return 0.5;
            }
        };
        auto res = Trainer(bc, tc).run(samples, 0.0, probe);
        curves_.push_back({name, seed_index_, res.curve});
        return std::move(res.bundle);
    }

    std::vector<std::vector<float>> compute_tp1(const std::string& imputer, const std::string& conditioning) {
        std::vector<std::vector<float>> out;
        if (imputer == "fully-observed") {
            for (const auto& r : truth_) out.push_back(r.images.tp1.pixels);
            return out;
        }
        bool any_missing = false;
        for (const auto& r : corrupted_) any_missing = any_missing || !r.images.tp1_present;
        if (imputer == "locf" || !any_missing) {
            for (const auto& r : corrupted_) out.push_back(locf_images(r).record.images.tp1.pixels);
            return out;
        }
        if (imputer == "pbigan" || imputer == "cpbigan" || imputer == "cpbigan_sharp") {
            auto& b = image_bundle(imputer);
            const auto& cond = factors(conditioning);
            auto imp = adversarial::impute_image_tp1(b, std::span<const MultiModalRecord>(corrupted_),
                                                     std::span<const std::vector<float>>(cond));
            for (auto& r : imp) out.push_back(std::move(r.record.images.tp1.pixels));
            return out;
        }
        if (imputer == "factor-only") return tp1("locf", conditioning);
        throw ConfigError("unknown image imputer '" + imputer + "'");
    }

    const ExperimentConfig& cfg_;
    int seed_index_;
    double factor_rate_, tp1_rate_;
    std::vector<MultiModalRecord> truth_, corrupted_;
    std::size_t n_train_ = 0, n_val_ = 0;
    std::map<std::string, std::vector<std::vector<float>>> factor_cache_, image_cache_;
    std::map<std::string, adversarial::AdversarialBundle<float>> image_bundles_;
    std::vector<NamedCurve> curves_;
};

/// Trains the downstream model on one completed cohort and scores the test split.
inline CellOutcome evaluate_cell(const ExperimentConfig& cfg, SeedRun& run, const std::string& image_imputer,
                                 const std::string& factor_imputer, std::uint64_t mlm_seed, MetricsRow row) {
    CellOutcome out;
    row.image_imputer = image_imputer;
    row.factor_imputer = factor_imputer;
    row.seed = run.seed_index();
    try {
        if (image_imputer == "factor-only" && factor_imputer == "image-only")
            throw ConfigError("factor-only with image-only leaves no input");
        auto recs = run.completed(image_imputer, factor_imputer);
        const auto all = std::span<const MultiModalRecord>(recs);
        const auto train = all.first(run.n_train());
        const auto val = all.subspan(run.n_train(), run.n_validation());
        const auto test = all.subspan(run.n_train() + run.n_validation());
        downstream::MlmConfig mc = cfg.mlm;
        mc.variant = image_imputer == "factor-only"  ? downstream::MlmVariant::factor_only
                     : factor_imputer == "image-only" ? downstream::MlmVariant::image_only
                                                      : downstream::MlmVariant::full;
        mc.seed = mlm_seed;
        auto model = downstream::train_mlm(train, val, mc);
        out.scores = downstream::score(model, test);
        out.labels = downstream::labels_of(test);
        row.auc = downstream::auc(out.scores, out.labels);
        row.validation_auc = model.best_validation_auc;
    } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        log_warn("cell " + image_imputer + "/" + factor_imputer + " seed " + std::to_string(row.seed) + ": " + e.what());
    }
    out.row = std::move(row);
    return out;
}

inline MetricsRow grid_template(const ExperimentConfig& cfg) {
    MetricsRow r;
    r.kind = "grid";
    r.mechanism = mechanism_name(cfg.factor_missing.kind);
    r.factor_rate = cfg.factor_missing.rate;
    r.tp1_rate = cfg.tp1_rate;
    return r;
}

inline std::uint64_t grid_cell_seed(const ExperimentConfig& cfg, const std::string& row, const std::string& col, int seed_index) {
    return derive_seed(cfg.seed, {"cell", std::string_view(row), std::string_view(col), seed_index});
}

inline constexpr const char* kReferenceImputer = "pbigan";

/// All grid cells of one seed, with paired bootstrap p-values against the
/// pbigan/pbigan cell when it is part of the grid.
inline std::vector<CellOutcome> run_grid_seed(const ExperimentConfig& cfg, SeedRun& run) {
    std::vector<CellOutcome> cells;
    for (const auto& r : cfg.rows)
        for (const auto& c : cfg.cols) {
            if (r == "factor-only" && c == "image-only") continue;
            cells.push_back(evaluate_cell(cfg, run, r, c, grid_cell_seed(cfg, r, c, run.seed_index()), grid_template(cfg)));
        }
    const CellOutcome* ref = nullptr;
    for (const auto& c : cells)
        if (c.row.image_imputer == kReferenceImputer && c.row.factor_imputer == kReferenceImputer && c.row.ok()) ref = &c;
    if (ref) {
        for (auto& c : cells) {
            if (&c == ref || !c.row.ok()) continue;
            const auto seed = derive_seed(cfg.seed, {"bootstrap", std::string_view(c.row.image_imputer),
                                                     std::string_view(c.row.factor_imputer), run.seed_index()});
            c.row.p_value = downstream::bootstrap_pvalue(c.scores, ref->scores, c.labels, cfg.bootstrap_n, seed);
        }
    }
    return cells;
}

struct GridResult {
    std::vector<MetricsRow> rows;
    std::vector<NamedCurve> curves;
};

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads; results come back
/// in index order regardless of completion order.
template <class R, class F>
std::vector<R> ordered_parallel(int n, int jobs, F work) {
    std::vector<R> out(static_cast<std::size_t>(n));
    jobs = std::max(1, jobs);
    for (int lo = 0; lo < n; lo += jobs) {
        std::vector<std::future<R>> fs;
        for (int i = lo; i < std::min(n, lo + jobs); ++i)
            fs.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, work, i));
        for (int i = lo; i < std::min(n, lo + jobs); ++i) out[static_cast<std::size_t>(i)] = fs[static_cast<std::size_t>(i - lo)].get();
    }
    return out;
}

inline GridResult run_grid(const ExperimentConfig& cfg, int jobs = 1) {
    cfg.validate();
    struct SeedOut {
        std::vector<MetricsRow> rows;
        std::vector<NamedCurve> curves;
    };
    auto per_seed = ordered_parallel<SeedOut>(static_cast<int>(cfg.seeds.size()), jobs, [&](int k) {
        SeedRun run(cfg, cfg.seeds[static_cast<std::size_t>(k)], cfg.factor_missing.rate, cfg.tp1_rate);
        SeedOut o;
        for (auto& c : run_grid_seed(cfg, run)) o.rows.push_back(std::move(c.row));
        o.curves = run.curves();
        return o;
    });
    GridResult res;
    for (auto& s : per_seed) {
        for (auto& r : s.rows) res.rows.push_back(std::move(r));
        for (auto& c : s.curves) res.curves.push_back(std::move(c));
    }
    return res;
}

/// Recomputes one grid cell from scratch (plus the reference cell for its p-value).
inline MetricsRow run_cell(const ExperimentConfig& cfg, const std::string& row, const std::string& col, int seed_index) {
    cfg.validate();
    SeedRun run(cfg, seed_index, cfg.factor_missing.rate, cfg.tp1_rate);
    auto cell = evaluate_cell(cfg, run, row, col, grid_cell_seed(cfg, row, col, seed_index), grid_template(cfg));
    const bool has_ref = std::find(cfg.rows.begin(), cfg.rows.end(), kReferenceImputer) != cfg.rows.end() &&
                         std::find(cfg.cols.begin(), cfg.cols.end(), kReferenceImputer) != cfg.cols.end();
    const bool is_ref = row == kReferenceImputer && col == kReferenceImputer;
    if (has_ref && !is_ref && cell.row.ok()) {
        auto ref = evaluate_cell(cfg, run, kReferenceImputer, kReferenceImputer,
                                 grid_cell_seed(cfg, kReferenceImputer, kReferenceImputer, seed_index), grid_template(cfg));
        if (ref.row.ok()) {
            const auto seed = derive_seed(cfg.seed, {"bootstrap", std::string_view(row), std::string_view(col), seed_index});
            cell.row.p_value = downstream::bootstrap_pvalue(cell.scores, ref.scores, cell.labels, cfg.bootstrap_n, seed);
        }
    }
    return cell.row;
}

/// Sweep over one missing rate with the other held at zero. Methods are the
/// two adversarial imputers; the downstream model seed does not depend on the
/// method, so the rate-0 point is shared.
inline GridResult run_sweep(const ExperimentConfig& cfg, int jobs = 1) {
    cfg.validate();
    const bool factor_axis = cfg.sweep_axis == "factor_rate";
    const std::vector<std::string> methods{"pbigan", "cpbigan"};
    struct SeedOut {
        std::vector<MetricsRow> rows;
        std::vector<NamedCurve> curves;
    };
    auto per_seed = ordered_parallel<SeedOut>(static_cast<int>(cfg.seeds.size()), jobs, [&](int k) {
        const int seed_index = cfg.seeds[static_cast<std::size_t>(k)];
        SeedOut o;
        for (double rate : cfg.sweep_rates) {
            SeedRun run(cfg, seed_index, factor_axis ? rate : 0.0, factor_axis ? 0.0 : rate);
            MetricsRow tmpl;
            tmpl.kind = "sweep";
            tmpl.mechanism = mechanism_name(cfg.factor_missing.kind);
            tmpl.factor_rate = factor_axis ? rate : 0.0;
            tmpl.tp1_rate = factor_axis ? 0.0 : rate;
            const auto mlm_seed = derive_seed(cfg.seed, {"sweep", std::string_view(cfg.sweep_axis), seed_index});
            for (const auto& m : methods) {
                auto cell = factor_axis ? evaluate_cell(cfg, run, "factor-only", m, mlm_seed, tmpl)
                                        : evaluate_cell(cfg, run, m, "image-only", mlm_seed, tmpl);
                o.rows.push_back(std::move(cell.row));
            }
            for (auto c : run.curves()) {
                std::ostringstream tag;
                tag << "_rate" << std::fixed << std::setprecision(2) << rate;
                c.name += tag.str();
                o.curves.push_back(std::move(c));
            }
        }
        return o;
    });
    GridResult res;
    for (auto& s : per_seed) {
        for (auto& r : s.rows) res.rows.push_back(std::move(r));
        for (auto& c : s.curves) res.curves.push_back(std::move(c));
    }
    return res;
}

} // namespace cpbigan::harness
