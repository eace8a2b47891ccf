#pragma once

#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpbigan/adversarial/bundle.hpp"
#include "cpbigan/diff/params.hpp"
#include "cpbigan/log.hpp"
#include "cpbigan/missingness.hpp"
#include "cpbigan/rng.hpp"

namespace cpbigan::adversarial {

using diff::AdamConfig;

// ---- sample construction ---------------------------------------------------

/// Conditional input for factor imputation: the latest present timepoint.
inline std::vector<float> latest_image(const MultiModalRecord& r) {
    if (r.images.tp1_present) return r.images.tp1.pixels;
    if (r.images.tp0_present) return r.images.tp0.pixels;
    return {};
}

inline AdversarialSample factor_sample(const MultiModalRecord& r, bool conditioned) {
    AdversarialSample s;
    s.x = r.factors.values;
    s.mask = r.factors.mask;
    s.enc_x = s.x;
    s.enc_mask.assign(s.mask.begin(), s.mask.end());
    if (conditioned) s.cond = latest_image(r);
    s.label = r.label;
    return s;
}

/// Encoder view of a patch: the background only, or the whole patch in sharp mode.
inline std::vector<float> encoder_view_mask(Mode mode) {
    return mode == Mode::cpbigan_sharp ? std::vector<float>(kImagePixels, 1.f) : background_mask();
}

/// Training tuple for the image target: a complete tp1 (m = 1 everywhere),
/// encoded from its own background.
inline AdversarialSample image_train_sample(const MultiModalRecord& r, std::span<const float> completed_factors,
                                            const BundleConfig& cfg) {
    if (!r.images.tp1_present) throw DataError("image training needs tp1 (record " + std::to_string(r.id) + ")");
    AdversarialSample s;
    s.x = r.images.tp1.pixels;
    s.mask.assign(kImagePixels, 1);
    s.enc_x = s.x;
    s.enc_mask = encoder_view_mask(cfg.mode);
    if (cfg.conditioned()) s.cond.assign(completed_factors.begin(), completed_factors.end());
    s.label = r.label;
    return s;
}

/// Limiting case: tp1 fully missing, tp0 provides the encoder view.
inline AdversarialSample image_impute_sample(const MultiModalRecord& r, std::span<const float> completed_factors,
                                             const BundleConfig& cfg) {
    if (!r.images.tp0_present)
        throw DataError("impute_image_tp1: tp0 missing for record " + std::to_string(r.id) + " (apply LOCF or skip)");
    AdversarialSample s;
    s.x.assign(kImagePixels, 0.f);
    s.mask.assign(kImagePixels, 0);
    s.enc_x = r.images.tp0.pixels;
    s.enc_mask = encoder_view_mask(cfg.mode);
    if (cfg.conditioned()) s.cond.assign(completed_factors.begin(), completed_factors.end());
    s.label = r.label;
    return s;
}

// ---- training ----------------------------------------------------------------

struct TrainConfig {
    AdamConfig adam;
    int batch_size = 32;
    /// Probe cadence in epochs; the final epoch is always probed.
    int probe_every = 20;
    /// Train C and q^B (through an auxiliary label head) first, then freeze them.
    bool pretrain = false;
    int pretrain_epochs = 10;
    std::uint64_t seed = 0;

    void validate() const {
        adam.validate();
        if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
        if (probe_every < 1) throw ConfigError("train.probe_every must be >= 1");
        if (pretrain_epochs < 0) throw ConfigError("train.pretrain_epochs must be >= 0");
    }
};

struct CurvePoint {
    int epoch = 0;
    long step = 0;
    double d_loss = 0, g_loss = 0, ce = 0, rec = 0;
    bool operator==(const CurvePoint&) const = default;
};

/// Higher is better; called on the current generator state.
using Probe = std::function<double(AdversarialBundle<float>&)>;

struct TrainResult {
    AdversarialBundle<float> bundle;
    std::vector<CurvePoint> curve;
    int best_epoch = 0;
    double best_probe = 0;
    std::vector<std::pair<int, double>> probe_history;
};

namespace detail {

inline std::vector<double> gaussian_noise(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    Philox rng(seed, stream);
    std::vector<double> out(n);
    for (auto& v : out) v = rng.normal();
    return out;
}

template <class T>
void apply(ParamSet<T>& ps, Tape<T>& t, const AdamConfig& cfg, long step) {
    if (!ps.empty()) diff::adam_step(ps, t.gradients(ps), cfg, step);
}

inline std::string where(int epoch, int batch) {
    return " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")";
}

} // namespace detail

/// One discriminator ascent step on a fixed batch. Returns the objective
/// before the update.
template <class T>
double discriminator_step(AdversarialBundle<T>& b, const Batch<T>& batch, const AdamConfig& adam, long step) {
    Tape<T> t;
    auto terms = gan_terms(t, b, batch, Role::discriminator);
    const double value = t.scalar(terms.d_objective);
    t.backward(diff::scale(t, terms.d_objective, -1.0));
    detail::apply(b.discriminator, t, adam, step);
    return value;
}

/// Supervised C step on real targets (image: tp1; factors: detached x~).
template <class T>
double classifier_step(AdversarialBundle<T>& b, const Tensor<T>& inputs, std::span<const int> labels,
                       const AdamConfig& adam, long step) {
    Tape<T> t;
    Var logits = classify(t, b, t.constant(inputs), true);
    Var ce = diff::softmax_cross_entropy(t, logits, labels, diff::kProbEps);
    const double v = t.scalar(ce);
    t.backward(ce);
    detail::apply(b.classifier, t, adam, step);
    return v;
}

class Trainer {
  public:
    Trainer(BundleConfig bundle_cfg, TrainConfig train_cfg) : bcfg_(std::move(bundle_cfg)), tcfg_(std::move(train_cfg)) {
        bcfg_.validate();
        tcfg_.validate();
    }

    /// fake_rate: missing rate of the fake-branch masks (factor target only).
    TrainResult run(const std::vector<AdversarialSample>& samples, double fake_rate, const Probe& probe = {}) const {
        if (samples.empty()) throw DataError("train: no training samples");
        TrainResult res{make_bundle<float>(bcfg_), {}, 0, -INFINITY, {}};
        auto& b = res.bundle;
        const int n = static_cast<int>(samples.size());
        const int bs = std::min(tcfg_.batch_size, n);
        const int batches = (n + bs - 1) / bs;
        const MechanismSpec fake_spec = mcar_spec(fake_rate);
        const auto noise_seed = derive_seed(tcfg_.seed, {"noise"});
        const auto mask_seed = derive_seed(tcfg_.seed, {"fake_mask"});
        const auto order_seed = derive_seed(tcfg_.seed, {"order"});

        bool frozen_aux = false;
        if (tcfg_.pretrain && bcfg_.mode != Mode::pbigan) {
            pretrain(b, samples);
            frozen_aux = true;
        }

        std::optional<AdversarialBundle<float>> best;
        long step = 0;
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int epoch = 1; epoch <= tcfg_.adam.max_epochs; ++epoch) {
            std::iota(order.begin(), order.end(), 0);
            Philox shuf(order_seed, static_cast<std::uint64_t>(epoch));
            shuf.shuffle(order);
            for (int bi = 0; bi < batches; ++bi) {
                ++step;
                const int lo = bi * bs, hi = std::min(n, lo + bs);
                std::vector<const AdversarialSample*> rows;
                for (int i = lo; i < hi; ++i) rows.push_back(&samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
                const std::size_t cells = rows.size() * static_cast<std::size_t>(bcfg_.target_size());
                MissingMask fm = bcfg_.target == Target::factors
                                     ? sample_fake_mask(fake_spec, cells, mask_seed, static_cast<std::uint64_t>(step))
                                     : MissingMask(cells, 1);
                auto noise = detail::gaussian_noise(rows.size() * static_cast<std::size_t>(bcfg_.latent_dim), noise_seed,
                                                    static_cast<std::uint64_t>(step));
                auto batch = make_batch<float>(rows, bcfg_, fm, noise);
                try {
                    res.curve.push_back(batch_step(b, batch, step, frozen_aux));
                } catch (const TrainingError& e) {
                    throw TrainingError(e.what() + detail::where(epoch, bi));
                }
                res.curve.back().epoch = epoch;
            }
            const bool probe_now = epoch % tcfg_.probe_every == 0 || epoch == tcfg_.adam.max_epochs;
            if (probe_now) {
                const double score = probe ? probe(b) : 0.0;
                res.probe_history.emplace_back(epoch, score);
                if (!best || score > res.best_probe) {
                    best = b;
                    res.best_probe = score;
                    res.best_epoch = epoch;
                }
                log_info(std::string(mode_name(bcfg_.mode)) + " epoch " + std::to_string(epoch) +
                         " probe=" + std::to_string(score));
            }
        }
        res.bundle = std::move(*best);
        return res;
    }

    const BundleConfig& bundle_config() const { return bcfg_; }
    const TrainConfig& train_config() const { return tcfg_; }

  private:
    CurvePoint batch_step(AdversarialBundle<float>& b, const Batch<float>& batch, long step, bool frozen_aux) const {
        CurvePoint pt;
        pt.step = step;
        const double d_obj = discriminator_step(b, batch, tcfg_.adam, step);
        if (!std::isfinite(d_obj)) throw TrainingError("non-finite discriminator objective");
        pt.d_loss = -d_obj;

        Tape<float> t;
        auto terms = gan_terms(t, b, batch, Role::generator);
        pt.g_loss = t.scalar(terms.g_objective);
        pt.rec = t.scalar(terms.rec);
        pt.ce = terms.ce.valid() ? t.scalar(terms.ce) : 0.0;
        if (!std::isfinite(pt.g_loss)) throw TrainingError("non-finite generator objective");
        t.backward(terms.g_objective);
        detail::apply(b.encoder_a, t, tcfg_.adam, step);
        detail::apply(b.decoder_a, t, tcfg_.adam, step);
        if (b.cfg.conditioned() && !frozen_aux) detail::apply(b.encoder_b, t, tcfg_.adam, step);

        if (b.cfg.class_regularized() && !frozen_aux) {
            if (b.cfg.target == Target::image) {
                classifier_step(b, batch.x, batch.labels, tcfg_.adam, step);
            } else {
                Tensor<float> merged = batch.x;
                const auto& rec = t.value(terms.reconstruction);
                for (std::size_t i = 0; i < merged.size(); ++i)
                    merged[i] = batch.mask[i] > 0.5f ? batch.x[i] : rec[i];
                classifier_step(b, merged, batch.labels, tcfg_.adam, step);
            }
        }
        return pt;
    }

    /// Supervised warm-up of C on observed targets and q^B through a linear
    /// label head; both are frozen afterwards.
    void pretrain(AdversarialBundle<float>& b, const std::vector<AdversarialSample>& samples) const {
        ParamSet<float> aux;
        if (b.cfg.conditioned()) diff::add_dense(aux, "aux.fc", b.cfg.cond_dim, 2, derive_seed(tcfg_.seed, {"aux"}));
        const int n = static_cast<int>(samples.size());
        const int bs = std::min(tcfg_.batch_size, n);
        long step = 0;
        for (int epoch = 1; epoch <= tcfg_.pretrain_epochs; ++epoch) {
            for (int lo = 0; lo < n; lo += bs) {
                ++step;
                std::vector<const AdversarialSample*> rows;
                for (int i = lo; i < std::min(n, lo + bs); ++i) rows.push_back(&samples[static_cast<std::size_t>(i)]);
                auto batch = make_batch<float>(rows, b.cfg);
                if (b.cfg.class_regularized()) {
                    Tensor<float> in = batch.x;
                    for (std::size_t i = 0; i < in.size(); ++i) in[i] *= batch.mask[i];
                    classifier_step(b, in, batch.labels, tcfg_.adam, step);
                }
                if (b.cfg.conditioned()) {
                    Tape<float> t;
                    Var code = encode_b(t, b, batch.cond, batch.has_cond, true);
                    Bound<float> head{t, aux, true};
                    Var ce = diff::softmax_cross_entropy(t, head.dense("aux.fc", code), std::span<const int>(batch.labels),
                                                         diff::kProbEps);
                    t.backward(ce);
                    detail::apply(b.encoder_b, t, tcfg_.adam, step);
                    detail::apply(aux, t, tcfg_.adam, step);
                }
            }
        }
    }

    BundleConfig bcfg_;
    TrainConfig tcfg_;
};

// ---- imputation -----------------------------------------------------------------

/// Deterministic decode g^A([q^A(x, m) ; c]) for a list of samples.
template <class T>
std::vector<std::vector<float>> decode_samples(AdversarialBundle<T>& b, const std::vector<AdversarialSample>& samples,
                                               int chunk = 64) {
    std::vector<std::vector<float>> out;
    out.reserve(samples.size());
    for (std::size_t lo = 0; lo < samples.size(); lo += static_cast<std::size_t>(chunk)) {
        std::vector<const AdversarialSample*> rows;
        for (std::size_t i = lo; i < std::min(samples.size(), lo + static_cast<std::size_t>(chunk)); ++i)
            rows.push_back(&samples[i]);
        auto batch = make_batch<T>(rows, b.cfg);
        Tape<T> t;
        auto terms = gan_terms(t, b, batch, Role::inference);
        const auto& v = t.value(terms.reconstruction);
        const std::size_t width = static_cast<std::size_t>(b.cfg.target_size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            out.emplace_back(v.data.begin() + static_cast<std::ptrdiff_t>(i * width),
                             v.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
    }
    return out;
}

template <class T>
std::vector<ImputationResult> impute_factors(AdversarialBundle<T>& b, std::span<const MultiModalRecord> records) {
    if (b.cfg.target != Target::factors) throw ConfigError("impute_factors: bundle targets images");
    std::vector<AdversarialSample> samples;
    samples.reserve(records.size());
    for (const auto& r : records) {
        samples.push_back(factor_sample(r, b.cfg.conditioned()));
        if (b.cfg.conditioned() && samples.back().cond.empty())
            log_warn("impute_factors: record " + std::to_string(r.id) +
                     " has no image; using the unconditional path");
    }
    auto decoded = decode_samples(b, samples);
    std::vector<ImputationResult> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        ImputationResult res{records[i], {}};
        auto& f = res.record.factors;
        f.values = merge_observed(f.values, decoded[i], f.mask);
        for (std::size_t j = 0; j < f.mask.size(); ++j) {
            if (!f.mask[j]) res.provenance.factors[j] = Origin::imputed;
            f.mask[j] = 1;
        }
        out.push_back(std::move(res));
    }
    return out;
}

template <class T>
ImputationResult impute_factors(AdversarialBundle<T>& b, const MultiModalRecord& record) {
    return impute_factors(b, std::span<const MultiModalRecord>(&record, 1)).front();
}

/// Generates tp1 for records whose tp1 is missing; records with tp1 present
/// pass through. completed_factors[i] is the complete factor vector of record i.
template <class T>
std::vector<ImputationResult> impute_image_tp1(AdversarialBundle<T>& b, std::span<const MultiModalRecord> records,
                                               std::span<const std::vector<float>> completed_factors) {
    if (b.cfg.target != Target::image) throw ConfigError("impute_image_tp1: bundle targets factors");
    if (completed_factors.size() != records.size()) throw DataError("impute_image_tp1: factor list size mismatch");
    std::vector<AdversarialSample> samples;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].images.tp1_present) continue;
        if (completed_factors[i].size() != kNumFactors) throw DataError("impute_image_tp1: factors must be complete");
        samples.push_back(image_impute_sample(records[i], completed_factors[i], b.cfg));
        idx.push_back(i);
    }
    auto decoded = decode_samples(b, samples);
    std::vector<ImputationResult> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r, {}});
    for (std::size_t k = 0; k < idx.size(); ++k) {
        auto& res = out[idx[k]];
        res.record.images.tp1.pixels = std::move(decoded[k]);
        res.record.images.tp1_present = true;
        res.provenance.tp1 = Origin::generated;
    }
    return out;
}

template <class T>
ImputationResult impute_image_tp1(AdversarialBundle<T>& b, const MultiModalRecord& record,
                                  const FactorVector& factors_complete) {
    if (record.images.tp1_present) throw DataError("impute_image_tp1: tp1 is present");
    for (auto m : factors_complete.mask)
        if (!m) throw DataError("impute_image_tp1: conditioning factors have missing entries");
    std::vector<float> f = factors_complete.values;
    return impute_image_tp1(b, std::span<const MultiModalRecord>(&record, 1),
                            std::span<const std::vector<float>>(&f, 1))
        .front();
}

} // namespace cpbigan::adversarial
