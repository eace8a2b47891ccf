#pragma once

#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpbigan/data.hpp"
#include "cpbigan/diff/layers.hpp"
#include "cpbigan/downstream/metrics.hpp"
#include "cpbigan/log.hpp"

// Multi-modal longitudinal model.
//
//   image path   per timepoint: 2x2 average pool (32 -> 16), conv 3x3/s2 (16 -> 8),
//                conv 3x3/s2 (8 -> 4), dense -> e_t; a gated recurrent cell runs
//                over (e_tp0, e_tp1) from a zero state
//   factor path  four dense layers 14 -> h -> h -> k -> k
//   fusion       concat of the path outputs, one dense layer to a logit
//
// The image-only and factor-only variants drop the other path entirely.

namespace cpbigan::downstream {

using diff::Activation;
using diff::Bound;
using diff::ParamSet;
using diff::Shape;
using diff::Tape;
using diff::Tensor;
using diff::Var;

enum class MlmVariant { full, image_only, factor_only };

inline const char* variant_name(MlmVariant v) {
    switch (v) {
    case MlmVariant::full: return "full";
    case MlmVariant::image_only: return "image-only";
    case MlmVariant::factor_only: return "factor-only";
    }
    return "?";
}

struct MlmConfig {
    MlmVariant variant = MlmVariant::full;
    std::array<int, 2> channels = {4, 8};
    int image_embed = 16;
    int recurrent_hidden = 16;
    int factor_hidden = 32;
    int factor_out = 16;
    diff::AdamConfig adam;
    int batch_size = 32;
    /// Stop after this many epochs without a validation improvement; 0 disables.
    int patience = 0;
    std::uint64_t seed = 0;

    bool uses_images() const { return variant != MlmVariant::factor_only; }
    bool uses_factors() const { return variant != MlmVariant::image_only; }
};

struct MlmModel {
    MlmConfig cfg;
    ParamSet<float> params;
    int best_epoch = 0;
    double best_validation_auc = 0;
};

template <class T>
ParamSet<T> init_mlm_params(const MlmConfig& c) {
    ParamSet<T> ps;
    const auto s = derive_seed(c.seed, {"mlm"});
    int fused = 0;
    if (c.uses_images()) {
        diff::add_conv(ps, "img.conv1", 1, c.channels[0], 3, s);
        diff::add_conv(ps, "img.conv2", c.channels[0], c.channels[1], 3, s);
        diff::add_dense(ps, "img.fc", c.channels[1] * 16, c.image_embed, s);
        diff::add_gru(ps, "img.gru", c.image_embed, c.recurrent_hidden, s);
        fused += c.recurrent_hidden;
    }
    if (c.uses_factors()) {
        diff::add_dense(ps, "fac.fc1", kNumFactors, c.factor_hidden, s);
        diff::add_dense(ps, "fac.fc2", c.factor_hidden, c.factor_hidden, s);
        diff::add_dense(ps, "fac.fc3", c.factor_hidden, c.factor_out, s);
        diff::add_dense(ps, "fac.fc4", c.factor_out, c.factor_out, s);
        fused += c.factor_out;
    }
    diff::add_dense(ps, "head", fused, 1, s);
    return ps;
}

/// Model-space inputs of one batch.
template <class T>
struct MlmBatch {
    Tensor<T> tp0, tp1, factors;
    std::vector<int> labels;
};

template <class T>
MlmBatch<T> make_mlm_batch(std::span<const MultiModalRecord* const> recs) {
    const int n = static_cast<int>(recs.size());
    MlmBatch<T> b{Tensor<T>({n, 1, kImageSide, kImageSide}), Tensor<T>({n, 1, kImageSide, kImageSide}),
                  Tensor<T>({n, kNumFactors}), {}};
    for (int i = 0; i < n; ++i) {
        const auto& r = *recs[static_cast<std::size_t>(i)];
        if (!r.images.tp0_present || !r.images.tp1_present)
            throw DataError("mlm: record " + std::to_string(r.id) + " has a missing timepoint");
        for (auto m : r.factors.mask)
            if (!m) throw DataError("mlm: record " + std::to_string(r.id) + " has missing factors");
        const std::size_t po = static_cast<std::size_t>(i) * kImagePixels, fo = static_cast<std::size_t>(i) * kNumFactors;
        std::copy(r.images.tp0.pixels.begin(), r.images.tp0.pixels.end(), b.tp0.data.begin() + static_cast<std::ptrdiff_t>(po));
        std::copy(r.images.tp1.pixels.begin(), r.images.tp1.pixels.end(), b.tp1.data.begin() + static_cast<std::ptrdiff_t>(po));
        std::copy(r.factors.values.begin(), r.factors.values.end(), b.factors.data.begin() + static_cast<std::ptrdiff_t>(fo));
        b.labels.push_back(r.label);
    }
    return b;
}

/// Logits [N, 1].
template <class T>
Var mlm_forward(Tape<T>& t, ParamSet<T>& ps, const MlmConfig& c, const MlmBatch<T>& b, bool trainable) {
    Bound<T> net{t, ps, trainable};
    const auto act = Activation::silu;
    std::vector<Var> parts;
    if (c.uses_images()) {
        auto embed = [&](const Tensor<T>& img) {
            Var h = diff::avg_pool2(t, t.constant(img));
            h = net.conv("img.conv1", h, 2, 1, act);
            h = net.conv("img.conv2", h, 2, 1, act);
            return net.dense("img.fc", diff::flatten(t, h), act);
        };
        const int n = b.tp0.dim(0);
        Var h = t.constant(Tensor<T>({n, c.recurrent_hidden}));
        h = net.gru("img.gru", embed(b.tp0), h);
        h = net.gru("img.gru", embed(b.tp1), h);
        parts.push_back(h);
    }
    if (c.uses_factors()) {
        Var f = t.constant(b.factors);
        f = net.dense("fac.fc1", f, act);
        f = net.dense("fac.fc2", f, act);
        f = net.dense("fac.fc3", f, act);
        parts.push_back(net.dense("fac.fc4", f, act));
    }
    return net.dense("head", parts.size() == 1 ? parts[0] : diff::concat(t, parts));
}

template <class T>
Var mlm_loss(Tape<T>& t, ParamSet<T>& ps, const MlmConfig& c, const MlmBatch<T>& b, bool trainable = true) {
    Var p = diff::sigmoid(t, mlm_forward(t, ps, c, b, trainable));
    return diff::binary_cross_entropy(t, p, std::span<const int>(b.labels), diff::kProbEps);
}

/// Logit scores (monotone in the predicted probability).
inline std::vector<double> score(const MlmModel& m, std::span<const MultiModalRecord> recs, int chunk = 128) {
    ParamSet<float> ps = m.params;
    std::vector<double> out;
    out.reserve(recs.size());
    for (std::size_t lo = 0; lo < recs.size(); lo += static_cast<std::size_t>(chunk)) {
        std::vector<const MultiModalRecord*> rows;
        for (std::size_t i = lo; i < std::min(recs.size(), lo + static_cast<std::size_t>(chunk)); ++i) rows.push_back(&recs[i]);
        auto b = make_mlm_batch<float>(rows);
        Tape<float> t;
        Var logits = mlm_forward(t, ps, m.cfg, b, false);
        for (float v : t.value(logits).data) out.push_back(v);
    }
    return out;
}

inline std::vector<int> labels_of(std::span<const MultiModalRecord> recs) {
    std::vector<int> y;
    y.reserve(recs.size());
    for (const auto& r : recs) y.push_back(r.label);
    return y;
}

inline double evaluate_auc(const MlmModel& m, std::span<const MultiModalRecord> recs) {
    const auto s = score(m, recs);
    const auto y = labels_of(recs);
    return auc(s, y);
}

/// Minibatch Adam on BCE; the epoch with the best validation AUC wins (ties
/// keep the earlier epoch).
inline MlmModel train_mlm(std::span<const MultiModalRecord> train, std::span<const MultiModalRecord> validation,
                          const MlmConfig& cfg) {
    cfg.adam.validate();
    if (train.empty() || validation.empty()) throw DataError("train_mlm: empty split");
    MlmModel model{cfg, init_mlm_params<float>(cfg), 0, -1.0};
    ParamSet<float> best = model.params;
    const int n = static_cast<int>(train.size());
    const int bs = std::min(cfg.batch_size, n);
    std::vector<int> order(static_cast<std::size_t>(n));
    const auto order_seed = derive_seed(cfg.seed, {"mlm-order"});
    long step = 0;
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.adam.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Philox rng(order_seed, static_cast<std::uint64_t>(epoch));
        rng.shuffle(order);
        for (int lo = 0, bi = 0; lo < n; lo += bs, ++bi) {
            std::vector<const MultiModalRecord*> rows;
            for (int i = lo; i < std::min(n, lo + bs); ++i) rows.push_back(&train[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
            auto b = make_mlm_batch<float>(rows);
            Tape<float> t;
            Var loss = mlm_loss(t, model.params, cfg, b);
            if (!std::isfinite(t.scalar(loss)))
                throw TrainingError("train_mlm: non-finite loss (epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(bi) + ")");
            t.backward(loss);
            try {
                diff::adam_step(model.params, t.gradients(model.params), cfg.adam, ++step);
            } catch (const TrainingError& e) {
                throw TrainingError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(bi) + ")");
            }
        }
        const double v = evaluate_auc(model, validation);
        if (v > model.best_validation_auc) {
            model.best_validation_auc = v;
            model.best_epoch = epoch;
            best = model.params;
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            break;
        }
    }
    model.params = std::move(best);
    return model;
}

} // namespace cpbigan::downstream
