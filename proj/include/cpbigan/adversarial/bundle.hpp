#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpbigan/adversarial/networks.hpp"
#include "cpbigan/data.hpp"
#include "cpbigan/diff/ops.hpp"
#include "cpbigan/errors.hpp"

namespace cpbigan::adversarial {

enum class Mode { pbigan, cpbigan, cpbigan_sharp };

inline const char* mode_name(Mode m) {
    switch (m) {
    case Mode::pbigan: return "pbigan";
    case Mode::cpbigan: return "cpbigan";
    case Mode::cpbigan_sharp: return "cpbigan_sharp";
    }
    return "?";
}

inline Mode parse_mode(const std::string& s) {
    if (s == "pbigan") return Mode::pbigan;
    if (s == "cpbigan") return Mode::cpbigan;
    if (s == "cpbigan_sharp" || s == "cpbigan#") return Mode::cpbigan_sharp;
    throw ConfigError("unknown adversarial mode '" + s + "'");
}

struct BundleConfig {
    Target target = Target::factors;
    Mode mode = Mode::cpbigan;
    int latent_dim = 64;
    /// Width of the conditional code q^B(x~^B); 0 ablates the conditional encoder.
    int cond_dim = 64;
    double lambda_rec = 1.0;
    double lambda_ce = 1.0;
    NetworkWidths widths;
    std::uint64_t seed = 0;

    bool conditioned() const { return mode != Mode::pbigan && cond_dim > 0; }
    bool class_regularized() const { return mode != Mode::pbigan && lambda_ce > 0; }
    int joint_dim() const { return latent_dim + (conditioned() ? cond_dim : 0); }
    int target_size() const { return target == Target::factors ? kNumFactors : kImagePixels; }
    int cond_size() const { return target == Target::factors ? kImagePixels : kNumFactors; }

    void validate() const {
        if (latent_dim < 1) throw ConfigError("adversarial.latent_dim must be >= 1");
        if (cond_dim < 0) throw ConfigError("adversarial.cond_dim must be >= 0");
        if (!(lambda_rec >= 0) || !(lambda_ce >= 0)) throw ConfigError("adversarial lambdas must be >= 0");
        if (target == Target::factors && mode == Mode::cpbigan_sharp)
            throw ConfigError("cpbigan_sharp only applies to the image target");
    }
};

/// q^A, g^A, D, q^B and C. In pbigan mode q^B and C stay empty.
template <class T>
struct AdversarialBundle {
    BundleConfig cfg;
    ParamSet<T> encoder_a, decoder_a, discriminator, encoder_b, classifier;

    std::vector<ParamSet<T>*> generator_sets() {
        std::vector<ParamSet<T>*> s{&encoder_a, &decoder_a};
        if (cfg.conditioned()) s.push_back(&encoder_b);
        return s;
    }

    template <class U>
    AdversarialBundle<U> cast() const {
        AdversarialBundle<U> b;
        b.cfg = cfg;
        b.encoder_a = encoder_a.template cast<U>();
        b.decoder_a = decoder_a.template cast<U>();
        b.discriminator = discriminator.template cast<U>();
        b.encoder_b = encoder_b.template cast<U>();
        b.classifier = classifier.template cast<U>();
        return b;
    }

    bool operator==(const AdversarialBundle& o) const {
        return encoder_a == o.encoder_a && decoder_a == o.decoder_a && discriminator == o.discriminator &&
               encoder_b == o.encoder_b && classifier == o.classifier;
    }
};

template <class T>
AdversarialBundle<T> make_bundle(const BundleConfig& cfg) {
    cfg.validate();
    AdversarialBundle<T> b;
    b.cfg = cfg;
    const auto& w = cfg.widths;
    const int joint = cfg.joint_dim();
    // Each network draws from its own seed so optional modules never shift the others.
    const auto sa = derive_seed(cfg.seed, {"q_a"}), sg = derive_seed(cfg.seed, {"g_a"}),
               sd = derive_seed(cfg.seed, {"d"}), sb = derive_seed(cfg.seed, {"q_b"}),
               sc = derive_seed(cfg.seed, {"c"});
    if (cfg.target == Target::factors) {
        add_mlp4(b.encoder_a, "q_a", 2 * kNumFactors, w.dense_hidden, cfg.latent_dim, sa);
        add_mlp4(b.decoder_a, "g_a", joint, w.dense_hidden, kNumFactors, sg);
        add_mlp4(b.discriminator, "d", 2 * kNumFactors + joint, w.dense_hidden, 1, sd);
        if (cfg.conditioned()) add_image_encoder(b.encoder_b, "q_b", 1, cfg.cond_dim, w, sb);
        if (cfg.mode != Mode::pbigan) add_factor_classifier(b.classifier, w, sc);
    } else {
        add_image_encoder(b.encoder_a, "q_a", 2, cfg.latent_dim, w, sa);
        add_image_decoder(b.decoder_a, joint, w, sg);
        add_image_discriminator(b.discriminator, joint, w, sd);
        if (cfg.conditioned()) add_mlp4(b.encoder_b, "q_b", kNumFactors, w.dense_hidden, cfg.cond_dim, sb);
        if (cfg.mode != Mode::pbigan) add_image_classifier(b.classifier, w, sc);
    }
    return b;
}

/// One training/evaluation sample in model space.
struct AdversarialSample {
    std::vector<float> x;        // target modality values
    MissingMask mask;            // observation mask of x
    std::vector<float> enc_x;    // encoder input before masking
    std::vector<float> enc_mask; // mask applied to the encoder input
    std::vector<float> cond;     // conditional modality x~^B; empty -> zero code
    int label = 0;
};

/// Batch tensors; x is [N,F] or [N,1,32,32] and masks share its shape.
template <class T>
struct Batch {
    Tensor<T> x, mask, enc_x, enc_mask, cond, fake_mask, noise;
    std::vector<int> labels;
    std::vector<bool> has_cond;
    int size() const { return static_cast<int>(labels.size()); }
};

template <class T>
Batch<T> make_batch(std::span<const AdversarialSample* const> samples, const BundleConfig& cfg,
                    std::span<const std::uint8_t> fake_mask = {}, std::span<const double> noise = {}) {
    const int n = static_cast<int>(samples.size());
    const int a = cfg.target_size(), b = cfg.cond_size();
    const Shape xs = cfg.target == Target::factors ? Shape{n, a} : Shape{n, 1, kImageSide, kImageSide};
    const Shape cs = cfg.target == Target::factors ? Shape{n, 1, kImageSide, kImageSide} : Shape{n, b};
    Batch<T> out;
    out.x = Tensor<T>(xs);
    out.mask = Tensor<T>(xs);
    out.enc_x = Tensor<T>(xs);
    out.enc_mask = Tensor<T>(xs);
    out.cond = Tensor<T>(cs);
    out.fake_mask = Tensor<T>(xs, T(1));
    out.noise = Tensor<T>({n, cfg.latent_dim});
    for (int i = 0; i < n; ++i) {
        const auto& s = *samples[static_cast<std::size_t>(i)];
        if (static_cast<int>(s.x.size()) != a || s.mask.size() != s.x.size() || s.enc_x.size() != s.x.size() ||
            s.enc_mask.size() != s.x.size())
            throw DataError("make_batch: sample " + std::to_string(i) + " has inconsistent sizes");
        const std::size_t off = static_cast<std::size_t>(i) * a;
        for (int j = 0; j < a; ++j) {
            out.x[off + j] = static_cast<T>(s.x[static_cast<std::size_t>(j)]);
            out.mask[off + j] = static_cast<T>(s.mask[static_cast<std::size_t>(j)]);
            out.enc_x[off + j] = static_cast<T>(s.enc_x[static_cast<std::size_t>(j)]);
            out.enc_mask[off + j] = static_cast<T>(s.enc_mask[static_cast<std::size_t>(j)]);
        }
        out.has_cond.push_back(!s.cond.empty());
        if (!s.cond.empty()) {
            if (static_cast<int>(s.cond.size()) != b) throw DataError("make_batch: conditional size mismatch");
            std::copy(s.cond.begin(), s.cond.end(), out.cond.data.begin() + static_cast<std::ptrdiff_t>(i) * b);
        }
        out.labels.push_back(s.label);
    }
    if (!fake_mask.empty()) {
        if (fake_mask.size() != out.fake_mask.size()) throw DataError("make_batch: fake mask size mismatch");
        for (std::size_t i = 0; i < fake_mask.size(); ++i) out.fake_mask[i] = static_cast<T>(fake_mask[i]);
    }
    if (!noise.empty()) {
        if (noise.size() != out.noise.size()) throw DataError("make_batch: noise size mismatch");
        for (std::size_t i = 0; i < noise.size(); ++i) out.noise[i] = static_cast<T>(noise[i]);
    }
    return out;
}

enum class Role { discriminator, generator, evaluate, inference };

template <class T>
struct GanTerms {
    Var d_real, d_fake;   // discriminator probabilities
    Var d_objective;      // mean log D(real) + mean log(1 - D(fake))
    Var rec;              // observed-entry mean squared reconstruction
    Var ce;               // class regularizer (invalid when inactive)
    Var g_objective;      // d_objective + lambda_rec*rec + lambda_ce*ce
    Var reconstruction;   // g^A([q^A(x,m) ; c])
    Var generated;        // g^A([z^ ; c])
    Var latent_real;      // [z_o^A ; c]
};

template <class T>
Var elementwise_mask(Tape<T>& t, Var x, const Tensor<T>& m) {
    return diff::mul(t, x, t.constant(m));
}

template <class T>
Encoded<T> encode_a(Tape<T>& t, AdversarialBundle<T>& b, const Tensor<T>& enc_x, const Tensor<T>& enc_mask,
                    bool trainable) {
    Bound<T> net{t, b.encoder_a, trainable};
    Tensor<T> masked = enc_x;
    for (std::size_t i = 0; i < masked.size(); ++i) masked[i] *= enc_mask[i];
    Var xin = t.constant(std::move(masked));
    Var min = t.constant(enc_mask);
    if (b.cfg.target == Target::factors) return {mlp4(net, "q_a", diff::concat(t, {xin, min}), Activation::none), {}};
    return image_encoder(net, "q_a", diff::concat(t, {xin, min}));
}

/// q^B(x~^B); rows without a conditional input get a zero code.
template <class T>
Var encode_b(Tape<T>& t, AdversarialBundle<T>& b, const Tensor<T>& cond, const std::vector<bool>& has_cond,
             bool trainable) {
    Bound<T> net{t, b.encoder_b, trainable};
    Var c = b.cfg.target == Target::factors ? image_encoder(net, "q_b", t.constant(cond)).code
                                            : mlp4(net, "q_b", t.constant(cond), Activation::none);
    if (std::all_of(has_cond.begin(), has_cond.end(), [](bool v) { return v; })) return c;
    Tensor<T> keep({static_cast<int>(has_cond.size()), b.cfg.cond_dim});
    for (std::size_t i = 0; i < has_cond.size(); ++i)
        for (int j = 0; j < b.cfg.cond_dim; ++j) keep[i * static_cast<std::size_t>(b.cfg.cond_dim) + j] = has_cond[i] ? T(1) : T(0);
    return elementwise_mask(t, c, keep);
}

template <class T>
Var decode_a(Tape<T>& t, AdversarialBundle<T>& b, Var latent, const std::vector<Var>& skips, bool trainable) {
    Bound<T> net{t, b.decoder_a, trainable};
    if (b.cfg.target == Target::factors) return mlp4(net, "g_a", latent, Activation::sigmoid);
    return image_decoder(net, latent, skips, b.cfg.widths);
}

template <class T>
Var discriminate(Tape<T>& t, AdversarialBundle<T>& b, Var x_masked, Var m, Var z, bool trainable) {
    Bound<T> net{t, b.discriminator, trainable};
    if (b.cfg.target == Target::factors) return mlp4(net, "d", diff::concat(t, {x_masked, m, z}), Activation::sigmoid);
    return image_discriminator(net, x_masked, m, z);
}

template <class T>
Var classify(Tape<T>& t, AdversarialBundle<T>& b, Var x, bool trainable) {
    Bound<T> net{t, b.classifier, trainable};
    return b.cfg.target == Target::factors ? factor_classifier(net, x) : image_classifier(net, x);
}

/// mean log D(real) + mean log(1 - D(fake)), clamped.
template <class T>
Var gan_objective(Tape<T>& t, Var d_real, Var d_fake) {
    return diff::add(t, diff::mean(t, diff::log_clamped(t, d_real, diff::kProbEps)),
                     diff::mean(t, diff::log_clamped(t, diff::one_minus(t, d_fake), diff::kProbEps)));
}

/// Plain-number form of the same objective for hand-set discriminator outputs.
inline double gan_objective_value(std::span<const double> d_real, std::span<const double> d_fake) {
    auto lg = [](double p) { return std::log(std::clamp(p, diff::kProbEps, 1.0 - diff::kProbEps)); };
    double r = 0, f = 0;
    for (double p : d_real) r += lg(p);
    for (double p : d_fake) f += lg(1.0 - p);
    return r / static_cast<double>(d_real.size()) + f / static_cast<double>(d_fake.size());
}

/// Builds every term of the minimax objective on one tape. The role decides
/// which networks are trainable (the rest are bound frozen).
template <class T>
GanTerms<T> gan_terms(Tape<T>& t, AdversarialBundle<T>& b, const Batch<T>& batch, Role role) {
    const bool gen_train = role == Role::generator || role == Role::evaluate;
    const bool disc_train = role == Role::discriminator || role == Role::evaluate;
    GanTerms<T> out;

    auto enc = encode_a(t, b, batch.enc_x, batch.enc_mask, gen_train);
    Var cond{};
    if (b.cfg.conditioned()) cond = encode_b(t, b, batch.cond, batch.has_cond, gen_train);
    auto joint = [&](Var z) { return cond.valid() ? diff::concat(t, {z, cond}) : z; };

    out.latent_real = joint(enc.code);
    out.reconstruction = decode_a(t, b, out.latent_real, enc.skips, gen_train);
    if (role == Role::inference) return out;

    const Var noise = t.constant(batch.noise);
    const Var latent_fake = joint(noise);
    out.generated = decode_a(t, b, latent_fake, enc.skips, gen_train);

    const Var m = t.constant(batch.mask);
    const Var m_hat = t.constant(batch.fake_mask);
    Tensor<T> x_obs = batch.x;
    for (std::size_t i = 0; i < x_obs.size(); ++i) x_obs[i] *= batch.mask[i];
    out.d_real = discriminate(t, b, t.constant(x_obs), m, out.latent_real, disc_train);
    out.d_fake = discriminate(t, b, elementwise_mask(t, out.generated, batch.fake_mask), m_hat, latent_fake, disc_train);
    out.d_objective = gan_objective(t, out.d_real, out.d_fake);
    if (role == Role::discriminator) return out;

    // observed-entry reconstruction
    double observed = 0;
    for (const T& v : batch.mask.data) observed += static_cast<double>(v);
    Var diffv = diff::sub(t, out.reconstruction, t.constant(batch.x));
    out.rec = diff::scale(t, diff::sum(t, elementwise_mask(t, diff::mul(t, diffv, diffv), batch.mask)),
                          1.0 / std::max(observed, 1.0));
    out.g_objective = diff::add(t, out.d_objective, diff::scale(t, out.rec, b.cfg.lambda_rec));

    if (b.cfg.class_regularized()) {
        Var classified;
        if (b.cfg.target == Target::factors) {
            // x~ = m*x + (1-m)*x_hat
            Tensor<T> inv = batch.mask;
            for (auto& v : inv.data) v = T(1) - v;
            classified = diff::add(t, t.constant(x_obs), elementwise_mask(t, out.reconstruction, inv));
        } else {
            classified = out.generated; // limiting case: the generated sample is regularized
        }
        Var logits = classify(t, b, classified, false);
        out.ce = diff::softmax_cross_entropy(t, logits, std::span<const int>(batch.labels), diff::kProbEps);
        out.g_objective = diff::add(t, out.g_objective, diff::scale(t, out.ce, b.cfg.lambda_ce));
    }
    return out;
}

/// Loss values of one batch: (d_objective, g_objective).
template <class T>
std::pair<double, double> adversarial_loss(AdversarialBundle<T>& b, const Batch<T>& batch) {
    Tape<T> t;
    auto terms = gan_terms(t, b, batch, Role::evaluate);
    return {t.scalar(terms.d_objective), t.scalar(terms.g_objective)};
}

} // namespace cpbigan::adversarial
