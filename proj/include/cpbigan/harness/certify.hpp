#pragma once

#include <string>
#include <vector>

#include "cpbigan/adversarial/trainer.hpp"
#include "cpbigan/diff/gradcheck.hpp"
#include "cpbigan/downstream/mlm.hpp"
#include "cpbigan/missingness.hpp"
#include "cpbigan/synthgen.hpp"

namespace cpbigan::harness {

struct CertificationResult {
    std::string name;
    std::uint64_t seed = 0;
    diff::GradCheckReport report;
};

namespace detail {

inline adversarial::BundleConfig small_bundle(adversarial::Target target, adversarial::Mode mode, std::uint64_t seed) {
    adversarial::BundleConfig c;
    c.target = target;
    c.mode = mode;
    c.latent_dim = 4;
    c.cond_dim = mode == adversarial::Mode::pbigan ? 0 : 3;
    c.widths.dense_hidden = 8;
    c.widths.channels = {2, 2, 3};
    c.widths.classifier_hidden = 6;
    c.seed = seed;
    return c;
}

inline std::vector<MultiModalRecord> small_cohort(int n, std::uint64_t seed) {
    GeneratorConfig g;
    g.n = n;
    g.seed = seed;
    std::vector<MultiModalRecord> out;
    for (int i = 0; i < n; ++i) out.push_back(generate_record(g, i));
    return corrupt_factors(out, mcar_spec(0.3, seed));
}

enum class Term { discriminator, generator, class_term, reconstruction };

/// A three-record batch with fixed fake mask and noise for `cfg`.
inline adversarial::Batch<double> small_batch(const adversarial::BundleConfig& cfg, std::uint64_t seed) {
    using namespace adversarial;
    std::vector<AdversarialSample> samples;
    for (const auto& r : small_cohort(3, seed + 100)) {
        if (cfg.target == Target::factors) {
            samples.push_back(factor_sample(r, cfg.conditioned()));
        } else {
            samples.push_back(image_train_sample(r, r.factors.values, cfg));
        }
    }
    std::vector<const AdversarialSample*> rows;
    for (const auto& s : samples) rows.push_back(&s);
    const std::size_t cells = samples.size() * static_cast<std::size_t>(cfg.target_size());
    auto fake_mask = cfg.target == Target::factors ? mcar_mask(cells, 0.3, seed) : MissingMask(cells, 1);
    Philox rng(seed, 99);
    std::vector<double> noise(samples.size() * static_cast<std::size_t>(cfg.latent_dim));
    for (auto& v : noise) v = rng.normal();
    return make_batch<double>(rows, cfg, fake_mask, noise);
}

inline diff::GradCheckReport check_adversarial(adversarial::Target target, adversarial::Mode mode, Term term,
                                               std::uint64_t seed) {
    using namespace adversarial;
    const auto cfg = small_bundle(target, mode, seed);
    auto b = make_bundle<double>(cfg);
    const auto batch = small_batch(cfg, seed);

    std::vector<ParamSet<double>*> sets =
        term == Term::discriminator ? std::vector<ParamSet<double>*>{&b.discriminator} : b.generator_sets();
    auto loss = [&](Tape<double>& t, std::vector<ParamSet<double>*>&) -> Var {
        auto terms = gan_terms(t, b, batch, Role::evaluate);
        switch (term) {
        case Term::discriminator: return terms.d_objective;
        case Term::class_term: return terms.ce;
        case Term::reconstruction: return terms.rec;
        default: return terms.g_objective;
        }
    };
    diff::GradCheckOptions opt;
    opt.seed = seed;
    return diff::grad_check(loss, sets, opt);
}

inline diff::GradCheckReport check_mlm(downstream::MlmVariant variant, std::uint64_t seed) {
    downstream::MlmConfig cfg;
    cfg.variant = variant;
    cfg.channels = {2, 2};
    cfg.image_embed = 4;
    cfg.recurrent_hidden = 3;
    cfg.factor_hidden = 5;
    cfg.factor_out = 3;
    cfg.seed = seed;
    auto ps = downstream::init_mlm_params<double>(cfg);
    GeneratorConfig g;
    g.n = 4;
    g.seed = seed + 20;
    std::vector<MultiModalRecord> recs;
    for (int i = 0; i < g.n; ++i) recs.push_back(generate_record(g, i));
    std::vector<const MultiModalRecord*> rows;
    for (const auto& r : recs) rows.push_back(&r);
    const auto batch = downstream::make_mlm_batch<double>(rows);
    diff::GradCheckOptions opt;
    opt.seed = seed;
    return diff::grad_check(
        [&](diff::Tape<double>& t, std::vector<diff::ParamSet<double>*>& sets) { return downstream::mlm_loss(t, *sets[0], cfg, batch); },
        {&ps}, opt);
}

} // namespace detail

/// Finite-difference check of every trained objective: adversarial
/// discriminator and generator objectives for both targets and modes, the
/// class term, the reconstruction term, and the downstream loss per variant.
inline std::vector<CertificationResult> certify_gradients(const std::vector<std::uint64_t>& seeds) {
    using adversarial::Mode;
    using adversarial::Target;
    using detail::Term;
    struct Case {
        const char* name;
        Target target;
        Mode mode;
        Term term;
    };
    static const Case cases[] = {
        {"factor_pbigan_discriminator", Target::factors, Mode::pbigan, Term::discriminator},
        {"factor_pbigan_generator", Target::factors, Mode::pbigan, Term::generator},
        {"factor_cpbigan_discriminator", Target::factors, Mode::cpbigan, Term::discriminator},
        {"factor_cpbigan_generator", Target::factors, Mode::cpbigan, Term::generator},
        {"factor_class_term", Target::factors, Mode::cpbigan, Term::class_term},
        {"factor_reconstruction", Target::factors, Mode::cpbigan, Term::reconstruction},
        {"image_pbigan_discriminator", Target::image, Mode::pbigan, Term::discriminator},
        {"image_cpbigan_generator", Target::image, Mode::cpbigan, Term::generator},
        {"image_class_term", Target::image, Mode::cpbigan, Term::class_term},
        {"image_reconstruction", Target::image, Mode::cpbigan, Term::reconstruction},
    };
    std::vector<CertificationResult> out;
    for (auto seed : seeds) {
        for (const auto& c : cases) out.push_back({c.name, seed, detail::check_adversarial(c.target, c.mode, c.term, seed)});
        for (auto v : {downstream::MlmVariant::full, downstream::MlmVariant::image_only, downstream::MlmVariant::factor_only})
            out.push_back({std::string("mlm_") + downstream::variant_name(v), seed, detail::check_mlm(v, seed)});
    }
    return out;
}

} // namespace cpbigan::harness
