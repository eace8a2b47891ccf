#include <gtest/gtest.h>

#include <cmath>

#include "cpbigan/adversarial/trainer.hpp"
#include "cpbigan/diff/gradcheck.hpp"
#include "cpbigan/missingness.hpp"
#include "cpbigan/synthgen.hpp"

using namespace cpbigan;
using namespace cpbigan::adversarial;

namespace {

NetworkWidths tiny_widths() {
    NetworkWidths w;
    w.dense_hidden = 8;
    w.channels = {2, 2, 3};
    w.classifier_hidden = 6;
    return w;
}

BundleConfig tiny_config(Target target, Mode mode, std::uint64_t seed = 3) {
    BundleConfig c;
    c.target = target;
    c.mode = mode;
    c.latent_dim = 4;
    c.cond_dim = mode == Mode::pbigan ? 0 : 3;
    c.widths = tiny_widths();
    c.seed = seed;
    return c;
}

std::vector<MultiModalRecord> cohort(int n, std::uint64_t seed = 11, double factor_rate = 0.3) {
    GeneratorConfig g;
    g.n = n;
    g.seed = seed;
    std::vector<MultiModalRecord> out;
    const MechanismSpec spec = mcar_spec(factor_rate, seed);
    for (int i = 0; i < n; ++i) out.push_back(generate_record(g, i));
    return corrupt_factors(out, spec);
}

std::vector<AdversarialSample> samples_for(const BundleConfig& cfg, const std::vector<MultiModalRecord>& recs) {
    std::vector<AdversarialSample> s;
    for (const auto& r : recs) {
        if (cfg.target == Target::factors) {
            s.push_back(factor_sample(r, cfg.conditioned()));
        } else {
            std::vector<float> truth = r.factors.values;
            s.push_back(image_train_sample(r, truth, cfg));
        }
    }
    return s;
}

template <class T>
Batch<T> batch_for(const BundleConfig& cfg, const std::vector<AdversarialSample>& s, std::uint64_t seed) {
    std::vector<const AdversarialSample*> rows;
    for (const auto& x : s) rows.push_back(&x);
    const std::size_t cells = s.size() * static_cast<std::size_t>(cfg.target_size());
    auto fm = cfg.target == Target::factors ? mcar_mask(cells, 0.3, seed) : MissingMask(cells, 1);
    Philox rng(seed, 99);
    std::vector<double> noise(s.size() * static_cast<std::size_t>(cfg.latent_dim));
    for (auto& v : noise) v = rng.normal();
    return make_batch<T>(rows, cfg, fm, noise);
}

void zero_tensor(ParamSet<double>& ps, const std::string& name) {
    for (auto& v : ps[name].data) v = 0;
}

} // namespace

// ---- analytic anchors ----------------------------------------------------------

TEST(Anchors, HandSetDiscriminatorOutputs) {
    const std::vector<double> real{0.8}, fake{0.3};
    EXPECT_NEAR(gan_objective_value(real, fake), std::log(0.8) + std::log(0.7), 1e-12);
    EXPECT_NEAR(gan_objective_value(real, fake), -0.5798, 5e-5);

    Tape<double> t;
    Var r = t.constant(Tensor<double>({1, 1}, {0.8}));
    Var f = t.constant(Tensor<double>({1, 1}, {0.3}));
    EXPECT_NEAR(t.scalar(gan_objective(t, r, f)), -0.5798, 5e-5);
}

TEST(Anchors, PerfectDiscriminatorHitsClampedSupremum) {
    const std::vector<double> real{1.0, 1.0}, fake{0.0, 0.0};
    EXPECT_NEAR(gan_objective_value(real, fake), 2 * std::log(1 - diff::kProbEps), 1e-12);
}

class HalfDiscriminator : public ::testing::TestWithParam<std::tuple<Target, Mode>> {};

TEST_P(HalfDiscriminator, ObjectiveIsTwoLogHalf) {
    auto [target, mode] = GetParam();
    auto cfg = tiny_config(target, mode);
    auto b = make_bundle<double>(cfg);
    const std::string last = target == Target::factors ? "d.fc4" : "d.fc";
    zero_tensor(b.discriminator, last + ".w");
    zero_tensor(b.discriminator, last + ".b");
    auto s = samples_for(cfg, cohort(5));
    auto batch = batch_for<double>(cfg, s, 4);
    auto [d_obj, g_obj] = adversarial_loss(b, batch);
    EXPECT_NEAR(d_obj, 2 * std::log(0.5), 1e-6);
    (void)g_obj;
}

INSTANTIATE_TEST_SUITE_P(AllModes, HalfDiscriminator,
                         ::testing::Values(std::tuple{Target::factors, Mode::pbigan},
                                           std::tuple{Target::factors, Mode::cpbigan},
                                           std::tuple{Target::image, Mode::pbigan},
                                           std::tuple{Target::image, Mode::cpbigan},
                                           std::tuple{Target::image, Mode::cpbigan_sharp}));

TEST(Anchors, UniformClassifierGivesLogTwo) {
    for (auto target : {Target::factors, Target::image}) {
        auto cfg = tiny_config(target, Mode::cpbigan);
        auto b = make_bundle<double>(cfg);
        const std::string last = target == Target::factors ? "c.fc2" : "c.fc";
        zero_tensor(b.classifier, last + ".w");
        zero_tensor(b.classifier, last + ".b");
        auto s = samples_for(cfg, cohort(4));
        auto batch = batch_for<double>(cfg, s, 5);
        Tape<double> t;
        auto terms = gan_terms(t, b, batch, Role::generator);
        ASSERT_TRUE(terms.ce.valid());
        EXPECT_NEAR(t.scalar(terms.ce), std::log(2.0), 1e-6);
    }
}

TEST(Anchors, ClassRegularizerHandValue) {
    // probs {0.75, 0.25}, label 1 -> -log 0.25
    Tape<double> t;
    Var logits = t.constant(Tensor<double>({1, 2}, {std::log(0.75), std::log(0.25)}));
    const std::vector<int> y{1};
    EXPECT_NEAR(t.scalar(diff::softmax_cross_entropy(t, logits, std::span<const int>(y), diff::kProbEps)), 1.3863, 5e-5);
}

TEST(Anchors, PbiganModeHasNoClassTerm) {
    auto cfg = tiny_config(Target::factors, Mode::pbigan);
    auto b = make_bundle<double>(cfg);
    EXPECT_TRUE(b.encoder_b.empty());
    EXPECT_TRUE(b.classifier.empty());
    auto s = samples_for(cfg, cohort(4));
    Tape<double> t;
    auto terms = gan_terms(t, b, batch_for<double>(cfg, s, 1), Role::generator);
    EXPECT_FALSE(terms.ce.valid());
}

// ---- gradient certification --------------------------------------------------------

namespace {

enum class Term { discriminator, generator, class_term, reconstruction };

diff::GradCheckReport check_term(Target target, Mode mode, Term term, std::uint64_t seed) {
    auto cfg = tiny_config(target, mode, seed);
    auto b = make_bundle<double>(cfg);
    auto s = samples_for(cfg, cohort(3, seed + 100));
    auto batch = batch_for<double>(cfg, s, seed);
    std::vector<ParamSet<double>*> sets;
    if (term == Term::discriminator) {
        sets = {&b.discriminator};
    } else {
        sets = b.generator_sets();
    }
    auto loss = [&](Tape<double>& t, std::vector<ParamSet<double>*>&) -> Var {
        auto terms = gan_terms(t, b, batch, Role::evaluate);
        switch (term) {
        case Term::discriminator: return terms.d_objective;
        case Term::generator: return terms.g_objective;
        case Term::class_term: return terms.ce;
        case Term::reconstruction: return terms.rec;
        }
        return terms.g_objective;
    };
    diff::GradCheckOptions opt;
    opt.seed = seed;
    return diff::grad_check(loss, sets, opt);
}

} // namespace

struct GradCase {
    Target target;
    Mode mode;
    Term term;
    const char* name;
};

class GradCertification : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradCertification, ThreeSeeds) {
    const auto& c = GetParam();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto rep = check_term(c.target, c.mode, c.term, seed);
        EXPECT_TRUE(rep.passed()) << c.name << " seed " << seed << " max rel " << rep.max_rel_error << " worst "
                                  << (rep.worst.empty() ? "" : rep.worst.front().tensor);
        EXPECT_GT(rep.checked, 0u);
    }
}

INSTANTIATE_TEST_SUITE_P(
    Terms, GradCertification,
    ::testing::Values(GradCase{Target::factors, Mode::pbigan, Term::discriminator, "factor_pbigan_d"},
                      GradCase{Target::factors, Mode::pbigan, Term::generator, "factor_pbigan_g"},
                      GradCase{Target::factors, Mode::cpbigan, Term::discriminator, "factor_cpbigan_d"},
                      GradCase{Target::factors, Mode::cpbigan, Term::generator, "factor_cpbigan_g"},
                      GradCase{Target::factors, Mode::cpbigan, Term::class_term, "factor_ce"},
                      GradCase{Target::factors, Mode::cpbigan, Term::reconstruction, "factor_rec"},
                      GradCase{Target::image, Mode::pbigan, Term::discriminator, "image_pbigan_d"},
                      GradCase{Target::image, Mode::cpbigan, Term::generator, "image_cpbigan_g"},
                      GradCase{Target::image, Mode::cpbigan, Term::class_term, "image_ce"},
                      GradCase{Target::image, Mode::cpbigan, Term::reconstruction, "image_rec"}),
    [](const auto& info) { return std::string(info.param.name); });

// ---- structural properties --------------------------------------------------------

TEST(Encoder, MissingEntriesDoNotReachTheCode) {
    auto cfg = tiny_config(Target::factors, Mode::cpbigan);
    auto b = make_bundle<float>(cfg);
    auto recs = cohort(2);
    auto a = factor_sample(recs[0], true);
    auto c = a;
    for (std::size_t j = 0; j < c.x.size(); ++j)
        if (!c.mask[j]) c.enc_x[j] = 123.f;
    ASSERT_NE(std::count(a.mask.begin(), a.mask.end(), 0), 0);
    auto code = [&](const AdversarialSample& s) {
        std::vector<const AdversarialSample*> rows{&s};
        auto batch = make_batch<float>(rows, cfg);
        Tape<float> t;
        auto e = encode_a(t, b, batch.enc_x, batch.enc_mask, false);
        return t.value(e.code).data;
    };
    const auto ca = code(a);
    EXPECT_EQ(ca, code(a));
    EXPECT_EQ(ca, code(c));
    EXPECT_EQ(ca.size(), static_cast<std::size_t>(cfg.latent_dim));
}

TEST(Reduction, ZeroConditionalCodeMatchesUnconditionalLoss) {
    auto pcfg = tiny_config(Target::factors, Mode::pbigan);
    auto ccfg = pcfg;
    ccfg.mode = Mode::cpbigan;
    ccfg.cond_dim = 3;
    ccfg.lambda_ce = 0;
    auto pb = make_bundle<double>(pcfg);
    auto cb = make_bundle<double>(ccfg);
    // Share q^A and D; widen the pbigan weights with zero columns for the code.
    cb.encoder_a = pb.encoder_a;
    for (auto& e : cb.encoder_b.entries())
        for (auto& v : e.value.data) v = 0;
    const int joint_p = pcfg.joint_dim();
    auto widen = [&](const ParamSet<double>& src, ParamSet<double>& dst, const std::string& w, int offset) {
        const auto& s = src[w];
        auto& d = dst[w];
        const int out = s.shape[0], in_s = s.shape[1], in_d = d.shape[1];
        std::fill(d.data.begin(), d.data.end(), 0.0);
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in_s; ++i) {
                const int di = i < offset ? i : i + (in_d - in_s);
                d.data[static_cast<std::size_t>(o * in_d + di)] = s.data[static_cast<std::size_t>(o * in_s + i)];
            }
    };
    for (auto& e : cb.decoder_a.entries()) e.value = e.name == "g_a.fc1.w" ? e.value : pb.decoder_a[e.name];
    widen(pb.decoder_a, cb.decoder_a, "g_a.fc1.w", joint_p);
    cb.discriminator = make_bundle<double>(ccfg).discriminator;
    for (auto& e : cb.discriminator.entries()) e.value = e.name == "d.fc1.w" ? e.value : pb.discriminator[e.name];
    widen(pb.discriminator, cb.discriminator, "d.fc1.w", 2 * kNumFactors + joint_p);

    auto recs = cohort(6);
    auto ps = samples_for(pcfg, recs);
    auto cs = samples_for(ccfg, recs);
    auto [pd, pg] = adversarial_loss(pb, batch_for<double>(pcfg, ps, 8));
    auto [cd, cg] = adversarial_loss(cb, batch_for<double>(ccfg, cs, 8));
    EXPECT_NEAR(pd, cd, 1e-12);
    EXPECT_NEAR(pg, cg, 1e-12);
}

namespace {

TrainConfig tiny_train(int epochs, std::uint64_t seed = 5) {
    TrainConfig t;
    t.adam.max_epochs = epochs;
    t.adam.lr = 1e-3;
    t.batch_size = 4;
    t.probe_every = 1;
    t.seed = seed;
    return t;
}

} // namespace

TEST(Training, AblatedConditionalTraceEqualsBaseline) {
    auto recs = cohort(10);
    auto pcfg = tiny_config(Target::factors, Mode::pbigan);
    auto ccfg = pcfg;
    ccfg.mode = Mode::cpbigan;
    ccfg.cond_dim = 0;
    ccfg.lambda_ce = 0;
    auto pr = Trainer(pcfg, tiny_train(3)).run(samples_for(pcfg, recs), 0.3);
    auto cr = Trainer(ccfg, tiny_train(3)).run(samples_for(ccfg, recs), 0.3);
    ASSERT_FALSE(pr.curve.empty());
    EXPECT_EQ(pr.curve, cr.curve);
    EXPECT_EQ(pr.bundle.decoder_a, cr.bundle.decoder_a);
}

TEST(Training, SmokeEightRecordsOneEpoch) {
    auto recs = cohort(8);
    for (auto target : {Target::factors, Target::image}) {
        auto cfg = tiny_config(target, Mode::cpbigan);
        auto res = Trainer(cfg, tiny_train(1)).run(samples_for(cfg, recs), 0.3);
        ASSERT_EQ(res.curve.size(), 2u);
        for (const auto& p : res.curve) {
            EXPECT_TRUE(std::isfinite(p.d_loss));
            EXPECT_TRUE(std::isfinite(p.g_loss));
        }
        EXPECT_EQ(res.best_epoch, 1);
    }
}

TEST(Training, SeededRunsAreBitIdentical) {
    auto recs = cohort(12);
    auto cfg = tiny_config(Target::factors, Mode::cpbigan);
    auto a = Trainer(cfg, tiny_train(2)).run(samples_for(cfg, recs), 0.3);
    auto b = Trainer(cfg, tiny_train(2)).run(samples_for(cfg, recs), 0.3);
    EXPECT_EQ(a.curve, b.curve);
    EXPECT_EQ(a.bundle, b.bundle);
}

TEST(Training, ProbeSelectsEarliestBestEpoch) {
    auto recs = cohort(8);
    auto cfg = tiny_config(Target::factors, Mode::pbigan);
    int calls = 0;
    const std::vector<double> scores{0.5, 0.7, 0.7, 0.6};
    auto res = Trainer(cfg, tiny_train(4)).run(samples_for(cfg, recs), 0.3,
                                               [&](AdversarialBundle<float>&) { return scores[static_cast<std::size_t>(calls++)]; });
    EXPECT_EQ(calls, 4);
    EXPECT_EQ(res.best_epoch, 2);
    EXPECT_DOUBLE_EQ(res.best_probe, 0.7);
}

TEST(Training, PretrainFreezesConditionalModules) {
    auto recs = cohort(8);
    auto cfg = tiny_config(Target::factors, Mode::cpbigan);
    auto tc = tiny_train(2);
    tc.pretrain = true;
    tc.pretrain_epochs = 2;
    auto res = Trainer(cfg, tc).run(samples_for(cfg, recs), 0.3);
    auto fresh = make_bundle<float>(cfg);
    EXPECT_FALSE(res.bundle.encoder_b == fresh.encoder_b);
    EXPECT_FALSE(res.bundle.classifier == fresh.classifier);
    auto again = Trainer(cfg, [&] { auto t = tc; t.adam.max_epochs = 1; return t; }()).run(samples_for(cfg, recs), 0.3);
    EXPECT_EQ(again.bundle.encoder_b, res.bundle.encoder_b);
}

TEST(Training, DiscriminatorObjectiveRisesOnSeparableTuples) {
    auto cfg = tiny_config(Target::factors, Mode::pbigan);
    auto b = make_bundle<float>(cfg);
    std::vector<AdversarialSample> s;
    for (int i = 0; i < 8; ++i) {
        AdversarialSample x;
        x.x.assign(kNumFactors, 1.f);
        x.mask.assign(kNumFactors, 1);
        x.enc_x = x.x;
        x.enc_mask.assign(kNumFactors, 1.f);
        x.label = i % 2;
        s.push_back(x);
    }
    auto batch = batch_for<float>(cfg, s, 3);
    const auto g_before = b.decoder_a;
    diff::AdamConfig adam;
    adam.lr = 1e-3;
    double prev = -INFINITY;
    for (long step = 1; step <= 50; ++step) {
        const double v = discriminator_step(b, batch, adam, step);
        EXPECT_GT(v, prev) << "step " << step;
        prev = v;
    }
    EXPECT_EQ(b.decoder_a, g_before);
}

TEST(Training, NonFiniteInputReportsCoordinates) {
    auto recs = cohort(8);
    auto cfg = tiny_config(Target::factors, Mode::pbigan);
    auto s = samples_for(cfg, recs);
    s[5].x[0] = NAN;
    s[5].mask[0] = 1;
    s[5].enc_x[0] = NAN;
    try {
        Trainer(cfg, tiny_train(1)).run(s, 0.3);
        FAIL() << "expected a training error";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
    }
}

// ---- imputation ----------------------------------------------------------------------

TEST(ImputeFactors, FullyObservedIsIdentity) {
    auto cfg = tiny_config(Target::factors, Mode::cpbigan);
    auto b = make_bundle<float>(cfg);
    GeneratorConfig g;
    auto r = generate_record(g, 3);
    auto res = impute_factors(b, r);
    EXPECT_EQ(res.record.factors.values, r.factors.values);
    for (auto o : res.provenance.factors) EXPECT_EQ(o, Origin::observed);
}

TEST(ImputeFactors, FullyMissingIsDecodedAndTagged) {
    auto cfg = tiny_config(Target::factors, Mode::cpbigan);
    auto b = make_bundle<float>(cfg);
    GeneratorConfig g;
    auto r = generate_record(g, 3);
    std::fill(r.factors.mask.begin(), r.factors.mask.end(), 0);
    auto res = impute_factors(b, r);
    for (auto o : res.provenance.factors) EXPECT_EQ(o, Origin::imputed);
    for (float v : res.record.factors.values) {
        EXPECT_GE(v, 0.f);
        EXPECT_LE(v, 1.f);
    }
    for (auto m : res.record.factors.mask) EXPECT_EQ(m, 1);
}

TEST(ImputeFactors, ObservedEntriesAreBitIdentical) {
    auto cfg = tiny_config(Target::factors, Mode::pbigan);
    auto b = make_bundle<float>(cfg);
    auto recs = cohort(50);
    auto out = impute_factors(b, std::span<const MultiModalRecord>(recs));
    for (std::size_t i = 0; i < recs.size(); ++i)
        for (std::size_t j = 0; j < kNumFactors; ++j)
            if (recs[i].factors.mask[j]) {
                EXPECT_EQ(out[i].record.factors.values[j], recs[i].factors.values[j]);
                EXPECT_EQ(out[i].provenance.factors[j], Origin::observed);
            }
}

TEST(ImputeFactors, MissingImageFallsBackToUnconditionalPath) {
    auto cfg = tiny_config(Target::factors, Mode::cpbigan);
    auto b = make_bundle<float>(cfg);
    auto r = cohort(1)[0];
    r.images.tp0_present = r.images.tp1_present = false;
    auto res = impute_factors(b, r);
    for (float v : res.record.factors.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(ImputeImage, ShapeRangeAndDeterminism) {
    for (auto mode : {Mode::cpbigan, Mode::cpbigan_sharp, Mode::pbigan}) {
        auto cfg = tiny_config(Target::image, mode);
        auto b = make_bundle<float>(cfg);
        GeneratorConfig g;
        auto r = generate_record(g, 2);
        r.images.tp1_present = false;
        auto a = impute_image_tp1(b, r, r.factors);
        auto c = impute_image_tp1(b, r, r.factors);
        ASSERT_EQ(a.record.images.tp1.pixels.size(), static_cast<std::size_t>(kImagePixels));
        for (float v : a.record.images.tp1.pixels) {
            EXPECT_GE(v, 0.f);
            EXPECT_LE(v, 1.f);
        }
        EXPECT_EQ(a.record.images.tp1, c.record.images.tp1);
        EXPECT_EQ(a.provenance.tp1, Origin::generated);
        EXPECT_TRUE(a.record.images.tp1_present);
    }
}

TEST(ImputeImage, BackgroundModeIgnoresTheCentreOfTp0) {
    auto cfg = tiny_config(Target::image, Mode::cpbigan);
    auto b = make_bundle<float>(cfg);
    GeneratorConfig g;
    auto r = generate_record(g, 2);
    r.images.tp1_present = false;
    auto alt = r;
    alt.images.tp0.at(16, 16) = 0.99f;
    EXPECT_EQ(impute_image_tp1(b, r, r.factors).record.images.tp1,
              impute_image_tp1(b, alt, alt.factors).record.images.tp1);

    auto sharp = make_bundle<float>(tiny_config(Target::image, Mode::cpbigan_sharp));
    EXPECT_NE(impute_image_tp1(sharp, r, r.factors).record.images.tp1,
              impute_image_tp1(sharp, alt, alt.factors).record.images.tp1);
}

TEST(ImputeImage, RejectsMissingTp0AndIncompleteFactors) {
    auto b = make_bundle<float>(tiny_config(Target::image, Mode::cpbigan));
    GeneratorConfig g;
    auto r = generate_record(g, 2);
    r.images.tp1_present = false;
    auto partial = r.factors;
    partial.mask[0] = 0;
    EXPECT_THROW(impute_image_tp1(b, r, partial), DataError);
    r.images.tp0_present = false;
    EXPECT_THROW(impute_image_tp1(b, r, r.factors), DataError);
}

TEST(Config, Validation) {
    BundleConfig c;
    c.target = Target::factors;
    c.mode = Mode::cpbigan_sharp;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(parse_mode("gan"), ConfigError);
    EXPECT_EQ(parse_mode("cpbigan_sharp"), Mode::cpbigan_sharp);
}
