#include <gtest/gtest.h>

#include <cmath>

#include "cpbigan/diff/gradcheck.hpp"
#include "cpbigan/downstream/metrics.hpp"
#include "cpbigan/downstream/mlm.hpp"
#include "cpbigan/synthgen.hpp"

using namespace cpbigan;
using namespace cpbigan::downstream;

namespace {

/// O(n^2) definition: fraction of positive/negative pairs ordered correctly,
/// ties counted one half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            den += 1;
            num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    return num / den;
}

MlmConfig tiny_mlm(MlmVariant v, std::uint64_t seed) {
    MlmConfig c;
    c.variant = v;
    c.channels = {2, 2};
    c.image_embed = 4;
    c.recurrent_hidden = 3;
    c.factor_hidden = 5;
    c.factor_out = 3;
    c.seed = seed;
    return c;
}

std::vector<MultiModalRecord> records(int n, std::uint64_t seed) {
    GeneratorConfig g;
    g.n = n;
    g.seed = seed;
    std::vector<MultiModalRecord> out;
    for (int i = 0; i < n; ++i) out.push_back(generate_record(g, i));
    return out;
}

} // namespace

TEST(Auc, HandExamples) {
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.8, 0.3}, std::vector<int>{1, 1, 0}), 1.0);
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.8, 0.3}, std::vector<int>{0, 0, 1}), 0.0);
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}), 0.5);
}

TEST(Auc, RejectsSingleClassAndBadLabels) {
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DataError);
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}), DataError);
    EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<int>{0, 1}), DataError);
}

TEST(Auc, MatchesPairwiseOracleOn200Instances) {
    Philox rng(1);
    for (int inst = 0; inst < 200; ++inst) {
        const int n = 2 + static_cast<int>(rng.index(120));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) {
            // coarse grid so ties are common
            s[i] = inst % 2 ? std::round(rng.uniform() * 8) / 8 : rng.normal();
            y[i] = rng.bernoulli(0.4) ? 1 : 0;
        }
        y[0] = 0;
        y[1] = 1;
        EXPECT_NEAR(auc(s, y), pairwise_auc(s, y), 1e-12) << "instance " << inst;
    }
}

TEST(Auc, MonotoneInvarianceAndComplement) {
    Philox rng(2);
    for (int inst = 0; inst < 30; ++inst) {
        std::vector<double> s(80), t(80), neg(80);
        std::vector<int> y(80);
        for (int i = 0; i < 80; ++i) {
            s[i] = rng.normal();
            t[i] = std::exp(2 * s[i]) + 3;
            neg[i] = -s[i];
            y[i] = i % 2;
        }
        EXPECT_DOUBLE_EQ(auc(s, y), auc(t, y));
        EXPECT_NEAR(auc(s, y) + auc(neg, y), 1.0, 1e-12);
    }
}

TEST(Bootstrap, IdenticalScoresGiveLargeP) {
    Philox rng(3);
    std::vector<double> s(60);
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) s[i] = rng.normal(), y[i] = i % 2;
    EXPECT_GE(bootstrap_pvalue(s, s, y, 2000, 5), 0.99);
}

TEST(Bootstrap, PerfectVersusAntiPerfect) {
    std::vector<double> good(50), bad(50);
    std::vector<int> y(50);
    for (int i = 0; i < 50; ++i) {
        y[i] = i < 25 ? 1 : 0;
        good[i] = y[i] ? 1.0 + i : -1.0 - i;
        bad[i] = -good[i];
    }
    EXPECT_LT(bootstrap_pvalue(good, bad, y, 2000, 6), 0.01);
    const auto r = bootstrap_test(good, bad, y, 2000, 6);
    EXPECT_DOUBLE_EQ(r.delta_auc, 1.0);
}

TEST(Bootstrap, DeterministicGivenSeedAndRedrawsDegenerate) {
    std::vector<double> a{0.1, 0.9, 0.4, 0.3, 0.8}, b{0.2, 0.6, 0.5, 0.1, 0.3};
    std::vector<int> y{0, 1, 0, 0, 0}; // one positive: many single-class resamples
    const auto r1 = bootstrap_test(a, b, y, 500, 9), r2 = bootstrap_test(a, b, y, 500, 9);
    EXPECT_EQ(r1.p_value, r2.p_value);
    EXPECT_GT(r1.redraws, 0);
    EXPECT_THROW(bootstrap_test(a, b, y, 500, 9, 3), DataError);
}

TEST(LogisticProbe, SeparatesLinearlySeparableData) {
    Philox rng(4);
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        const int c = i % 2;
        X.push_back({rng.normal() + 3.0 * c, rng.normal()});
        y.push_back(c);
    }
    EXPECT_GT(probe_auc(X, y, X, y), 0.95);
}

TEST(WelchTest, DetectsShiftAndEffectSize) {
    Philox rng(5);
    std::vector<double> a, b;
    for (int i = 0; i < 400; ++i) a.push_back(rng.normal() + 0.5), b.push_back(rng.normal());
    const auto t = welch_test(a, b);
    EXPECT_LT(t.p_value, 1e-6);
    EXPECT_NEAR(t.effect_size, 0.5, 0.15);
    const auto same = welch_test(b, b);
    EXPECT_NEAR(same.p_value, 0.5, 1e-12);
}

class MlmGrad : public ::testing::TestWithParam<std::tuple<MlmVariant, std::uint64_t>> {};

TEST_P(MlmGrad, LossPassesFiniteDifferenceCheck) {
    const auto [variant, seed] = GetParam();
    const auto cfg = tiny_mlm(variant, seed);
    auto ps = init_mlm_params<double>(cfg);
    const auto recs = records(4, seed + 20);
    std::vector<const MultiModalRecord*> rows;
    for (const auto& r : recs) rows.push_back(&r);
    const auto batch = make_mlm_batch<double>(rows);
    diff::GradCheckOptions opt;
    opt.seed = seed;
    const auto rep = diff::grad_check(
        [&](diff::Tape<double>& t, std::vector<ParamSet<double>*>& sets) { return mlm_loss(t, *sets[0], cfg, batch); },
        {&ps}, opt);
    EXPECT_TRUE(rep.passed()) << "max rel error " << rep.max_rel_error << " at "
                              << (rep.worst.empty() ? "" : rep.worst[0].tensor);
    EXPECT_GT(rep.checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, MlmGrad,
                         ::testing::Combine(::testing::Values(MlmVariant::full, MlmVariant::image_only,
                                                              MlmVariant::factor_only),
                                            ::testing::Values(1u, 2u, 3u)));

TEST(Mlm, VariantsOmitUnusedPath) {
    const auto full = init_mlm_params<float>(tiny_mlm(MlmVariant::full, 1));
    const auto img = init_mlm_params<float>(tiny_mlm(MlmVariant::image_only, 1));
    const auto fac = init_mlm_params<float>(tiny_mlm(MlmVariant::factor_only, 1));
    EXPECT_TRUE(full.contains("img.fc.w") && full.contains("fac.fc4.w"));
    EXPECT_TRUE(img.contains("img.fc.w") && !img.contains("fac.fc1.w"));
    EXPECT_TRUE(!fac.contains("img.fc.w") && fac.contains("fac.fc4.w"));
    EXPECT_FALSE(fac.contains("fac.fc5.w"));
}

TEST(Mlm, SmokeSixteenRecordsTwoEpochs) {
    const auto recs = records(16, 3);
    auto cfg = tiny_mlm(MlmVariant::full, 4);
    cfg.adam.max_epochs = 2;
    cfg.adam.lr = 1e-3;
    const auto span = std::span<const MultiModalRecord>(recs);
    const auto model = train_mlm(span.first(10), span.subspan(10), cfg);
    const double a = evaluate_auc(model, span.subspan(10));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_GE(model.best_epoch, 1);
}

TEST(Mlm, SameSeedSameAuc) {
    const auto recs = records(40, 5);
    auto cfg = tiny_mlm(MlmVariant::full, 6);
    cfg.adam.max_epochs = 3;
    const auto span = std::span<const MultiModalRecord>(recs);
    const auto a = train_mlm(span.first(24), span.subspan(24, 8), cfg);
    const auto b = train_mlm(span.first(24), span.subspan(24, 8), cfg);
    EXPECT_EQ(evaluate_auc(a, span.subspan(32)), evaluate_auc(b, span.subspan(32)));
    EXPECT_EQ(score(a, span), score(b, span));
}

TEST(Mlm, RejectsIncompleteRecords) {
    auto recs = records(12, 7);
    recs[2].factors.mask[1] = 0;
    auto cfg = tiny_mlm(MlmVariant::full, 1);
    cfg.adam.max_epochs = 1;
    const auto span = std::span<const MultiModalRecord>(recs);
    EXPECT_THROW(train_mlm(span.first(8), span.subspan(8), cfg), DataError);
    recs[2].factors.mask[1] = 1;
    recs[3].images.tp1_present = false;
    EXPECT_THROW(train_mlm(span.first(8), span.subspan(8), cfg), DataError);
}

TEST(Mlm, NanAbortsWithCoordinates) {
    auto recs = records(12, 8);
    recs[0].factors.values[0] = NAN;
    auto cfg = tiny_mlm(MlmVariant::factor_only, 1);
    cfg.adam.max_epochs = 1;
    cfg.batch_size = 4;
    const auto span = std::span<const MultiModalRecord>(recs);
    try {
        train_mlm(span.first(8), span.subspan(8), cfg);
        FAIL() << "NaN accepted";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    }
}

// Calibration: the downstream model on fully observed data lands in the
// intended operating range.
TEST(Mlm, FullyObservedCalibration) {
    GeneratorConfig g;
    const auto s = make_dataset(g);
    MlmConfig cfg;
    cfg.adam.max_epochs = 40;
    cfg.adam.lr = 3e-3;
    cfg.batch_size = 128;
    cfg.seed = 1;
    const auto model = train_mlm(s.train.records, s.validation.records, cfg);
    const double a = evaluate_auc(model, s.test.records);
    EXPECT_GE(a, 0.85);
    EXPECT_LE(a, 0.97);
}
