#include <gtest/gtest.h>

#include <set>

#include "cpbigan/downstream/metrics.hpp"
#include "cpbigan/synthgen.hpp"

using namespace cpbigan;

TEST(Generator, NoiselessSizeMatchesFormula) {
    GeneratorConfig g;
    g.noise_scale = 0;
    g.signal_strength = 1.4;
    for (int i = 0; i < 200; ++i) {
        const auto raw = generate_raw(g, i);
        const double expected = raw.label ? 6.0 + 4.0 * 1.4 : 6.0; // 11.6 mm for y = 1
        EXPECT_DOUBLE_EQ(raw.factors[kSizeFactor], expected);
        EXPECT_DOUBLE_EQ(raw.factors[kSpiculationFactor], raw.label ? 2.0 + 1.5 * 1.4 : 2.0);
    }
}

TEST(Generator, DeterministicPerSeedAndIndex) {
    GeneratorConfig g;
    EXPECT_EQ(generate_record(g, 17), generate_record(g, 17));
    EXPECT_NE(generate_record(g, 17), generate_record(g, 18));
}

TEST(Generator, ClassBalanceWithinBinomialInterval) {
    GeneratorConfig g;
    g.n = 10000;
    int pos = 0;
    for (int i = 0; i < g.n; ++i) pos += generate_raw(g, i).label;
    EXPECT_NEAR(pos / 10000.0, 0.5, 0.02);
}

TEST(Generator, RejectsOutOfRangeIndexAndBadConfig) {
    GeneratorConfig g;
    g.n = 5;
    EXPECT_THROW(generate_raw(g, 5), ConfigError);
    g.class_balance = 1.0;
    EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Generator, NuisanceFactorsCarryNoClassSignal) {
    GeneratorConfig g;
    g.n = 4000;
    std::vector<double> age;
    std::vector<int> y;
    for (int i = 0; i < g.n; ++i) {
        const auto r = generate_raw(g, i);
        age.push_back(r.factors[0]);
        y.push_back(r.label);
    }
    EXPECT_NEAR(downstream::auc(age, y), 0.5, 0.03);
}

TEST(Render, BlobRadiusAtMinimumSize) {
    RenderConfig rc;
    EXPECT_DOUBLE_EQ(blob_radius(0.0, rc), rc.min_radius);
    EXPECT_DOUBLE_EQ(blob_radius(1.0, rc), rc.max_radius);
    EXPECT_DOUBLE_EQ(blob_radius(-1.0, rc), rc.min_radius);
}

TEST(Render, MalignantBrighterAtIdenticalFactors) {
    FactorVector f;
    std::fill(f.values.begin(), f.values.end(), 0.4f);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto benign = render_nodule(f, 0, seed, Timepoint::tp1);
        const auto malignant = render_nodule(f, 1, seed, Timepoint::tp1);
        EXPECT_GT(central_mean(malignant), central_mean(benign));
    }
}

TEST(Render, GrowthMakesTp1AtLeastAsLarge) {
    FactorVector f;
    std::fill(f.values.begin(), f.values.end(), 0.5f);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto tp0 = render_nodule(f, 1, seed, Timepoint::tp0);
        const auto tp1 = render_nodule(f, 1, seed, Timepoint::tp1);
        EXPECT_GE(central_mean(tp1), central_mean(tp0));
    }
}

TEST(Render, NoiselessBackgroundIdenticalOutsideWindowForBenign) {
    GeneratorConfig g;
    g.noise_scale = 0;
    int checked = 0;
    for (int i = 0; i < 100 && checked < 10; ++i) {
        const auto raw = generate_raw(g, i);
        if (raw.label != 0) continue;
        const auto img = render_pair(raw, g);
        for (int r = 0; r < kImageSide; ++r)
            for (int c = 0; c < kImageSide; ++c)
                if (!in_center_window(r, c)) {
                    ASSERT_EQ(img.tp0.at(r, c), img.tp1.at(r, c));
                }
        ++checked;
    }
    EXPECT_EQ(checked, 10);
}

TEST(Render, OutsideWindowDifferencesBoundedBySpillOver) {
    GeneratorConfig g;
    for (int i = 0; i < 50; ++i) {
        const auto raw = generate_raw(g, i);
        const auto img = render_pair(raw, g);
        const double centre = (kImageSide - 1) / 2.0;
        // Far from the centre the blob has no mass; only acquisition noise differs.
        for (int r = 0; r < kImageSide; ++r)
            for (int c = 0; c < kImageSide; ++c) {
                const double d = std::hypot(r - centre, c - centre);
                if (d > 14) {
                    ASSERT_LT(std::abs(img.tp0.at(r, c) - img.tp1.at(r, c)), 0.25f);
                }
            }
    }
}

TEST(Render, PixelsInUnitInterval) {
    GeneratorConfig g;
    for (int i = 0; i < 30; ++i) {
        const auto r = generate_record(g, i);
        for (float v : r.images.tp1.pixels) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LE(v, 1.0f);
        }
    }
}

TEST(MakeDataset, SplitSizesForTen) {
    GeneratorConfig g;
    g.n = 10;
    const auto s = make_dataset(g);
    EXPECT_EQ(s.train.records.size(), 6u);
    EXPECT_EQ(s.validation.records.size(), 2u);
    EXPECT_EQ(s.test.records.size(), 2u);
}

TEST(MakeDataset, RejectsTooSmall) {
    GeneratorConfig g;
    g.n = 9;
    EXPECT_THROW(make_dataset(g), ConfigError);
}

TEST(MakeDataset, DeterministicAndDisjoint) {
    GeneratorConfig g;
    const auto a = make_dataset(g), b = make_dataset(g);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::set<std::uint64_t> ids;
    for (const auto* d : {&a.train, &a.validation, &a.test})
        for (const auto& r : d->records) EXPECT_TRUE(ids.insert(r.id).second) << "id " << r.id << " in two splits";
    EXPECT_EQ(ids.size(), 1000u);
    EXPECT_EQ(a.train.records.size(), 600u);
    EXPECT_EQ(a.validation.records.size(), 200u);
}

TEST(MakeDataset, StatsComeFromTrainOnly) {
    GeneratorConfig g;
    g.n = 200;
    const auto s = make_dataset(g);
    std::vector<std::vector<double>> raw;
    for (const auto& r : s.train.records) raw.push_back(generate_raw(g, static_cast<int>(r.id)).factors);
    EXPECT_EQ(s.train.stats, compute_stats(raw));
    EXPECT_EQ(s.test.stats, s.train.stats);
}

// Each modality alone must be predictive: logistic probe on true factors and
// on the tp1 central window, fit on train, scored on test.
TEST(MakeDataset, EachModalityPredictiveAlone) {
    GeneratorConfig g;
    const auto s = make_dataset(g);
    auto factor_rows = [](const Dataset& d) {
        std::vector<std::vector<double>> x;
        for (const auto& r : d.records) x.emplace_back(r.factors.values.begin(), r.factors.values.end());
        return x;
    };
    auto image_rows = [](const Dataset& d) {
        std::vector<std::vector<double>> x;
        for (const auto& r : d.records) {
            std::vector<double> f;
            for (int row = 8; row < 24; row += 2)
                for (int col = 8; col < 24; col += 2) f.push_back(r.images.tp1.at(row, col));
            x.push_back(std::move(f));
        }
        return x;
    };
    auto labels = [](const Dataset& d) {
        std::vector<int> y;
        for (const auto& r : d.records) y.push_back(r.label);
        return y;
    };
    const double fa = downstream::probe_auc(factor_rows(s.train), labels(s.train), factor_rows(s.test), labels(s.test));
    const double ia = downstream::probe_auc(image_rows(s.train), labels(s.train), image_rows(s.test), labels(s.test));
    EXPECT_GT(fa, 0.8);
    EXPECT_GT(ia, 0.8);
}
