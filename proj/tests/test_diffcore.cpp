#include <gtest/gtest.h>

#include <cmath>

#include "cpbigan/diff/gradcheck.hpp"
#include "cpbigan/diff/layers.hpp"

using namespace cpbigan;
using namespace cpbigan::diff;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
    Tensor<double> t(std::move(s));
    Philox rng(seed);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST(Layers, AffineIdentity) {
    Tape<double> t;
    Tensor<double> w({3, 3});
    for (int i = 0; i < 3; ++i) w[static_cast<std::size_t>(i * 3 + i)] = 1;
    auto x = t.constant(Tensor<double>({1, 3}, {0.5, -2.0, 7.0}));
    auto y = affine(t, x, t.constant(w), t.constant(Tensor<double>({3})));
    EXPECT_EQ(t.value(y).data, (std::vector<double>{0.5, -2.0, 7.0}));
}

TEST(Layers, Relu) {
    Tape<float> t;
    auto y = relu(t, t.constant(Tensor<float>({2}, {-1.f, 2.f})));
    EXPECT_EQ(t.value(y).data, (std::vector<float>{0.f, 2.f}));
}

TEST(Layers, SiluValues) {
    Tape<double> t;
    auto y = silu(t, t.constant(Tensor<double>({3}, {-2.0, 0.0, 3.0})));
    const auto& v = t.value(y).data;
    EXPECT_NEAR(v[0], -2.0 / (1.0 + std::exp(2.0)), 1e-15);
    EXPECT_EQ(v[1], 0.0);
    EXPECT_NEAR(v[2], 3.0 / (1.0 + std::exp(-3.0)), 1e-15);
}

TEST(Layers, GruWithSaturatedUpdateGateKeepsState) {
    ParamSet<double> ps;
    add_gru(ps, "g", 2, 3, 5);
    ps["g.zx.b"].data.assign(3, 50.0);
    Tape<double> t;
    Bound<double> net{t, ps};
    const Tensor<double> h0({1, 3}, {0.3, -0.7, 0.1});
    auto h1 = net.gru("g", t.constant(Tensor<double>({1, 2}, {0.0, 0.0})), t.constant(h0));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(t.value(h1)[i], h0[i], 1e-12);
}

TEST(Layers, ConvAllOnesValidPadding) {
    Tape<double> t;
    auto x = t.constant(Tensor<double>({1, 1, 5, 5}, 1.0));
    auto w = t.constant(Tensor<double>({1, 1, 3, 3}, 1.0));
    auto y = conv2d(t, x, w, Var{}, 1, 0);
    EXPECT_EQ(t.shape(y), (Shape{1, 1, 3, 3}));
    for (double v : t.value(y).data) EXPECT_EQ(v, 9.0);
}

TEST(Layers, TransposedConvIsAdjointOfConv) {
    // <conv(x), y> == <x, conv_T(y)> for shared weights.
    const int k = 4, s = 2, p = 1;
    auto xv = random_tensor({1, 2, 8, 8}, 1);
    auto yv = random_tensor({1, 3, 4, 4}, 2);
    auto wv = random_tensor({3, 2, k, k}, 3);
    Tape<double> t;
    auto cx = conv2d(t, t.constant(xv), t.constant(wv), Var{}, s, p);
    Tensor<double> wt({3, 2, k, k}, wv.data); // conv_T expects [in=3, out=2, k, k]
    auto ty = conv_transpose2d(t, t.constant(yv), t.constant(wt), Var{}, s, p);
    ASSERT_EQ(t.shape(ty), xv.shape);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < yv.size(); ++i) lhs += t.value(cx)[i] * yv[i];
    for (std::size_t i = 0; i < xv.size(); ++i) rhs += xv[i] * t.value(ty)[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Layers, ShapeMismatchRejected) {
    Tape<float> t;
    auto x = t.constant(Tensor<float>({2, 3}));
    auto w = t.constant(Tensor<float>({4, 5}));
    EXPECT_THROW(affine(t, x, w), DataError);
    EXPECT_THROW(add(t, x, w), DataError);
}

TEST(Losses, BceAndCeAnchors) {
    EXPECT_NEAR(bce_loss(0.25, 1), 1.3862943611198906, 1e-12);
    EXPECT_NEAR(bce_loss(0.75, 0), bce_loss(0.25, 1), 1e-12); // (p,1) <-> (1-p,0)
    const std::vector<double> uniform{0.5, 0.5};
    EXPECT_NEAR(ce_loss(uniform, 1), std::log(2.0), 1e-12);
    const std::vector<double> perfect{0.0, 1.0};
    EXPECT_LE(ce_loss(perfect, 1), -std::log(1 - kProbEps) + 1e-15);
    EXPECT_GE(ce_loss(perfect, 1), 0.0);
    const std::vector<double> logits{0.0, 0.0};
    EXPECT_NEAR(ce_loss_logits(logits, 0), std::log(2.0), 1e-12);
}

TEST(Losses, TapeCrossEntropyMatchesScalar) {
    Tape<double> t;
    auto logits = t.constant(Tensor<double>({2, 2}, {0.3, -1.2, 2.0, 0.5}));
    const std::vector<int> y{1, 0};
    const double want = 0.5 * (ce_loss_logits(std::vector<double>{0.3, -1.2}, 1) + ce_loss_logits(std::vector<double>{2.0, 0.5}, 0));
    EXPECT_NEAR(t.scalar(softmax_cross_entropy(t, logits, std::span<const int>(y), kProbEps)), want, 1e-12);
}

TEST(Adam, ZeroGradsLeaveParamsUnchanged) {
    ParamSet<float> ps;
    ps.add("w", Tensor<float>({3}, {1.f, -2.f, 3.5f}));
    const auto before = ps;
    AdamConfig cfg;
    for (long step = 1; step <= 5; ++step) adam_step(ps, {Tensor<float>({3})}, cfg, step);
    EXPECT_EQ(ps, before);
}

TEST(Adam, FirstStepClosedForm) {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>({1}, {0.0}));
    AdamConfig cfg; // lr 1e-4
    adam_step(ps, {Tensor<double>({1}, {1.0})}, cfg, 1);
    // m_hat = v_hat = 1 at t = 1, so the step is lr / (1 + eps).
    EXPECT_NEAR(ps["w"][0], -1e-4 / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(ps["w"][0], -9.9999e-5, 1e-9);
}

TEST(Adam, ConstantGradientStepTendsToLr) {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>({1}, {0.0}));
    AdamConfig cfg;
    double prev = 0;
    double last_update = 0;
    for (long step = 1; step <= 20000; ++step) {
        adam_step(ps, {Tensor<double>({1}, {0.37})}, cfg, step);
        last_update = prev - ps["w"][0];
        prev = ps["w"][0];
    }
    EXPECT_NEAR(last_update, cfg.lr, 1e-9);
}

TEST(Adam, NonFiniteGradientNamesTensor) {
    ParamSet<float> ps;
    ps.add("enc.fc1.w", Tensor<float>({1}));
    try {
        adam_step(ps, {Tensor<float>({1}, {NAN})}, AdamConfig{}, 1);
        FAIL();
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("enc.fc1.w"), std::string::npos);
    }
}

TEST(GradCheck, Quadratic) {
    ParamSet<double> ps;
    ps.add("x", random_tensor({6}, 4));
    auto rep = grad_check(
        [](Tape<double>& t, std::vector<ParamSet<double>*>& p) {
            auto x = t.param(*p[0], "x");
            return scale(t, sum(t, mul(t, x, x)), 0.5);
        },
        {&ps}, {.tol = 1e-8});
    EXPECT_TRUE(rep.passed()) << rep.max_rel_error;
    EXPECT_EQ(rep.checked, 6u);
}

TEST(GradCheck, AffineReluBceComposite) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ParamSet<double> ps;
        add_dense(ps, "fc1", 5, 8, seed);
        add_dense(ps, "fc2", 8, 1, seed);
        const auto x = random_tensor({4, 5}, seed + 10);
        const std::vector<int> y{0, 1, 1, 0};
        auto rep = grad_check(
            [&](Tape<double>& t, std::vector<ParamSet<double>*>& p) {
                Bound<double> net{t, *p[0]};
                auto h = net.dense("fc1", t.constant(x), Activation::relu);
                auto prob = net.dense("fc2", h, Activation::sigmoid);
                return binary_cross_entropy(t, prob, std::span<const int>(y), kProbEps);
            },
            {&ps});
        EXPECT_TRUE(rep.passed()) << "seed " << seed << " max rel " << rep.max_rel_error;
    }
}

TEST(GradCheck, SiluGruSequence) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ParamSet<double> ps;
        add_gru(ps, "g", 4, 3, seed);
        add_dense(ps, "out", 3, 1, seed);
        const auto x0 = random_tensor({5, 4}, seed + 20);
        const auto x1 = random_tensor({5, 4}, seed + 30);
        const std::vector<int> y{1, 0, 0, 1, 1};
        auto rep = grad_check(
            [&](Tape<double>& t, std::vector<ParamSet<double>*>& p) {
                Bound<double> net{t, *p[0]};
                Var h = t.constant(Tensor<double>({5, 3}));
                h = net.gru("g", silu(t, t.constant(x0)), h);
                h = net.gru("g", silu(t, t.constant(x1)), h);
                auto prob = net.dense("out", h, Activation::sigmoid);
                return binary_cross_entropy(t, prob, std::span<const int>(y), kProbEps);
            },
            {&ps});
        EXPECT_TRUE(rep.passed()) << "seed " << seed << " max rel " << rep.max_rel_error;
    }
}

TEST(GradCheck, ConvolutionalStack) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ParamSet<double> ps;
        add_conv(ps, "c1", 2, 3, 3, seed);
        add_conv_transpose(ps, "d1", 3, 2, 4, 2, seed);
        add_dense(ps, "z", 4, 2, seed);
        add_dense(ps, "out", 8 * 4 * 4, 2, seed);
        ps.add("input", random_tensor({2, 2, 8, 8}, seed + 20, 0, 1));
        ps.add("code", random_tensor({2, 4}, seed + 30));
        const std::vector<int> y{1, 0};
        auto rep = grad_check(
            [&](Tape<double>& t, std::vector<ParamSet<double>*>& p) {
                Bound<double> net{t, *p[0]};
                auto h = net.conv("c1", net.p("input"), 2, 1, Activation::leaky_relu);        // [2,3,4,4]
                auto u = net.deconv("d1", h, 2, 1, Activation::tanh);                          // [2,2,8,8]
                auto pooled = avg_pool2(t, u);                                                 // [2,2,4,4]
                auto zt = tile_spatial(t, net.dense("z", net.p("code"), Activation::sigmoid), 4, 4); // [2,2,4,4]
                auto cat = concat(t, {pooled, zt, zt});                                              // [2,6,4,4]
                auto logits = net.dense("out", flatten(t, concat(t, {cat, pooled})), Activation::none);
                return softmax_cross_entropy(t, logits, std::span<const int>(y), kProbEps);
            },
            {&ps});
        EXPECT_TRUE(rep.passed()) << "seed " << seed << " max rel " << rep.max_rel_error << " at "
                                  << (rep.worst.empty() ? "" : rep.worst[0].tensor);
    }
}

TEST(GradCheck, FlagsCorruptedGradient) {
    ParamSet<double> ps;
    ps.add("x", random_tensor({5}, 9, 0.5, 1.5));
    auto rep = grad_check(
        [](Tape<double>& t, std::vector<ParamSet<double>*>& p) {
            auto x = t.param(*p[0], "x");
            auto sq = mul(t, x, x);
            // identity whose backward is 10% too large
            const int self = static_cast<int>(t.size());
            auto bad = t.push(t.value(sq), true, [sq, self](Tape<double>& tp) {
                const auto& g = tp.grad(Var{self});
                auto& gs = tp.grad(sq);
                for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += 1.1 * g[i];
            });
            return sum(t, bad);
        },
        {&ps});
    EXPECT_FALSE(rep.passed());
    EXPECT_NEAR(rep.max_rel_error, 0.1 / 1.1, 1e-6);
}

TEST(Tape, ForwardIsDeterministic) {
    auto run = [] {
        ParamSet<float> ps;
        add_conv(ps, "c", 1, 4, 3, 7);
        add_dense(ps, "fc", 4 * 16 * 16, 3, 7);
        Tape<float> t;
        Bound<float> net{t, ps};
        Tensor<float> x({2, 1, 32, 32});
        Philox rng(5);
        for (auto& v : x.data) v = static_cast<float>(rng.uniform());
        auto h = net.conv("c", t.constant(x), 2, 1, Activation::relu);
        return t.value(net.dense("fc", flatten(t, h))).data;
    };
    EXPECT_EQ(run(), run());
}
