#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "synqec/nn.hpp"
#include "synqec/rng.hpp"

using namespace synqec;
using nn::Activation;
using nn::DenseLayer;
using nn::Mlp;
using nn::Vec;

namespace {

Mlp single(const std::vector<std::vector<double>>& w, const Vec& b, Activation act) {
    Mlp m;
    DenseLayer l(static_cast<int>(w[0].size()), static_cast<int>(w.size()), act);
    for (size_t r = 0; r < w.size(); ++r)
        for (size_t c = 0; c < w[r].size(); ++c) l.w.at(static_cast<int>(r), static_cast<int>(c)) = w[r][c];
    l.b = b;
    m.layers.push_back(l);
    return m;
}

Mlp random_mlp(Rng& rng, int in, int hidden, int out, Activation mid, Activation last) {
    Mlp m;
    m.layers.emplace_back(in, hidden, mid);
    m.layers.emplace_back(hidden, out, last);
    nn::init_layer(m.layers[0], rng, 1.0);
    nn::init_layer(m.layers[1], rng, 1.0);
    for (auto& l : m.layers)
        for (auto& b : l.b) b = 0.1 * rng.normal();
    return m;
}

}  // namespace

TEST(Forward, IdentityMatrixPassesThrough) {
    const Mlp m = single({{1, 0}, {0, 1}}, {0, 0}, Activation::identity);
    const Vec y = nn::dense_forward(m, {3, 4});
    EXPECT_DOUBLE_EQ(y[0], 3.0);
    EXPECT_DOUBLE_EQ(y[1], 4.0);
}

TEST(Forward, ReluClipsNegative) {
    const Mlp m = single({{1, 1}}, {-2}, Activation::relu);
    const Vec y = nn::dense_forward(m, {1, 0});
    EXPECT_DOUBLE_EQ(y[0], 0.0);
}

TEST(Forward, SigmoidAtZeroIsHalf) {
    const Mlp m = single({{0}}, {0}, Activation::sigmoid);
    EXPECT_DOUBLE_EQ(nn::dense_forward(m, {5})[0], 0.5);
}

TEST(Forward, DeterministicBitIdentical) {
    Rng rng(7, 1, 0);
    Mlp m = random_mlp(rng, 6, 9, 4, Activation::relu, Activation::identity);
    Vec x(6);
    for (auto& v : x) v = rng.normal();
    const Vec a = nn::dense_forward(m, x);
    const Vec b = nn::dense_forward(m, x);
    EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(Backward, LinearChainRule) {
    Mlp m = single({{2}}, {0}, Activation::identity);
    nn::Trace t;
    nn::dense_forward(m, {3}, &t);
    nn::Grads g = nn::Grads::zeros_like(m);
    nn::dense_backward(m, t, {1}, g);
    EXPECT_DOUBLE_EQ(g.dw[0].at(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(g.db[0][0], 1.0);
    EXPECT_DOUBLE_EQ(g.dinput[0], 2.0);
}

TEST(Backward, SigmoidGradientAtZeroPre) {
    Mlp m = single({{1}}, {0}, Activation::sigmoid);
    nn::Trace t;
    nn::dense_forward(m, {0}, &t);
    nn::Grads g = nn::Grads::zeros_like(m);
    nn::dense_backward(m, t, {1}, g);
    EXPECT_DOUBLE_EQ(g.db[0][0], 0.25);
}

TEST(Backward, AccumulatesAcrossCalls) {
    Mlp m = single({{2}}, {0}, Activation::identity);
    nn::Trace t;
    nn::dense_forward(m, {3}, &t);
    nn::Grads g = nn::Grads::zeros_like(m);
    nn::dense_backward(m, t, {1}, g);
    nn::dense_backward(m, t, {1}, g);
    EXPECT_DOUBLE_EQ(g.dw[0].at(0, 0), 6.0);
}

TEST(GradCheck, HundredRandomNetworks) {
    Rng rng(11, 2, 0);
    int checked = 0, rejected = 0;
    const Activation mids[] = {Activation::relu, Activation::sigmoid, Activation::identity};
    for (int i = 0; i < 100; ++i) {
        Mlp m = random_mlp(rng, 4, 7, 3, mids[i % 3], Activation::identity);
        Vec x(4), up(3);
        for (auto& v : x) v = rng.normal();
        for (auto& v : up) v = rng.normal();
        const auto res = nn::grad_check(m, x, up);
        if (res.kink_excluded) {
            ++rejected;
            continue;
        }
        EXPECT_LT(res.max_rel_err, 1e-4) << "network " << i;
        ++checked;
    }
    EXPECT_GE(checked, 60);  // the kink filter must not reject the bulk
    (void)rejected;
}

TEST(GradCheck, LinearNetworkAtMachinePrecision) {
    Rng rng(13, 3, 0);
    Mlp m = random_mlp(rng, 5, 6, 2, Activation::identity, Activation::identity);
    Vec x(5), up(2);
    for (auto& v : x) v = rng.normal();
    for (auto& v : up) v = rng.normal();
    const auto res = nn::grad_check(m, x, up);
    ASSERT_FALSE(res.kink_excluded);
    EXPECT_LT(res.max_rel_err, 1e-7);
}

TEST(GradCheck, CorruptedGradientFails) {
    Mlp m = single({{1.5}}, {0.5}, Activation::identity);
    nn::Trace t;
    nn::dense_forward(m, {2}, &t);
    nn::Grads g = nn::Grads::zeros_like(m);
    nn::dense_backward(m, t, {1}, g);
    const double corrupted = 2.0 * g.dw[0].at(0, 0);
    // finite difference of J = output w.r.t. the weight
    const double h = 1e-5;
    Mlp mp = m, mm = m;
    mp.layers[0].w.at(0, 0) += h;
    mm.layers[0].w.at(0, 0) -= h;
    const double fd =
        (nn::dense_forward(mp, {2})[0] - nn::dense_forward(mm, {2})[0]) / (2 * h);
    EXPECT_GT(nn::rel_err(corrupted, fd), 1e-4);
    EXPECT_LT(nn::rel_err(g.dw[0].at(0, 0), fd), 1e-7);
}

TEST(Adam, ZeroGradLeavesParamsUntouched) {
    Rng rng(17, 4, 0);
    Mlp m = random_mlp(rng, 3, 5, 2, Activation::relu, Activation::identity);
    const Mlp before = m;
    nn::AdamState s = nn::AdamState::zeros_like(m);
    nn::Grads g = nn::Grads::zeros_like(m);
    for (int i = 0; i < 5; ++i) EXPECT_TRUE(nn::adam_step(m, g, s, 1e-3));
    for (size_t li = 0; li < m.layers.size(); ++li) {
        EXPECT_EQ(m.layers[li].w.data, before.layers[li].w.data);
        EXPECT_EQ(m.layers[li].b, before.layers[li].b);
    }
    EXPECT_EQ(s.t, 5);
}

TEST(Adam, FirstStepApproximatesSignedLr) {
    Mlp m = single({{1.0}}, {0.0}, Activation::identity);
    nn::AdamState s = nn::AdamState::zeros_like(m);
    nn::Grads g = nn::Grads::zeros_like(m);
    g.dw[0].at(0, 0) = 0.37;  // positive gradient
    const double lr = 8e-4;
    ASSERT_TRUE(nn::adam_step(m, g, s, lr));
    // bias-corrected first step: delta = -lr * g / (|g| + eps)
    EXPECT_NEAR(m.layers[0].w.at(0, 0), 1.0 - lr, 1e-9);
    EXPECT_DOUBLE_EQ(s.lr, 8e-4);
}

TEST(Adam, NonFiniteGradientRejected) {
    Mlp m = single({{1.0}}, {0.0}, Activation::identity);
    const Mlp before = m;
    nn::AdamState s = nn::AdamState::zeros_like(m);
    nn::Grads g = nn::Grads::zeros_like(m);
    g.dw[0].at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(nn::adam_step(m, g, s, 1e-3));
    EXPECT_EQ(m.layers[0].w.data, before.layers[0].w.data);
    EXPECT_EQ(s.t, 0);
}

TEST(Checkpoint, BitExactRoundTrip) {
    Rng rng(23, 5, 0);
    Mlp m;
    m.layers.emplace_back(7, 11, Activation::relu);
    m.layers.emplace_back(11, 3, Activation::sigmoid);
    for (auto& l : m.layers) {
        for (auto& v : l.w.data) v = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
        for (auto& v : l.b) v = rng.normal();
    }
    m.layers[0].w.data[0] = 0.1;  // classic non-representable decimal
    m.layers[0].w.data[1] = 1.0 / 3.0;
    const auto j = nn::mlp_to_json(m);
    const std::string text = j.dump();
    const Mlp back = nn::mlp_from_json(nlohmann::json::parse(text));
    ASSERT_EQ(back.layers.size(), m.layers.size());
    for (size_t li = 0; li < m.layers.size(); ++li) {
        ASSERT_EQ(back.layers[li].w.data.size(), m.layers[li].w.data.size());
        EXPECT_EQ(0, std::memcmp(back.layers[li].w.data.data(), m.layers[li].w.data.data(),
                                 m.layers[li].w.data.size() * sizeof(double)));
        EXPECT_EQ(0, std::memcmp(back.layers[li].b.data(), m.layers[li].b.data(),
                                 m.layers[li].b.size() * sizeof(double)));
        EXPECT_EQ(back.layers[li].act, m.layers[li].act);
    }
}

TEST(Checkpoint, ShapeMismatchThrows) {
    nlohmann::json j = {{"layers",
                         {{{"rows", 2},
                           {"cols", 2},
                           {"weights", {1.0, 2.0, 3.0}},  // 3 != 2*2
                           {"bias", {0.0, 0.0}},
                           {"activation", "relu"}}}}};
    EXPECT_THROW(nn::mlp_from_json(j), std::invalid_argument);
}

TEST(Checkpoint, ActivationNameRoundTrip) {
    for (auto a : {Activation::identity, Activation::relu, Activation::sigmoid})
        EXPECT_EQ(nn::activation_from_name(nn::activation_name(a)), a);
    EXPECT_THROW(nn::activation_from_name("tanh"), std::invalid_argument);
}
