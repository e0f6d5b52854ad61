#include "oracles.hpp"

#include "fp3d/approximator.hpp"
#include "fp3d/features.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <sstream>

using namespace fp3d;

namespace {

/// Random batch whose outputs sit at least `margin` away from every kink of
/// the loss (|err| = 0) and of the critic's ReLU (raw = 0).
Batch smooth_batch(const NetParams &p, int n, std::mt19937_64 &rng, double margin = 1e-3)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Batch b{Eigen::MatrixXd(p.in_dim(), n), Eigen::MatrixXd(3, n)};
    for (int j = 0; j < n; ++j) {
        for (int tries = 0;; ++tries) {
            for (int i = 0; i < p.in_dim(); ++i)
                b.inputs(i, j) = gauss(rng);
            for (int d = 0; d < 3; ++d)
                b.targets(d, j) = p.role() == Role::actor ? unit(rng) : 2.0 * unit(rng);
            ForwardCache c;
            forward(p, b.inputs.col(j), &c);
            bool ok = ((c.output - b.targets.col(j)).cwiseAbs().array() > margin).all();
            if (p.role() == Role::critic)
                ok = ok && (c.raw.cwiseAbs().array() > margin).all();
            if (ok)
                break;
            if (tries > 1000)
                throw std::runtime_error("could not sample a smooth batch");
        }
    }
    return b;
}

} // namespace

TEST(Approximator, RoleParsing)
{
    EXPECT_EQ(parse_role("actor"), Role::actor);
    EXPECT_EQ(parse_role("critic"), Role::critic);
    EXPECT_THROW(parse_role("pilot"), std::invalid_argument);
    EXPECT_EQ(to_string(Role::critic), "critic");
}

TEST(Approximator, ParameterLayout)
{
    NetParams p(Role::actor, 10, 7, 5);
    EXPECT_EQ(p.size(), 10 * 7 + 7 + 7 * 5 + 5 + 5 * 3 + 3);
    EXPECT_EQ(p.offset(0), 0);
    EXPECT_EQ(p.offset(1), 77);
    EXPECT_EQ(p.offset(2), 77 + 40);
    p.values()[p.offset(1) + 2] = 4.0; // row 0, column 2 of layer 1
    EXPECT_EQ(p.weight(1)(0, 2), 4.0);
    p.values()[p.offset(1) + 35 + 1] = 3.0;
    EXPECT_EQ(p.bias(1)[1], 3.0);
    EXPECT_THROW(NetParams(Role::actor, 0), std::invalid_argument);
}

TEST(Approximator, XavierInit)
{
    auto p = NetParams::initialized(Role::critic, 40, 9, 30, 20);
    const double limit0 = std::sqrt(6.0 / 70.0);
    EXPECT_LE(p.weight(0).cwiseAbs().maxCoeff(), limit0);
    EXPECT_GT(p.weight(0).cwiseAbs().maxCoeff(), 0.8 * limit0);
    EXPECT_EQ(p.bias(0).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(p.bias(2).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(p, NetParams::initialized(Role::critic, 40, 9, 30, 20));
    EXPECT_FALSE(p == NetParams::initialized(Role::critic, 40, 10, 30, 20));
}

TEST(Approximator, OutputRanges)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 3.0);
    auto actor = NetParams::initialized(Role::actor, 6, 1, 8, 8);
    auto critic = NetParams::initialized(Role::critic, 9, 1, 8, 8);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x(6);
        for (auto &v : x)
            v = g(rng);
        auto a = actor_forward(actor, x);
        for (int d = 0; d < 3; ++d) {
            EXPECT_GE(a[d], 0.0);
            EXPECT_LE(a[d], 1.0);
        }
        auto q = critic_forward(critic, x, ContinuousAction{{0.1, 0.2, 0.3}});
        for (double v : q)
            EXPECT_GE(v, 0.0);
    }
    std::vector<double> wrong(5, 0.0);
    EXPECT_THROW(actor_forward(actor, wrong), std::invalid_argument);
    EXPECT_THROW(actor_forward(critic, wrong), std::invalid_argument);
}

TEST(Approximator, BatchedCriticMatchesSingle)
{
    auto critic = NetParams::initialized(Role::critic, 9, 4, 16, 16);
    std::vector<double> f{0.1, -0.4, 0.9, 0.3, 0.0, 1.0};
    std::vector<ContinuousAction> cands{{{0, 0, 0}}, {{0.5, 0.2, 1}}, {{1, 1, 1}}};
    auto batched = critic_forward(critic, f, cands);
    for (std::size_t i = 0; i < cands.size(); ++i) {
        auto single = critic_forward(critic, f, cands[i]);
        for (int d = 0; d < 3; ++d)
            EXPECT_NEAR(batched[i][d], single[d], 1e-14);
    }
}

TEST(Approximator, Losses)
{
    EXPECT_NEAR(loss_actor({{0.5, 0.5, 0.5}}, {{0.6, 0.4, 0.5}}), 0.2, 1e-15);
    EXPECT_EQ(loss_critic({1, 2, 3}, {1, 2, 3}), 0.0);
    EXPECT_EQ(loss_critic({1, 2, 3}, {0, 4, 3}), 3.0);
}

TEST(Approximator, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(41);
    for (int i = 0; i < 10; ++i) {
        const Role role = i % 2 ? Role::critic : Role::actor;
        auto p = NetParams::initialized(role, 5 + i % 4, rng(), 6 + i % 3, 5);
        Batch b = smooth_batch(p, 4, rng);
        const Eigen::VectorXd analytic = backward(p, b);
        const Eigen::VectorXd numeric = oracle::numeric_gradient(p, b, 1e-5);
        EXPECT_LT(oracle::max_relative_error(p, analytic, numeric), 1e-4) << "net " << i;
    }
}

TEST(Approximator, GradientSignAtZeroError)
{
    // Targets equal to the outputs: every subgradient is zero.
    auto p = NetParams::initialized(Role::actor, 4, 3, 5, 5);
    Batch b{Eigen::MatrixXd::Random(4, 6), Eigen::MatrixXd()};
    b.targets = forward(p, b.inputs);
    double loss = -1.0;
    auto g = backward(p, b, &loss);
    EXPECT_EQ(loss, 0.0);
    EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Approximator, AdamFirstStepAndDecay)
{
    NetParams p(Role::actor, 2, 2, 2);
    p.values().setConstant(1.0);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.size());
    g[0] = 3.0;
    g[1] = -0.001;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 0.5;
    optimizer_step(p, g, cfg);
    EXPECT_EQ(p.step, 1);
    // Bias-corrected first step moves by lr * g / (|g| + eps) after decay.
    const double decayed = 1.0 - 0.01 * 0.5;
    EXPECT_NEAR(p.values()[0], decayed - 0.01 * 3.0 / (3.0 + 1e-8), 1e-12);
    EXPECT_NEAR(p.values()[1], decayed + 0.01 * 0.001 / (0.001 + 1e-8), 1e-12);
    EXPECT_NEAR(p.values()[2], decayed, 1e-15);
    EXPECT_NEAR(p.first_moment[0], 0.3, 1e-15);
    EXPECT_NEAR(p.second_moment[0], 0.009, 1e-15);

    Eigen::VectorXd short_grad(3);
    EXPECT_THROW(optimizer_step(p, short_grad, cfg), std::invalid_argument);
}

TEST(Approximator, CheckpointRoundTrip)
{
    std::mt19937_64 rng(4);
    for (int i = 0; i < 10; ++i) {
        auto p = NetParams::initialized(i % 2 ? Role::critic : Role::actor, 3 + i, rng(), 4, 6);
        Batch b = smooth_batch(p, 3, rng, 0.0);
        for (int s = 0; s < i; ++s)
            optimizer_step(p, backward(p, b), AdamConfig{});
        std::ostringstream os;
        write_checkpoint(os, p);
        std::istringstream is(os.str());
        auto q = read_checkpoint(is);
        EXPECT_EQ(q, p);
        std::ostringstream again;
        write_checkpoint(again, q);
        EXPECT_EQ(again.str(), os.str());
        EXPECT_EQ(os.str().rfind("sgf-ckpt v1 " + std::string(to_string(p.role())) + " " +
                                         std::to_string(3 + i) + " 4 6 3\n",
                                 0),
                  0u);
    }
}

TEST(Approximator, CheckpointRejectsDamage)
{
    auto p = NetParams::initialized(Role::actor, 3, 1, 2, 2);
    std::ostringstream os;
    write_checkpoint(os, p);
    const std::string good = os.str();
    auto fails = [](const std::string &text) {
        std::istringstream is(text);
        EXPECT_ANY_THROW(read_checkpoint(is)) << text.substr(0, 40);
    };
    fails(good.substr(0, good.size() / 2));
    fails(good + "1.0\n");
    fails("sgf-ckpt v2" + good.substr(11));
    std::string bad_num = good;
    bad_num.replace(good.find('\n') + 1, 1, "x");
    fails(bad_num);
    fails("sgf-ckpt v1 actor 3 2 2 4\n");
}

TEST(Approximator, FitsSmallDataset)
{
    // The net can drive the training loss on a small fixed set well down.
    std::mt19937_64 rng(6);
    auto p = NetParams::initialized(Role::actor, 6, 1, 32, 32);
    Batch b = smooth_batch(p, 32, rng, 0.0);
    const double start = batch_loss(p, b);
    AdamConfig cfg;
    cfg.learning_rate = 3e-3;
    for (int s = 0; s < 1500; ++s)
        optimizer_step(p, backward(p, b), cfg);
    EXPECT_LT(batch_loss(p, b), 0.25 * start);
}

TEST(Approximator, DuplicatedSampleGradient)
{
    std::mt19937_64 rng(9);
    for (Role role : {Role::actor, Role::critic}) {
        auto p = NetParams::initialized(role, 9, 5, 12, 10);
        Batch one = smooth_batch(p, 1, rng);
        Batch two{Eigen::MatrixXd(9, 2), Eigen::MatrixXd(3, 2)};
        two.inputs << one.inputs, one.inputs;
        two.targets << one.targets, one.targets;
        const Eigen::VectorXd g1 = backward(p, one), g2 = backward(p, two);
        EXPECT_LE((g1 - g2).cwiseAbs().maxCoeff(), 1e-14 * (1.0 + g1.cwiseAbs().maxCoeff()));
    }
}

TEST(Approximator, ZeroParameters)
{
    NetParams actor(Role::actor, 7, 5, 4);
    NetParams critic(Role::critic, 10, 5, 4);
    ASSERT_EQ(actor.values().cwiseAbs().maxCoeff(), 0.0);
    std::vector<double> x{1, -2, 3, 0.5, 9, -7, 2};
    EXPECT_EQ(actor_forward(actor, x), (ContinuousAction{{0.5, 0.5, 0.5}}));
    EXPECT_EQ(critic_forward(critic, x, ContinuousAction{{0.3, 0.1, 1}}), (Rtg{0, 0, 0}));
}

TEST(Approximator, SeededInitIsBitIdentical)
{
    auto a = NetParams::initialized(Role::actor, 50, 42);
    auto b = NetParams::initialized(Role::actor, 50, 42);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.values().data(), b.values().data(), sizeof(double) * std::size_t(a.size())), 0);
}

// ---------------------------------------------------------------------------
// Features

TEST(Features, PoolBoundsCoverAxis)
{
    for (int extent = 1; extent <= 60; ++extent) {
        std::vector<int> hits(static_cast<std::size_t>(extent), 0);
        for (int t = 0; t < kPoolGrid; ++t) {
            auto [lo, hi] = pool_bounds(t, extent);
            ASSERT_LT(lo, hi);
            ASSERT_GE(lo, 0);
            ASSERT_LE(hi, extent);
            for (int i = lo; i < hi; ++i)
                ++hits[static_cast<std::size_t>(i)];
        }
        for (int h : hits)
            EXPECT_GE(h, 1);
    }
    EXPECT_EQ(pool_bounds(3, 48), std::make_pair(24, 32));
}

TEST(Features, Toy3AtReset)
{
    const CanvasConfig cfg{6, 6, 2};
    Environment env(make_toy3(), cfg);
    CanvasState s = env.reset();
    RtgStats stats{{2.0, 0.5, 1.0}, {0.5, 0.25, 2.0}};
    auto f = features(env, s, env.feature_maps(s, nullptr), {3.0, 0.5, 100.0}, stats, std::nullopt);
    ASSERT_EQ(int(f.size()), feature_length(cfg));
    ASSERT_EQ(f.size(), 108u * 2 + 13);
    for (int i = 0; i < 72; ++i)
        EXPECT_EQ(f[i], 0.0) << i;
    // Wirelength block: 1 where a 2x2 fits (no increase yet), 0 elsewhere.
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                EXPECT_EQ(f[72 + z * 36 + y * 6 + x], (x < 5 && y < 5) ? 1.0 : 0.0);
    for (int i = 144; i < 216; ++i)
        EXPECT_EQ(f[i], 0.0);
    EXPECT_DOUBLE_EQ(f[216], 2.0 / 6);
    EXPECT_DOUBLE_EQ(f[217], 2.0 / 6);
    EXPECT_DOUBLE_EQ(f[218], 4.0 / 36);
    EXPECT_DOUBLE_EQ(f[219], 0.5);
    EXPECT_EQ(f[220], 1.0);
    EXPECT_EQ(f[221], 1.0);
    EXPECT_EQ(rtg_feature_offset(cfg), 222);
    EXPECT_DOUBLE_EQ(f[222], 2.0);
    EXPECT_DOUBLE_EQ(f[223], 0.0);
    EXPECT_DOUBLE_EQ(f[224], kRtgFeatureClip);
    EXPECT_EQ(f[225], 0.0);
    EXPECT_EQ(f[226] + f[227] + f[228], 0.0);
}

TEST(Features, AfterOneStep)
{
    const CanvasConfig cfg{6, 6, 2};
    Environment env(make_toy3(), cfg);
    CanvasState s0 = env.reset();
    CanvasState s1 = env.step(s0, {0, 0, 1}).state;
    auto maps = env.feature_maps(s1, &s0);
    auto f = features(env, s1, maps, {0, 0, 0}, RtgStats{}, Anchor{0, 0, 1});
    EXPECT_EQ(f[36 + 0], 1.0);
    EXPECT_EQ(f[36 + 7], 1.0);
    EXPECT_EQ(f[36 + 2], 0.0);
    EXPECT_EQ(f[144 + 36 + 1], 1.0);
    EXPECT_DOUBLE_EQ(f[220], 2.0 / 3);
    EXPECT_DOUBLE_EQ(f[221], 3.0 / 7);
    EXPECT_DOUBLE_EQ(f[225], 1.0 / 3);
    EXPECT_EQ(f[228], 1.0);
    // Mapped wirelength increases stay in [0, 1].
    for (int i = 72; i < 144; ++i) {
        EXPECT_GE(f[i], 0.0);
        EXPECT_LE(f[i], 1.0);
    }
}

TEST(Features, PromptAtMeanGivesZeroRtgBlock)
{
    const CanvasConfig cfg{6, 6, 2};
    Environment env(make_toy3(), cfg);
    CanvasState s = env.reset();
    RtgStats stats{{2.0, 0.5, 1.0}, {0.5, 0.25, 2.0}};
    auto f = features(env, s, env.feature_maps(s, nullptr), stats.mean, stats, std::nullopt);
    const int off = rtg_feature_offset(cfg);
    for (int d = 0; d < 3; ++d)
        EXPECT_EQ(f[std::size_t(off + d)], 0.0);
}

TEST(Features, FullLayerPoolsToOnes)
{
    const CanvasConfig cfg{6, 6, 2};
    Netlist n;
    n.name = "slab";
    n.modules = {{0, "slab", 6, 6}, {1, "dot", 1, 1}};
    Environment env(n, cfg);
    CanvasState s0 = env.reset();
    CanvasState s1 = env.step(s0, {0, 0, 0}).state;
    auto f = features(env, s1, env.feature_maps(s1, &s0), {0, 0, 0}, RtgStats{}, Anchor{0, 0, 0});
    for (int i = 0; i < 36; ++i)
        EXPECT_EQ(f[std::size_t(i)], 1.0) << i;
    for (int i = 36; i < 72; ++i)
        EXPECT_EQ(f[std::size_t(i)], 0.0) << i;
}

TEST(Features, CriticUnits)
{
    RtgStats stats{{4.0, -0.5, 0.0}, {1, 1, 1}};
    auto scale = stats.critic_scale();
    EXPECT_EQ(scale[0], 4.0);
    EXPECT_EQ(scale[1], 0.5);
    EXPECT_EQ(scale[2], 1e-6);
    Rtg g{2.0, 0.25, 3e-6};
    auto u = stats.to_critic_units(g);
    EXPECT_DOUBLE_EQ(u[0], 0.5);
    auto back = stats.from_critic_units(u);
    for (int d = 0; d < 3; ++d)
        EXPECT_NEAR(back[d], g[d], 1e-15);
}
