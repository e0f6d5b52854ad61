#include "oracles.hpp"

#include "fp3d/environment.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fp3d;

namespace {

const CanvasConfig kSmall{6, 6, 2};

std::vector<std::optional<Anchor>> positions_after(const Environment &env, const std::vector<Anchor> &actions)
{
    return env.replay(actions).positions();
}

} // namespace

TEST(Environment, ResetOrderByDecreasingArea)
{
    Environment env(make_toy3(), kSmall);
    EXPECT_EQ(env.order(), (std::vector<int>{0, 1, 2}));
    CanvasState s = env.reset();
    EXPECT_EQ(s.t(), 0);
    EXPECT_EQ(env.next_module(s), 0);

    // Equal areas keep id order.
    Netlist n;
    n.name = "ties";
    n.modules = {{0, "p", 1, 2}, {1, "q", 3, 3}, {2, "r", 2, 1}};
    Environment ties(n, kSmall);
    EXPECT_EQ(ties.order(), (std::vector<int>{1, 0, 2}));
}

TEST(Environment, RejectsInvalidNetlist)
{
    Netlist n = make_toy3();
    n.modules[0].width = 7;
    EXPECT_THROW(Environment(n, kSmall), std::invalid_argument);
}

TEST(Environment, LegalCounts)
{
    Environment env(make_toy3(), kSmall);
    EXPECT_EQ(env.legal_actions(env.reset()).size(), 50u);

    // Fill layer 0 with 1x1 modules; the next 1x1 only fits on layer 1.
    Netlist n;
    n.name = "fill";
    for (int i = 0; i < 37; ++i)
        n.modules.push_back({i, "m" + std::to_string(i), 1, 1});
    Environment fill(n, kSmall);
    CanvasState s = fill.reset();
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            s = fill.step(s, {x, y, 0}).state;
    auto legal = fill.legal_actions(s);
    EXPECT_EQ(legal.size(), 36u);
    for (const auto &a : legal)
        EXPECT_EQ(a.z, 1);
}

TEST(Environment, LegalActionsMatchScan)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        Environment env(random_netlist(8, 10, 3, rng()), kSmall);
        CanvasState s = env.reset();
        while (env.next_module(s)) {
            auto legal = env.legal_actions(s);
            EXPECT_EQ(legal, oracle::legal_scan(env, s));
            EXPECT_TRUE(std::is_sorted(legal.begin(), legal.end()));
            auto mask = env.legal_mask(s);
            std::size_t ones = 0;
            for (auto b : mask)
                ones += b;
            EXPECT_EQ(ones, legal.size());
            for (const auto &a : legal)
                EXPECT_EQ(mask[kSmall.index(a.x, a.y, a.z)], 1);
            if (legal.empty())
                break;
            std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
            s = env.step(s, legal[pick(rng)]).state;
        }
    }
}

TEST(Environment, Toy3RewardsAndWirelength)
{
    Environment env(make_toy3(), kSmall);
    auto t0 = env.step(env.reset(), {0, 0, 0});
    EXPECT_EQ(t0.delta_wirelength2, 0);
    EXPECT_DOUBLE_EQ(t0.reward.w, 1.0);
    // A lone 2x2 block: each cell gets itself plus two in-layer neighbors.
    EXPECT_DOUBLE_EQ(t0.reward.h, 2.0);
    EXPECT_DOUBLE_EQ(t0.reward.c, 0.0);

    auto t1 = env.step(t0.state, {3, 0, 0});
    // Two A-B nets, each |6| + |1| doubled.
    EXPECT_EQ(t1.delta_wirelength2, 14);
    EXPECT_DOUBLE_EQ(t1.reward.w, 20.0 / 27.0);
    // Both A-B nets spread over the same 4x2 box.
    EXPECT_DOUBLE_EQ(t1.reward.c, 0.25);
    EXPECT_FALSE(t1.done);

    auto t2 = env.step(t1.state, {0, 3, 1});
    EXPECT_TRUE(t2.done);
    EXPECT_EQ(t2.state.wirelength2(), 47);
    EXPECT_DOUBLE_EQ(env.total_wirelength(t2.state), 23.5);
    EXPECT_EQ(t2.state.wirelength2(), oracle::wirelength2(env.netlist(), t2.state.positions()));
}

TEST(Environment, ThermalSingleCells)
{
    Netlist n;
    n.name = "dots";
    n.modules = {{0, "a", 1, 1}, {1, "b", 1, 1}};
    Environment env(n, kSmall);
    auto t0 = env.step(env.reset(), {2, 2, 0});
    EXPECT_DOUBLE_EQ(t0.reward.h, 1.0);
    auto t1 = env.step(t0.state, {2, 2, 1});
    EXPECT_DOUBLE_EQ(t1.reward.h, 1.0);
    EXPECT_DOUBLE_EQ(t1.state.max_heat(), 2.0);
}

TEST(Environment, HeatKernel)
{
    EXPECT_EQ(heat_kernel(0, 0, 0), 1.0);
    EXPECT_EQ(heat_kernel(1, 0, 0), 0.5);
    EXPECT_EQ(heat_kernel(0, -1, 0), 0.5);
    EXPECT_EQ(heat_kernel(0, 0, 1), 1.0);
    EXPECT_EQ(heat_kernel(1, 1, 0), 0.0);
    EXPECT_EQ(heat_kernel(1, 0, 1), 0.0);
    EXPECT_EQ(heat_kernel(0, 0, 2), 0.0);
}

TEST(Environment, NetDensitySingleCellBox)
{
    // Two pins whose centers coincide fill one cell with density 1.
    std::vector<double> map(kSmall.cell_count(), 0.0);
    std::array<std::array<int, 3>, 2> centers{{{2, 3, 1}, {2, 3, 1}}};
    add_net_density(map, kSmall, centers);
    EXPECT_DOUBLE_EQ(map[kSmall.index(2, 3, 1)], 1.0);
    double total = 0.0;
    for (double v : map)
        total += v;
    EXPECT_DOUBLE_EQ(total, 1.0);

    std::vector<double> lone(kSmall.cell_count(), 0.0);
    add_net_density(lone, kSmall, std::span(centers).first(1));
    for (double v : lone)
        EXPECT_EQ(v, 0.0);
}

TEST(Environment, IllegalActions)
{
    Environment env(make_toy3(), kSmall);
    CanvasState s = env.reset();
    try {
        (void)env.step(s, {5, 0, 0});
        FAIL();
    } catch (const IllegalAction &e) {
        EXPECT_EQ(e.reason(), IllegalAction::Reason::out_of_bounds);
        EXPECT_EQ(std::string(e.what()).rfind("out of bounds:", 0), 0u);
    }
    EXPECT_THROW((void)env.step(s, {0, 0, 2}), IllegalAction);
    EXPECT_THROW((void)env.step(s, {-1, 0, 0}), IllegalAction);
    s = env.step(s, {0, 0, 0}).state;
    try {
        (void)env.step(s, {1, 1, 0});
        FAIL();
    } catch (const IllegalAction &e) {
        EXPECT_EQ(e.reason(), IllegalAction::Reason::overlap);
        EXPECT_EQ(std::string(e.what()).rfind("overlap:", 0), 0u);
    }
    s = env.step(s, {0, 0, 1}).state;
    s = env.step(s, {5, 5, 1}).state;
    try {
        (void)env.step(s, {3, 3, 0});
        FAIL();
    } catch (const IllegalAction &e) {
        EXPECT_EQ(e.reason(), IllegalAction::Reason::episode_done);
    }
}

TEST(Environment, StepIsPure)
{
    Environment env(make_toy3(), kSmall);
    CanvasState s = env.reset();
    CanvasState copy = s;
    (void)env.step(s, {1, 1, 0});
    EXPECT_EQ(s, copy);
    EXPECT_EQ(env.step(s, {1, 1, 0}).state, env.step(s, {1, 1, 0}).state);
}

TEST(Environment, FailedWhenNothingFits)
{
    Netlist n;
    n.name = "jam";
    n.modules = {{0, "big", 6, 6}, {1, "big2", 6, 6}, {2, "big3", 6, 6}};
    Environment env(n, kSmall);
    auto t0 = env.step(env.reset(), {0, 0, 0});
    EXPECT_FALSE(t0.state.failed());
    auto t1 = env.step(t0.state, {0, 0, 1});
    EXPECT_FALSE(t1.done);
    EXPECT_TRUE(t1.state.failed());
    EXPECT_TRUE(env.legal_actions(t1.state).empty());
}

TEST(Environment, IncrementalMatchesFromScratch)
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        Environment env(random_netlist(10, 14, 3, rng()), CanvasConfig{8, 8, 2});
        CanvasState s = env.reset();
        std::int64_t summed = 0;
        while (env.next_module(s)) {
            auto legal = env.legal_actions(s);
            if (legal.empty())
                break;
            std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
            auto tr = env.step(s, legal[pick(rng)]);
            summed += tr.delta_wirelength2;
            s = tr.state;
            ASSERT_EQ(s.wirelength2(), env.total_wirelength2(s));
            ASSERT_EQ(s.wirelength2(), oracle::wirelength2(env.netlist(), s.positions()));
            ASSERT_EQ(s.wirelength2(), summed);
        }
    }
}

TEST(Environment, MapsMatchOracles)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        Environment env(random_netlist(7, 9, 3, rng()), kSmall);
        auto actions = oracle::random_actions(env, rng);
        CanvasState prev = env.reset();
        for (const auto &a : actions) {
            auto tr = env.step(prev, a);
            const CanvasState &s = tr.state;
            auto cong = env.congestion_map(s);
            auto expected = oracle::congestion_map(env, s);
            for (std::size_t i = 0; i < cong.size(); ++i)
                ASSERT_NEAR(cong[i], expected[i], 1e-12);
            ASSERT_NEAR(s.max_heat(), oracle::max_heat(kSmall, s.occupancy()), 1e-12);
            const double heat_before = oracle::max_heat(kSmall, prev.occupancy());
            ASSERT_NEAR(tr.reward.h, std::max(0.0, s.max_heat() - heat_before), 1e-12);
            ASSERT_GE(tr.reward.c, 0.0);
            ASSERT_GE(tr.reward.h, 0.0);
            ASSERT_GT(tr.reward.w, 0.0);
            ASSERT_LE(tr.reward.w, 1.0);
            prev = s;
        }
    }
}

TEST(Environment, WirelengthIncreaseMap)
{
    std::mt19937_64 rng(13);
    Environment env(random_netlist(6, 8, 3, rng()), kSmall);
    auto actions = oracle::random_actions(env, rng);
    CanvasState s = env.replay(std::span(actions).first(3));
    auto map = env.wl_increase_map(s);
    auto mask = env.legal_mask(s);
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) {
                const auto i = kSmall.index(x, y, z);
                if (!mask[i]) {
                    EXPECT_EQ(map[i], kIllegalMarker);
                    continue;
                }
                auto tr = env.step(s, {x, y, z});
                EXPECT_DOUBLE_EQ(map[i], tr.delta_wirelength2 / 2.0);
                EXPECT_DOUBLE_EQ(tr.reward.w, reward_wl(map[i], kSmall));
            }
}

TEST(Environment, DifferenceMap)
{
    Environment env(make_toy3(), kSmall);
    CanvasState s0 = env.reset();
    CanvasState s1 = env.step(s0, {1, 2, 1}).state;
    auto diff = difference_map(s0, s1);
    double total = 0.0;
    for (double v : diff)
        total += v;
    EXPECT_EQ(total, 4.0);
    EXPECT_EQ(diff[kSmall.index(1, 2, 1)], 1.0);
    EXPECT_EQ(diff[kSmall.index(2, 3, 1)], 1.0);

    auto maps = env.feature_maps(s0, nullptr);
    for (double v : maps.diff)
        EXPECT_EQ(v, 0.0);
    EXPECT_EQ(env.feature_maps(s1, &s0).diff, diff);
}

TEST(Environment, ReplayAndMetrics)
{
    Environment env(make_toy3(), kSmall);
    std::vector<Anchor> actions{{0, 0, 0}, {3, 0, 0}, {0, 3, 1}};
    CanvasState s = env.replay(actions);
    EXPECT_EQ(s.t(), 3);
    EXPECT_EQ(s.placed_order(), (std::vector<int>{0, 1, 2}));
    auto m = env.metrics(s);
    EXPECT_DOUBLE_EQ(m.total_wirelength, 23.5);
    EXPECT_DOUBLE_EQ(m.max_congestion, s.max_congestion());
    EXPECT_EQ(positions_after(env, actions)[2], (Anchor{0, 3, 1}));
    std::vector<Anchor> bad{{0, 0, 0}, {1, 0, 0}};
    EXPECT_THROW((void)env.replay(bad), IllegalAction);
}
