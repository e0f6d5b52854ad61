#include "oracles.hpp"

#include "fp3d/sldas.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace fp3d;

namespace {

const CanvasConfig kSmall{6, 6, 2};

std::vector<Anchor> all_anchors(const CanvasConfig &cfg)
{
    std::vector<Anchor> out;
    for (int x = 0; x < cfg.width; ++x)
        for (int y = 0; y < cfg.height; ++y)
            for (int z = 0; z < cfg.layers; ++z)
                out.push_back({x, y, z});
    return out;
}

} // namespace

TEST(Sldas, Normalize)
{
    auto p = normalize({2, 3, 1}, kSmall);
    EXPECT_DOUBLE_EQ(p[0], 0.4);
    EXPECT_DOUBLE_EQ(p[1], 0.6);
    EXPECT_DOUBLE_EQ(p[2], 1.0);
    EXPECT_EQ(normalize({3, 3, 0}, CanvasConfig{6, 6, 1})[2], 0.0);
}

TEST(Sldas, KnnCenterOfLayer)
{
    auto legal = all_anchors(kSmall);
    auto set = knn({{0.5, 0.5, 0.0}}, legal, 4, kSmall);
    ASSERT_EQ(set.candidates.size(), 4u);
    std::set<Anchor> got;
    for (const auto &c : set.candidates) {
        got.insert(c.anchor);
        EXPECT_NEAR(c.distance, std::sqrt(0.02), 1e-12);
    }
    EXPECT_EQ(got, (std::set<Anchor>{{2, 2, 0}, {2, 3, 0}, {3, 2, 0}, {3, 3, 0}}));
    EXPECT_EQ(set.psi_k, set.candidates.front().distance);
}

TEST(Sldas, KnnEdgeCases)
{
    std::vector<Anchor> two{{5, 5, 1}, {0, 0, 0}};
    auto set = knn({{0.1, 0.1, 0.0}}, two, 5, kSmall);
    ASSERT_EQ(set.candidates.size(), 2u);
    EXPECT_EQ(set.candidates[0].anchor, (Anchor{0, 0, 0}));

    std::vector<Anchor> empty;
    EXPECT_THROW(knn({}, empty, 3, kSmall), std::invalid_argument);
    EXPECT_THROW(knn({}, two, 0, kSmall), std::invalid_argument);

    // Exact hit.
    auto hit = knn(normalize({5, 5, 1}, kSmall), two, 1, kSmall);
    EXPECT_EQ(hit.psi_k, 0.0);
}

TEST(Sldas, KnnTiesByCoordinate)
{
    // (1,0,0) and (0,1,0) are equidistant from the origin proposal on a square canvas.
    std::vector<Anchor> legal{{0, 1, 0}, {1, 0, 0}};
    auto set = knn({{0.0, 0.0, 0.0}}, legal, 1, kSmall);
    EXPECT_EQ(set.candidates[0].anchor, (Anchor{0, 1, 0}));
}

TEST(Sldas, KnnMatchesFullSort)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto every = all_anchors(kSmall);
    for (int i = 0; i < 500; ++i) {
        std::vector<Anchor> legal;
        for (const auto &a : every)
            if (u(rng) < 0.4)
                legal.push_back(a);
        if (legal.empty())
            continue;
        ContinuousAction p{{u(rng), u(rng), u(rng)}};
        const int k = 1 + int(rng() % 8);
        auto got = knn(p, legal, k, kSmall);
        auto want = oracle::knn_full_sort(p, legal, k, kSmall);
        ASSERT_EQ(got.candidates.size(), want.size());
        for (std::size_t j = 0; j < want.size(); ++j) {
            EXPECT_EQ(got.candidates[j].anchor, want[j].anchor);
            EXPECT_EQ(got.candidates[j].distance, want[j].distance);
        }
        EXPECT_EQ(got.psi_k, want.front().distance);
    }
}

TEST(Sldas, SelectAction)
{
    std::vector<Rtg> preds{{5, 0, 0}, {7, 0, 0}, {6.5, 0, 0}};
    EXPECT_EQ(select_action(preds, {6.6, 0, 0}), 2u);
    std::vector<Rtg> tie{{1, 0, 0}, {3, 0, 0}};
    EXPECT_EQ(select_action(tie, {2, 0, 0}), 0u);
    std::vector<Rtg> one{{9, 9, 9}};
    EXPECT_EQ(select_action(one, {0, 0, 0}), 0u);
    std::vector<Rtg> none;
    EXPECT_THROW(select_action(none, {0, 0, 0}), std::invalid_argument);
    // Weights can silence components.
    std::vector<Rtg> w{{0, 5, 0}, {1, 0, 0}};
    EXPECT_EQ(select_action(w, {0, 0, 0}, {1, 0, 0}), 0u);
    EXPECT_EQ(select_action(w, {0, 0, 0}), 1u);
}

TEST(Sldas, SelectActionMatchesOracle)
{
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> coarse(0, 4);
    std::uniform_real_distribution<double> fine(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng() % 6;
        std::vector<Rtg> preds(n);
        // Coarse values on half the draws force exact ties.
        const bool ties = i % 2 == 0;
        for (auto &p : preds)
            for (auto &v : p)
                v = ties ? coarse(rng) : fine(rng);
        Rtg target{fine(rng), fine(rng), fine(rng)};
        if (ties)
            target = {double(coarse(rng)), double(coarse(rng)), double(coarse(rng))};
        EXPECT_EQ(select_action(preds, target), oracle::l1_argmin(preds, target));
    }
}
