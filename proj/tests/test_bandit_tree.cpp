#include <gtest/gtest.h>

#include <cmath>

#include "rht/bandit_tree.hpp"
#include "rht/environment.hpp"
#include "rht/invariants.hpp"
#include "rht/random.hpp"

using namespace rht;

namespace {

ItemStore random_store(std::size_t n, int d_c, std::uint64_t seed)
{
    ItemStore store(d_c);
    for (const CourseItem& c : synthetic_items(n, d_c, seed)) {
        store.add(c);
    }
    return store;
}

CellForest fresh_tree(const ItemStore& store) { return make_cell_tree(CellId{{0}}, store); }

InvariantReport check(const CellForest& f, const ItemStore& store, const BoundParams& p)
{
    InvariantReport report;
    verify_forest(f, store, p, report);
    return report;
}

} // namespace

TEST(Bound, TermByTermExample)
{
    const BoundParams p(2.0, 4.0, 1.0, 0.5, 0.25);
    // 0.5 + sqrt(2*4/8) + 1*0.5^2 + 0.25
    EXPECT_EQ(bound_value(8, 0.5, 2, p), 2.0);
}

TEST(Bound, UnvisitedIsInfinite)
{
    const BoundParams p(2.0, 4.0, 1.0, 0.5, 0.25);
    EXPECT_EQ(bound_value(0, 0.0, 0, p), infinity);
    EXPECT_EQ(bound_value(0, 0.9, 17, p), infinity);
}

TEST(Bound, VanishingExplorationTermsLeaveTheMean)
{
    const BoundParams p(0.0, 4.0, 0.0, 0.5, 0.0);
    EXPECT_EQ(bound_value(5, 0.7, 3, p), 0.7);
}

TEST(Bound, TabulatedRegionTermMatchesPow)
{
    const BoundParams p(2.0, std::log(1e5), 1.3, 0.7, 0.0);
    for (int h = 0; h < 3000; h += 7) {
        EXPECT_EQ(p.region_term(h), 1.3 * std::pow(0.7, static_cast<double>(h))) << "h=" << h;
    }
}

TEST(Estimation, Examples)
{
    EXPECT_EQ(estimation_value(0.9, nullptr, nullptr), 0.9);
    const double l = 0.4, r = 0.6;
    EXPECT_EQ(estimation_value(0.5, &l, &r), 0.5);
    const double inf = infinity;
    EXPECT_EQ(estimation_value(0.5, &inf, &inf), 0.5);
    const double low = 0.3;
    EXPECT_EQ(estimation_value(0.5, &low, &l), 0.4);
}

TEST(UpdateMean, Examples)
{
    TreeNode n;
    n.pulls = 1;
    update_mean(n, 0.7);
    EXPECT_EQ(n.mean, 0.7);

    TreeNode m;
    m.pulls = 1;
    update_mean(m, 0.5);
    m.pulls = 2;
    update_mean(m, 0.7);
    EXPECT_NEAR(m.mean, 0.6, 1e-15);

    TreeNode c;
    for (int k = 0; k < 100; ++k) {
        ++c.pulls;
        update_mean(c, 0.3);
    }
    EXPECT_NEAR(c.mean, 0.3, 1e-12);
}

TEST(UpdateMean, RejectsRewardsOutsideUnitInterval)
{
    TreeNode n;
    n.pulls = 1;
    for (double r : {-0.01, 1.01, std::nan("")}) {
        try {
            update_mean(n, r);
            FAIL() << r;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::invalid_reward);
        }
    }
}

TEST(Explore, FreshTreeReturnsRootAndMaterializesChildren)
{
    const ItemStore store = random_store(8, 2, 3);
    CellForest f = fresh_tree(store);
    Rng rng(1);
    const auto path = explore(f, 0, store, rng);
    EXPECT_EQ(path, (std::vector<NodeIndex>{0}));
    ASSERT_TRUE(f.at(0).has_children());
    EXPECT_EQ(f.node_count(), 3U);
    for (NodeIndex c : {f.at(0).left, f.at(0).right()}) {
        EXPECT_EQ(f.at(c).estimation, infinity);
        EXPECT_EQ(f.at(c).bound, infinity);
        EXPECT_EQ(f.at(c).pulls, 0U);
    }
    EXPECT_EQ(f.explored, (std::vector<NodeIndex>{0}));
    EXPECT_TRUE(f.at(0).selected);
}

TEST(Explore, DescendsToLargerEstimation)
{
    const ItemStore store = random_store(8, 2, 3);
    CellForest f = fresh_tree(store);
    Rng rng(1);
    explore(f, 0, store, rng);
    f.at(1).estimation = 2.0;
    f.at(2).estimation = 3.0;
    EXPECT_EQ(explore(f, 0, store, rng), (std::vector<NodeIndex>{0, 2}));
}

TEST(Explore, TiesAreAFairCoin)
{
    const ItemStore store = random_store(8, 2, 3);
    CellForest base = fresh_tree(store);
    Rng rng(2024);
    explore(base, 0, store, rng);
    int right = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        CellForest f = base;
        const auto path = explore(f, 0, store, rng);
        right += path[1] == 2 ? 1 : 0;
    }
    EXPECT_NEAR(right, 5000, 200);
}

TEST(Explore, SkipsEmptyChild)
{
    // Identical items put everything on the left; the right child is dormant.
    ItemStore store(1);
    store.add(CourseItem{1, {0.5}});
    store.add(CourseItem{2, {0.5}});
    CellForest f = fresh_tree(store);
    Rng rng(5);
    explore(f, 0, store, rng);
    EXPECT_TRUE(f.at(2).dormant);
    EXPECT_EQ(f.at(2).estimation, -infinity);
    for (int k = 0; k < 20; ++k) {
        const auto path = explore(f, 0, store, rng);
        for (NodeIndex i : path) {
            EXPECT_FALSE(f.region(i).empty());
        }
        update_path(f, path, 0.5, BoundParams(2.0, std::log(100.0), 1.0, 0.5, 0.0));
    }
}

TEST(Explore, EmptyStartIsNoItems)
{
    ItemStore store(1);
    CellForest f = fresh_tree(store);
    Rng rng(1);
    try {
        explore(f, 0, store, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::no_items);
    }
}

TEST(Feedback, FirstRoundTrace)
{
    const ItemStore store = random_store(8, 2, 3);
    const BoundParams p(2.0, std::log(1000.0), 1.0, 0.5, 0.0);
    CellForest f = fresh_tree(store);
    Rng rng(1);
    update_path(f, explore(f, 0, store, rng), 0.6, p);
    EXPECT_EQ(f.at(0).pulls, 1U);
    EXPECT_EQ(f.at(0).mean, 0.6);
    EXPECT_EQ(f.at(0).bound, 0.6 + std::sqrt(2.0 * std::log(1000.0)) + 1.0);
    // Children still unvisited, so E = min(B, +inf) = B.
    EXPECT_EQ(f.at(0).estimation, f.at(0).bound);
}

TEST(Feedback, TwoRoundTrace)
{
    const ItemStore store = random_store(8, 2, 3);
    const BoundParams p(2.0, std::log(1000.0), 1.0, 0.5, 0.0);
    CellForest f = fresh_tree(store);
    Rng rng(1);
    update_path(f, explore(f, 0, store, rng), 0.6, p);
    const auto path = explore(f, 0, store, rng);
    ASSERT_EQ(path.size(), 2U);
    update_path(f, path, 0.2, p);
    EXPECT_EQ(f.explored.size(), 2U);
    EXPECT_EQ(f.at(0).pulls, 2U);
    EXPECT_EQ(f.at(path[1]).pulls, 1U);
    EXPECT_EQ(f.at(path[1]).depth, 1);
    EXPECT_NEAR(f.at(0).mean, 0.4, 1e-15);
    EXPECT_EQ(f.node_count(), 5U);
}

TEST(Feedback, RejectsInvalidRewardWithoutMutation)
{
    const ItemStore store = random_store(8, 2, 3);
    const BoundParams p(2.0, std::log(1000.0), 1.0, 0.5, 0.0);
    CellForest f = fresh_tree(store);
    Rng rng(1);
    const auto path = explore(f, 0, store, rng);
    EXPECT_THROW(update_path(f, path, 1.5, p), Error);
    EXPECT_EQ(f.at(0).pulls, 0U);
    EXPECT_EQ(f.rounds, 0U);
}

TEST(Tree, InvariantsAndLinearGrowthOverRandomRuns)
{
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        Rng rng(seed);
        const int d_c = 1 + static_cast<int>(seed % 3);
        const ItemStore store = random_store(1 + uniform_index(rng, 50), d_c, seed);
        const BoundParams p(2.0, std::log(500.0), 1.0, 0.5, 0.1);
        CellForest f = fresh_tree(store);
        for (std::uint64_t t = 1; t <= 300; ++t) {
            const auto path = explore(f, 0, store, rng);
            update_path(f, path, uniform01(rng), p);
            ASSERT_EQ(f.node_count(), 1 + 2 * t);
            if (t % 25 == 0 || t < 10) {
                const InvariantReport r = check(f, store, p);
                ASSERT_TRUE(r.ok()) << r.violations.front();
            }
        }
    }
}

// The descent picks, at every level, the child whose E is largest among
// the sibling pair. Checked by scanning all materialized nodes of small
// trees.
TEST(Tree, PathFollowsSiblingArgmax)
{
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Rng rng(seed);
        const ItemStore store = random_store(16, 2, seed + 100);
        const BoundParams p(2.0, std::log(100.0), 1.0, 0.5, 0.0);
        CellForest f = fresh_tree(store);
        while (f.node_count() + 2 <= 64) {
            const CellForest before = f;
            const auto path = explore(f, 0, store, rng);
            for (std::size_t k = 1; k < path.size(); ++k) {
                const NodeIndex chosen = path[k];
                const NodeIndex parent = before.at(chosen).parent;
                ASSERT_EQ(parent, path[k - 1]);
                for (std::size_t idx = 0; idx < before.node_count(); ++idx) {
                    if (before.nodes[idx].parent == parent && before.nodes[idx].depth == before.at(chosen).depth) {
                        EXPECT_GE(before.at(chosen).estimation, before.nodes[idx].estimation)
                            << "seed " << seed << " depth " << k;
                    }
                }
            }
            update_path(f, path, uniform01(rng), p);
        }
    }
}

TEST(RouteItem, FollowsRecordedSplits)
{
    ItemStore store(1);
    store.add(CourseItem{1, {0.2}});
    store.add(CourseItem{2, {0.5}});
    store.add(CourseItem{3, {0.8}});
    store.add(CourseItem{4, {0.9}});
    CellForest f = fresh_tree(store);
    Rng rng(1);
    explore(f, 0, store, rng);
    ASSERT_EQ(f.region(0).split_threshold, 0.5);
    store.add(CourseItem{5, {0.05}});
    route_item(f, 0, 5, store);
    EXPECT_TRUE(std::binary_search(f.region(0).items.begin(), f.region(0).items.end(), 5));
    EXPECT_TRUE(std::binary_search(f.region(1).items.begin(), f.region(1).items.end(), 5));
    EXPECT_FALSE(std::binary_search(f.region(2).items.begin(), f.region(2).items.end(), 5));
}
